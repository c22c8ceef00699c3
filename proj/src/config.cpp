// Copyright 2026 dmpc contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dmpc/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace dmpc {

namespace {

std::string Trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

// Binds "section.key" names to config fields for parsing and snapshotting.
class Binder {
 public:
  explicit Binder(RunConfig& c) : c_(c) {
    BindString("run.name", c_.name);
    BindU64("run.seed", c_.seed);
    BindString("run.out_dir", c_.out_dir);

    BindString("env.kind", c_.env);
    BindInt("env.episode_length", c_.episode_length);
    BindInt("env.action_repeat", c_.action_repeat);

    BindInt("model.latent_dim", c_.model.latent_dim);
    BindInt("model.hidden_dim", c_.model.hidden_dim);
    BindInt("model.simnorm_group", c_.model.simnorm_group);
    BindInt("model.q_ensemble", c_.model.ensemble);
    BindDouble("model.gamma", c_.model.gamma);
    BindDouble("model.log_std_min", c_.model.log_std_min);
    BindDouble("model.log_std_max", c_.model.log_std_max);
    BindDouble("model.q_dropout", c_.model.q_dropout);

    BindLong("train.total_steps", c_.total_steps);
    BindLong("train.seed_steps", c_.seed_steps);
    BindInt("train.utd_ratio", c_.utd_ratio);
    BindInt("train.batch_size", c_.batch_size);
    BindLong("train.buffer_capacity", c_.buffer_capacity);
    BindLong("train.eval_interval", c_.eval_interval);
    BindInt("train.eval_episodes", c_.eval_episodes);
    BindString("train.planner", c_.planner);
    BindInt("train.nonfinite_abort_streak", c_.nonfinite_abort_streak);
    BindInt("train.horizon", c_.hyper.horizon);
    BindDouble("train.lr", c_.hyper.lr);
    BindDouble("train.grad_clip_norm", c_.hyper.grad_clip_norm);
    BindDouble("train.consistency_coef", c_.hyper.consistency_coef);
    BindDouble("train.reward_coef", c_.hyper.reward_coef);
    BindDouble("train.value_coef", c_.hyper.value_coef);
    BindDouble("train.temporal_lambda", c_.hyper.temporal_lambda);
    BindDouble("train.target_momentum", c_.hyper.target_momentum);
    BindDouble("train.entropy_coef", c_.hyper.entropy_coef);
    BindDouble("train.scale_tau", c_.hyper.scale_tau);

    BindInt("planner.horizon", c_.planner_config.horizon);
    BindInt("planner.iterations", c_.planner_config.iterations);
    BindInt("planner.candidates", c_.planner_config.candidates);
    BindDouble("planner.alpha", c_.planner_config.alpha);
    BindDouble("planner.rho", c_.planner_config.rho);
    BindDouble("planner.lambda_unc", c_.planner_config.lambda_unc);
    BindDouble("planner.sigma_perturb", c_.planner_config.sigma_perturb);
    BindBool("planner.deterministic_candidates", c_.planner_config.deterministic_candidates);
    BindString("planner.proposal", c_.planner_config.proposal);
    BindDouble("planner.gaussian_std", c_.planner_config.gaussian_std);
    BindBool("planner.uncertainty_abs_mean", c_.planner_config.uncertainty_abs_mean);
    BindBool("planner.uncertainty_stop_grad", c_.planner_config.uncertainty_stop_grad);

    BindInt("mppi.population", c_.planner_config.mppi.population);
    BindInt("mppi.policy_samples", c_.planner_config.mppi.policy_samples);
    BindInt("mppi.elites", c_.planner_config.mppi.elites);
    BindInt("mppi.iterations", c_.planner_config.mppi.iterations);
    BindDouble("mppi.temperature", c_.planner_config.mppi.temperature);
    BindDouble("mppi.std_min", c_.planner_config.mppi.std_min);
    BindDouble("mppi.std_max", c_.planner_config.mppi.std_max);
    BindDouble("mppi.lambda_unc", c_.planner_config.mppi.lambda_unc);
  }

  void Set(const std::string& key, const std::string& value) {
    auto it = setters_.find(key);
    if (it == setters_.end()) throw ConfigError("unknown config key: " + key);
    it->second(value);
  }

  std::string Snapshot() const {
    std::string out;
    std::string section;
    for (const auto& [key, getter] : getters_) {  // std::map: sorted, byte-stable
      const auto dot = key.find('.');
      const std::string sec = key.substr(0, dot);
      if (sec != section) {
        if (!section.empty()) out += "\n";
        out += "[" + sec + "]\n";
        section = sec;
      }
      out += key.substr(dot + 1) + " = " + getter() + "\n";
    }
    return out;
  }

 private:
  void BindString(const std::string& key, std::string& field) {
    setters_[key] = [&field](const std::string& v) { field = v; };
    getters_[key] = [&field] { return field; };
  }
  void BindInt(const std::string& key, int& field) {
    setters_[key] = [&field, key](const std::string& v) { field = ParseLong(v, key); };
    getters_[key] = [&field] { return std::to_string(field); };
  }
  void BindLong(const std::string& key, long& field) {
    setters_[key] = [&field, key](const std::string& v) { field = ParseLong(v, key); };
    getters_[key] = [&field] { return std::to_string(field); };
  }
  void BindU64(const std::string& key, uint64_t& field) {
    setters_[key] = [&field, key](const std::string& v) {
      try {
        field = std::stoull(v);
      } catch (...) {
        throw ConfigError("invalid integer for " + key + ": " + v);
      }
    };
    getters_[key] = [&field] { return std::to_string(field); };
  }
  void BindDouble(const std::string& key, double& field) {
    setters_[key] = [&field, key](const std::string& v) {
      try {
        size_t pos = 0;
        field = std::stod(v, &pos);
        if (pos != v.size()) throw ConfigError("");
      } catch (...) {
        throw ConfigError("invalid number for " + key + ": " + v);
      }
    };
    getters_[key] = [&field] {
      char buf[40];
      std::snprintf(buf, sizeof(buf), "%.17g", field);
      return std::string(buf);
    };
  }
  void BindBool(const std::string& key, bool& field) {
    setters_[key] = [&field, key](const std::string& v) {
      if (v == "true" || v == "1")
        field = true;
      else if (v == "false" || v == "0")
        field = false;
      else
        throw ConfigError("invalid bool for " + key + ": " + v);
    };
    getters_[key] = [&field] { return std::string(field ? "true" : "false"); };
  }
  static long ParseLong(const std::string& v, const std::string& key) {
    try {
      size_t pos = 0;
      const long out = std::stol(v, &pos);
      if (pos != v.size()) throw ConfigError("");
      return out;
    } catch (...) {
      throw ConfigError("invalid integer for " + key + ": " + v);
    }
  }

  RunConfig& c_;
  std::map<std::string, std::function<void(const std::string&)>> setters_;
  std::map<std::string, std::function<std::string()>> getters_;
};

void ApplyFile(Binder& binder, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = Trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(path + ":" + std::to_string(lineno) + ": malformed section");
      section = Trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = Trim(line.substr(0, eq));
    const std::string value = Trim(line.substr(eq + 1));
    if (section.empty()) throw ConfigError(path + ":" + std::to_string(lineno) + ": key outside a section");
    binder.Set(section + "." + key, value);
  }
}

void ApplyOverrides(Binder& binder, const std::vector<std::string>& overrides) {
  for (const std::string& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override must be section.key=value: " + o);
    binder.Set(Trim(o.substr(0, eq)), Trim(o.substr(eq + 1)));
  }
}

}  // namespace

void RunConfig::Validate() const {
  if (env != "pendulum" && env != "cartpole") throw ConfigError("env.kind must be pendulum or cartpole");
  if (planner != "policy" && planner != "mppi" && planner != "dream_mpc")
    throw ConfigError("train.planner must be policy, mppi, or dream_mpc");
  if (total_steps < 0 || seed_steps < 0) throw ConfigError("step counts must be non-negative");
  if (batch_size < 1 || utd_ratio < 0) throw ConfigError("bad batch_size/utd_ratio");
  if (buffer_capacity < batch_size) throw ConfigError("buffer_capacity must cover a batch");
  if (hyper.horizon < 1) throw ConfigError("train.horizon must be >= 1");
  if (total_steps > 0 && total_steps > seed_steps && seed_steps < hyper.horizon + 1)
    throw ConfigError("train.seed_steps below batch-coverage minimum (horizon + 1)");
  if (model.latent_dim % model.simnorm_group != 0)
    throw ConfigError("model.latent_dim must be divisible by simnorm_group");
  if (model.ensemble < 2) throw ConfigError("model.q_ensemble must be >= 2");
  if (model.gamma <= 0.0 || model.gamma >= 1.0) throw ConfigError("model.gamma must be in (0, 1)");
  try {
    planner_config.Validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

RunConfig ParseRunConfig(const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig config;
  Binder binder(config);
  ApplyFile(binder, path);
  ApplyOverrides(binder, overrides);
  config.Validate();
  return config;
}

RunConfig MakeRunConfig(const std::vector<std::string>& overrides) {
  RunConfig config;
  Binder binder(config);
  ApplyOverrides(binder, overrides);
  config.Validate();
  return config;
}

std::string ConfigSnapshot(const RunConfig& config) {
  RunConfig copy = config;
  Binder binder(copy);
  return binder.Snapshot();
}

}  // namespace dmpc
