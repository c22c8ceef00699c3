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

#ifndef DMPC_CSV_HPP_
#define DMPC_CSV_HPP_

#include <fstream>
#include <string>
#include <vector>

namespace dmpc {

// Locale-independent '.'-decimal formatting, stable across runs.
std::string FormatDouble(double v);

// Comma-separated writer with a header row. Cells are written verbatim;
// numeric cells should go through FormatDouble.
class CsvWriter {
 public:
  CsvWriter() = default;
  CsvWriter(const std::string& path, const std::vector<std::string>& header);
  void Open(const std::string& path, const std::vector<std::string>& header);
  void Row(const std::vector<std::string>& cells);
  void Flush();
  bool is_open() const { return out_.is_open(); }

 private:
  std::ofstream out_;
  size_t columns_ = 0;
};

}  // namespace dmpc

#endif  // DMPC_CSV_HPP_
