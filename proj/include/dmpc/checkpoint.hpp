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

#ifndef DMPC_CHECKPOINT_HPP_
#define DMPC_CHECKPOINT_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>

#include "dmpc/diffcore.hpp"

namespace dmpc {

// Binary checkpoint layout, little-endian:
//   magic "DMPC", format version u32, header (caller-defined), then per
//   stack: layer count u32, per layer (rows u32, cols u32, post-op tag u8,
//   row-major f64 weights, f64 biases).
// Round-trips are bit-exact.

inline constexpr uint32_t kCheckpointVersion = 1;

class ByteWriter {
 public:
  explicit ByteWriter(std::ostream& out) : out_(out) {}
  void U8(uint8_t v);
  void U32(uint32_t v);
  void U64(uint64_t v);
  void F64(double v);

 private:
  std::ostream& out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::istream& in) : in_(in) {}
  uint8_t U8();
  uint32_t U32();
  uint64_t U64();
  double F64();

 private:
  std::istream& in_;
};

// Writes/checks the magic and format version.
void WriteHeader(ByteWriter& w);
void ReadHeader(ByteReader& r);  // throws std::runtime_error on mismatch

void WriteStack(ByteWriter& w, const DenseStack& stack);
// `simnorm_group` and per-layer dropout are configuration, not persisted state.
DenseStack ReadStack(ByteReader& r, int simnorm_group);

}  // namespace dmpc

#endif  // DMPC_CHECKPOINT_HPP_
