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

#include "dmpc/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace dmpc {

namespace {

template <typename T>
void WriteLE(std::ostream& out, T v) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  // Host is little-endian on all supported targets; fall back to an explicit
  // byte swap if that ever changes.
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T ReadLE(std::istream& in) {
  unsigned char buf[sizeof(T)];
  in.read(reinterpret_cast<char*>(buf), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint: truncated stream");
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

}  // namespace

void ByteWriter::U8(uint8_t v) { WriteLE(out_, v); }
void ByteWriter::U32(uint32_t v) { WriteLE(out_, v); }
void ByteWriter::U64(uint64_t v) { WriteLE(out_, v); }
void ByteWriter::F64(double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  WriteLE(out_, bits);
}

uint8_t ByteReader::U8() { return ReadLE<uint8_t>(in_); }
uint32_t ByteReader::U32() { return ReadLE<uint32_t>(in_); }
uint64_t ByteReader::U64() { return ReadLE<uint64_t>(in_); }
double ByteReader::F64() {
  const uint64_t bits = ReadLE<uint64_t>(in_);
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

void WriteHeader(ByteWriter& w) {
  for (char c : {'D', 'M', 'P', 'C'}) w.U8(static_cast<uint8_t>(c));
  w.U32(kCheckpointVersion);
}

void ReadHeader(ByteReader& r) {
  const char magic[4] = {'D', 'M', 'P', 'C'};
  for (char c : magic)
    if (r.U8() != static_cast<uint8_t>(c)) throw std::runtime_error("checkpoint: bad magic");
  const uint32_t version = r.U32();
  if (version != kCheckpointVersion) throw std::runtime_error("checkpoint: unsupported format version");
}

void WriteStack(ByteWriter& w, const DenseStack& stack) {
  w.U32(static_cast<uint32_t>(stack.layers.size()));
  for (const DenseLayer& l : stack.layers) {
    const uint32_t rows = static_cast<uint32_t>(l.weight.rows());
    const uint32_t cols = static_cast<uint32_t>(l.weight.cols());
    w.U32(rows);
    w.U32(cols);
    w.U8(static_cast<uint8_t>(l.post));
    for (uint32_t r = 0; r < rows; ++r)
      for (uint32_t c = 0; c < cols; ++c) w.F64(l.weight(r, c));
    for (uint32_t r = 0; r < rows; ++r) w.F64(l.bias(r));
  }
}

DenseStack ReadStack(ByteReader& r, int simnorm_group) {
  DenseStack stack;
  stack.simnorm_group = simnorm_group;
  const uint32_t count = r.U32();
  stack.layers.resize(count);
  for (uint32_t i = 0; i < count; ++i) {
    DenseLayer& l = stack.layers[i];
    const uint32_t rows = r.U32();
    const uint32_t cols = r.U32();
    const uint8_t tag = r.U8();
    if (tag > static_cast<uint8_t>(PostOp::kTanh)) throw std::runtime_error("checkpoint: unknown post-op tag");
    l.post = static_cast<PostOp>(tag);
    l.weight.resize(rows, cols);
    for (uint32_t rr = 0; rr < rows; ++rr)
      for (uint32_t cc = 0; cc < cols; ++cc) l.weight(rr, cc) = r.F64();
    l.bias.resize(rows);
    for (uint32_t rr = 0; rr < rows; ++rr) l.bias(rr) = r.F64();
  }
  return stack;
}

}  // namespace dmpc
