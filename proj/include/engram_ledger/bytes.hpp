#pragma once

// Big-endian byte serialization helpers shared by the canonical encodings.

#include <cstdint>
#include <cstring>
#include <span>
#include <string_view>
#include <vector>

#include "engram_ledger/errors.hpp"

namespace engram_ledger {

using Bytes = std::vector<std::uint8_t>;

class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }

  void u32_be(std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out_.push_back(static_cast<std::uint8_t>(v >> s));
  }

  void u64_be(std::uint64_t v) {
    for (int s = 56; s >= 0; s -= 8) out_.push_back(static_cast<std::uint8_t>(v >> s));
  }

  void f64_be(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    u64_be(bits);
  }

  void raw(std::span<const std::uint8_t> data) {
    out_.insert(out_.end(), data.begin(), data.end());
  }

  void raw(std::string_view s) {
    out_.insert(out_.end(), s.begin(), s.end());
  }

  const Bytes& bytes() const { return out_; }
  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8() { return take(1)[0]; }

  std::uint32_t u32_be() {
    auto b = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | b[i];
    return v;
  }

  std::uint64_t u64_be() {
    auto b = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | b[i];
    return v;
  }

  double f64_be() {
    std::uint64_t bits = u64_be();
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }

  std::span<const std::uint8_t> take(std::size_t n) {
    if (n > data_.size() - pos_)
      throw ParseError("byte stream truncated");
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace engram_ledger
