#pragma once

// 256-bit digests for chain linkage, payload integrity, and the
// proof-of-work puzzle. The hash is SHA-256 (FIPS 180-4), implemented
// inline so the library stays header-only and bit-exact everywhere;
// standard test vectors pin the behavior in the test suite.

#include <array>
#include <bit>
#include <compare>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>

#include "engram_ledger/errors.hpp"

namespace engram_ledger {

struct Digest {
  std::array<std::uint8_t, 32> bytes{};

  auto operator<=>(const Digest&) const = default;

  std::string hex() const {
    static constexpr char k[] = "0123456789abcdef";
    std::string s;
    s.reserve(64);
    for (auto b : bytes) {
      s.push_back(k[b >> 4]);
      s.push_back(k[b & 0x0f]);
    }
    return s;
  }

  static Digest from_hex(std::string_view hex) {
    if (hex.size() != 64) throw ParseError("digest hex must be 64 chars");
    auto nib = [](char c) -> int {
      if (c >= '0' && c <= '9') return c - '0';
      if (c >= 'a' && c <= 'f') return c - 'a' + 10;
      if (c >= 'A' && c <= 'F') return c - 'A' + 10;
      throw ParseError("bad hex digit in digest");
    };
    Digest d;
    for (std::size_t i = 0; i < 32; ++i)
      d.bytes[i] = static_cast<std::uint8_t>((nib(hex[2 * i]) << 4) | nib(hex[2 * i + 1]));
    return d;
  }

  // Count of leading zero bits; the proof-of-work criterion.
  int leading_zero_bits() const {
    int n = 0;
    for (auto b : bytes) {
      if (b == 0) {
        n += 8;
        continue;
      }
      n += std::countl_zero(b);
      break;
    }
    return n;
  }

  bool is_zero() const {
    for (auto b : bytes)
      if (b != 0) return false;
    return true;
  }
};

namespace detail {

class Sha256 {
 public:
  Sha256() { reset(); }

  void reset() {
    state_ = {0x6a09e667u, 0xbb67ae85u, 0x3c6ef372u, 0xa54ff53au,
              0x510e527fu, 0x9b05688cu, 0x1f83d9abu, 0x5be0cd19u};
    total_ = 0;
    buflen_ = 0;
  }

  void update(const std::uint8_t* data, std::size_t len) {
    total_ += len;
    while (len > 0) {
      const std::size_t take = std::min<std::size_t>(64 - buflen_, len);
      std::memcpy(buf_.data() + buflen_, data, take);
      buflen_ += take;
      data += take;
      len -= take;
      if (buflen_ == 64) {
        compress(buf_.data());
        buflen_ = 0;
      }
    }
  }

  Digest finish() {
    const std::uint64_t bitlen = total_ * 8;
    const std::uint8_t pad = 0x80;
    update(&pad, 1);
    static constexpr std::uint8_t zero[64] = {};
    while (buflen_ != 56) update(zero, buflen_ < 56 ? 56 - buflen_ : 64 - buflen_ + 56);
    std::uint8_t lenb[8];
    for (int i = 0; i < 8; ++i) lenb[i] = static_cast<std::uint8_t>(bitlen >> (56 - 8 * i));
    // bypass update() so total_ stays out of the length block
    std::memcpy(buf_.data() + 56, lenb, 8);
    compress(buf_.data());
    Digest d;
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 4; ++j)
        d.bytes[4 * i + j] = static_cast<std::uint8_t>(state_[i] >> (24 - 8 * j));
    return d;
  }

 private:
  static std::uint32_t rotr(std::uint32_t x, int n) { return std::rotr(x, n); }

  void compress(const std::uint8_t* p) {
    static constexpr std::uint32_t K[64] = {
        0x428a2f98u, 0x71374491u, 0xb5c0fbcfu, 0xe9b5dba5u, 0x3956c25bu, 0x59f111f1u,
        0x923f82a4u, 0xab1c5ed5u, 0xd807aa98u, 0x12835b01u, 0x243185beu, 0x550c7dc3u,
        0x72be5d74u, 0x80deb1feu, 0x9bdc06a7u, 0xc19bf174u, 0xe49b69c1u, 0xefbe4786u,
        0x0fc19dc6u, 0x240ca1ccu, 0x2de92c6fu, 0x4a7484aau, 0x5cb0a9dcu, 0x76f988dau,
        0x983e5152u, 0xa831c66du, 0xb00327c8u, 0xbf597fc7u, 0xc6e00bf3u, 0xd5a79147u,
        0x06ca6351u, 0x14292967u, 0x27b70a85u, 0x2e1b2138u, 0x4d2c6dfcu, 0x53380d13u,
        0x650a7354u, 0x766a0abbu, 0x81c2c92eu, 0x92722c85u, 0xa2bfe8a1u, 0xa81a664bu,
        0xc24b8b70u, 0xc76c51a3u, 0xd192e819u, 0xd6990624u, 0xf40e3585u, 0x106aa070u,
        0x19a4c116u, 0x1e376c08u, 0x2748774cu, 0x34b0bcb5u, 0x391c0cb3u, 0x4ed8aa4au,
        0x5b9cca4fu, 0x682e6ff3u, 0x748f82eeu, 0x78a5636fu, 0x84c87814u, 0x8cc70208u,
        0x90befffau, 0xa4506cebu, 0xbef9a3f7u, 0xc67178f2u};
    std::uint32_t w[64];
    for (int i = 0; i < 16; ++i)
      w[i] = (std::uint32_t(p[4 * i]) << 24) | (std::uint32_t(p[4 * i + 1]) << 16) |
             (std::uint32_t(p[4 * i + 2]) << 8) | std::uint32_t(p[4 * i + 3]);
    for (int i = 16; i < 64; ++i) {
      const std::uint32_t s0 = rotr(w[i - 15], 7) ^ rotr(w[i - 15], 18) ^ (w[i - 15] >> 3);
      const std::uint32_t s1 = rotr(w[i - 2], 17) ^ rotr(w[i - 2], 19) ^ (w[i - 2] >> 10);
      w[i] = w[i - 16] + s0 + w[i - 7] + s1;
    }
    auto a = state_[0], b = state_[1], c = state_[2], d = state_[3];
    auto e = state_[4], f = state_[5], g = state_[6], h = state_[7];
    for (int i = 0; i < 64; ++i) {
      const std::uint32_t S1 = rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25);
      const std::uint32_t ch = (e & f) ^ (~e & g);
      const std::uint32_t t1 = h + S1 + ch + K[i] + w[i];
      const std::uint32_t S0 = rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22);
      const std::uint32_t maj = (a & b) ^ (a & c) ^ (b & c);
      const std::uint32_t t2 = S0 + maj;
      h = g; g = f; f = e; e = d + t1;
      d = c; c = b; b = a; a = t1 + t2;
    }
    state_[0] += a; state_[1] += b; state_[2] += c; state_[3] += d;
    state_[4] += e; state_[5] += f; state_[6] += g; state_[7] += h;
  }

  std::array<std::uint32_t, 8> state_;
  std::array<std::uint8_t, 64> buf_;
  std::uint64_t total_ = 0;
  std::size_t buflen_ = 0;
};

}  // namespace detail

inline Digest hash_bytes(std::span<const std::uint8_t> data) {
  detail::Sha256 h;
  h.update(data.data(), data.size());
  return h.finish();
}

inline Digest hash_bytes(std::string_view data) {
  return hash_bytes(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
}

/// Digest of a canonically encoded block header; used both for chain
/// linkage and the puzzle check.
inline Digest block_digest(std::span<const std::uint8_t> header_bytes) {
  return hash_bytes(header_bytes);
}

}  // namespace engram_ledger
