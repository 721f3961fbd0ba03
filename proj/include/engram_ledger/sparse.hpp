#pragma once

// Sparse pattern-separation encoder: a seeded random projection followed by
// k-winners-take-all. Similar inputs map to decorrelated k-sparse index
// sets over a much larger population, the same role hashing plays for the
// ledger.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <set>
#include <span>
#include <vector>

#include "engram_ledger/errors.hpp"
#include "engram_ledger/rng.hpp"

namespace engram_ledger {

struct SparseCode {
  std::vector<std::uint32_t> active;  // sorted ascending, exactly k entries
  std::uint32_t n_total = 0;
  std::uint32_t k = 0;
};

struct SeparatorParams {
  std::uint32_t input_dim = 1024;  // D
  std::uint32_t n_total = 2048;    // N
  std::uint32_t k = 40;            // ~2% sparsity
  std::uint64_t seed = 0;

  void validate() const {
    if (input_dim == 0 || n_total == 0 || k == 0)
      throw RangeError("separator dimensions must be positive");
    if (k > n_total / 10)
      throw RangeError("sparse code requires k <= N/10");
  }
};

struct OverlapStats {
  std::uint32_t shared = 0;
  double jaccard = 0.0;
};

inline OverlapStats code_overlap(const SparseCode& a, const SparseCode& b) {
  if (a.n_total != b.n_total)
    throw PopulationMismatch("codes come from different populations");
  std::vector<std::uint32_t> inter;
  std::set_intersection(a.active.begin(), a.active.end(), b.active.begin(),
                        b.active.end(), std::back_inserter(inter));
  OverlapStats s;
  s.shared = static_cast<std::uint32_t>(inter.size());
  const std::size_t uni = a.active.size() + b.active.size() - inter.size();
  s.jaccard = uni == 0 ? 0.0 : static_cast<double>(inter.size()) / static_cast<double>(uni);
  return s;
}

// Owns the materialized +/-1 projection so repeated encodes amortize the
// matrix generation. The matrix is a pure function of the seed: entries are
// drawn row-major, one sign bit per entry, from a splitmix64 stream.
class SparseSeparator {
 public:
  explicit SparseSeparator(const SeparatorParams& params) : params_(params) {
    params_.validate();
    const std::size_t total =
        static_cast<std::size_t>(params_.n_total) * params_.input_dim;
    signs_.resize(total);
    Rng rng(params_.seed);
    std::uint64_t word = 0;
    int avail = 0;
    for (std::size_t i = 0; i < total; ++i) {
      if (avail == 0) {
        word = rng.next_u64();
        avail = 64;
      }
      signs_[i] = (word & 1) ? 1.0f : -1.0f;
      word >>= 1;
      --avail;
    }
  }

  const SeparatorParams& params() const { return params_; }

  SparseCode encode(std::span<const double> input) const {
    if (input.size() != params_.input_dim)
      throw DimensionMismatch("input dimension does not match separator");
    bool all_zero = true;
    for (double v : input)
      if (v != 0.0) { all_zero = false; break; }
    if (all_zero) throw DegenerateInput("all-zero input has no winners");

    const std::uint32_t n = params_.n_total;
    const std::uint32_t d = params_.input_dim;
    std::vector<double> act(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      const float* row = signs_.data() + static_cast<std::size_t>(i) * d;
      double sum = 0.0;
      for (std::uint32_t j = 0; j < d; ++j) sum += row[j] * input[j];
      act[i] = sum;
    }

    // k winners take all; ties resolved toward the lower index.
    std::vector<std::uint32_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0u);
    auto better = [&act](std::uint32_t a, std::uint32_t b) {
      if (act[a] != act[b]) return act[a] > act[b];
      return a < b;
    };
    std::partial_sort(idx.begin(), idx.begin() + params_.k, idx.end(), better);

    SparseCode code;
    code.n_total = n;
    code.k = params_.k;
    code.active.assign(idx.begin(), idx.begin() + params_.k);
    std::sort(code.active.begin(), code.active.end());
    return code;
  }

 private:
  SeparatorParams params_;
  std::vector<float> signs_;
};

/// One-shot form; builds the projection, encodes, discards. Use
/// SparseSeparator directly when encoding many inputs under one seed.
inline SparseCode sparse_separate(const SeparatorParams& params,
                                  std::span<const double> input) {
  return SparseSeparator(params).encode(input);
}

}  // namespace engram_ledger
