#pragma once

// In-silico protocols for the three memory-chain hypotheses plus the
// engram temporal-linking statistics. Each runner is deterministic per
// seed and returns plain rows the CLI serializes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "engram_ledger/mnemochain.hpp"
#include "engram_ledger/rng.hpp"

namespace engram_ledger {

struct MemoryConfig {
  std::uint32_t episodes = 6;             // A..F
  std::uint32_t elements_per_episode = 3;
  std::uint32_t element_dim = 64;
  EngramParams engram;
  std::uint32_t sparse_population = 2048;  // N for the episode codes
  std::uint32_t sparse_active = 40;        // k
  double retention_p = 0.75;
  std::uint32_t alternatives = 4;
  std::uint32_t probes = 1000;   // h2
  std::uint32_t runs = 100;      // h1 seeds / h3 trials
  bool propagate_integrity = false;

  SeparatorParams separator(std::uint64_t seed) const {
    SeparatorParams p;
    p.input_dim = elements_per_episode * element_dim;
    p.n_total = sparse_population;
    p.k = sparse_active;
    p.seed = seed;
    return p;
  }

  void validate() const {
    if (episodes < 2) throw RangeError("episodes");
    if (elements_per_episode < 2) throw RangeError("elements_per_episode");
    if (element_dim == 0) throw RangeError("element_dim");
    if (retention_p < 0.0 || retention_p > 1.0) throw RangeError("retention_p");
    if (alternatives < 2) throw RangeError("alternatives");
    if (probes == 0) throw RangeError("probes");
    if (runs == 0) throw RangeError("runs");
    engram.validate();
  }
};

inline Elements random_elements(const MemoryConfig& cfg, Rng& rng) {
  Elements out(cfg.elements_per_episode);
  for (auto& el : out) {
    el.resize(cfg.element_dim);
    for (double& v : el) v = rng.uniform(-1.0, 1.0);
  }
  return out;
}

// ---- statistics helpers (test oracles use these too) ----

/// Upper-tail binomial p-value P(X >= k) for X ~ Binomial(n, p).
inline double binomial_upper_tail(std::uint64_t n, std::uint64_t k, double p) {
  if (k == 0) return 1.0;
  if (k > n) return 0.0;
  double total = 0.0;
  for (std::uint64_t i = k; i <= n; ++i) {
    const double logc = std::lgamma(static_cast<double>(n) + 1.0) -
                        std::lgamma(static_cast<double>(i) + 1.0) -
                        std::lgamma(static_cast<double>(n - i) + 1.0);
    total += std::exp(logc + static_cast<double>(i) * std::log(p) +
                      static_cast<double>(n - i) * std::log1p(-p));
  }
  return std::min(1.0, total);
}

/// Ordinary least-squares slope of y over x.
inline double ols_slope(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    num += (x[i] - mx) * (y[i] - my);
    den += (x[i] - mx) * (x[i] - mx);
  }
  return num / den;
}

struct SlopeCi {
  double slope = 0.0;
  double lo = 0.0;  // bootstrap 2.5%
  double hi = 0.0;  // bootstrap 97.5%
};

/// Pairs-bootstrap confidence interval for the OLS slope.
inline SlopeCi bootstrap_slope_ci(std::span<const double> x, std::span<const double> y,
                                  std::uint32_t resamples, std::uint64_t seed) {
  SlopeCi out;
  out.slope = ols_slope(x, y);
  Rng rng(splitmix64(seed ^ 0xb007ULL));
  std::vector<double> slopes(resamples);
  std::vector<double> bx(x.size()), by(y.size());
  for (std::uint32_t r = 0; r < resamples; ++r) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const std::size_t j = rng.below(x.size());
      bx[i] = x[j];
      by[i] = y[j];
    }
    slopes[r] = ols_slope(bx, by);
  }
  std::sort(slopes.begin(), slopes.end());
  out.lo = slopes[static_cast<std::size_t>(0.025 * resamples)];
  out.hi = slopes[std::min<std::size_t>(resamples - 1,
                                        static_cast<std::size_t>(0.975 * resamples))];
  return out;
}

// ---- engram temporal linking ----

struct TemporalLinkingResult {
  std::vector<double> lags;      // per observed pair
  std::vector<double> overlaps;
  std::vector<double> mean_overlap_by_lag;  // index 0 = lag 1
  SlopeCi slope;
  bool pass = false;  // slope negative with CI excluding 0
};

/// Recruits engram sequences at half-tau spacing and regresses pairwise
/// overlap on lag; the chain-in-time claim is a negative fitted slope.
inline TemporalLinkingResult run_temporal_linking(const EngramParams& params,
                                                  std::uint64_t seed,
                                                  std::uint32_t min_pairs = 2000,
                                                  std::uint32_t max_lag = 10) {
  TemporalLinkingResult out;
  const double step = params.tau_mem / 2.0;
  std::vector<double> sum_by_lag(max_lag + 1, 0.0);
  std::vector<std::uint64_t> n_by_lag(max_lag + 1, 0);
  std::uint64_t sequence = 0;
  while (out.lags.size() < min_pairs) {
    EngramPool pool(params, splitmix64(seed ^ (0x5e40ULL + sequence)));
    std::vector<Engram> engrams;
    for (std::uint32_t i = 0; i <= max_lag; ++i)
      engrams.push_back(pool.recruit(static_cast<std::uint64_t>(i * step)));
    for (std::uint32_t i = 0; i <= max_lag; ++i) {
      for (std::uint32_t j = i + 1; j <= max_lag; ++j) {
        const std::uint32_t lag = j - i;
        const double ov = engram_overlap(engrams[i], engrams[j]);
        out.lags.push_back(lag);
        out.overlaps.push_back(ov);
        sum_by_lag[lag] += ov;
        ++n_by_lag[lag];
      }
    }
    ++sequence;
  }
  for (std::uint32_t lag = 1; lag <= max_lag; ++lag)
    out.mean_overlap_by_lag.push_back(sum_by_lag[lag] /
                                      static_cast<double>(n_by_lag[lag]));
  out.slope = bootstrap_slope_ci(out.lags, out.overlaps, 1000, seed);
  out.pass = out.slope.slope < 0.0 && out.slope.hi < 0.0;
  return out;
}

// ---- hypothesis 1: order disruption ----

struct H1Row {
  std::uint64_t seed = 0;
  std::string mode;
  std::string result;
};

struct H1Result {
  std::vector<H1Row> rows;
  std::uint32_t linked_unknown = 0;
  std::uint32_t array_before = 0;
  std::uint32_t runs = 0;
  bool pass = false;
};

/// Encode A..F, disrupt A and D, query order(B, E) in both modes.
inline H1Result run_h1(const MemoryConfig& cfg, std::uint64_t base_seed) {
  cfg.validate();
  H1Result out;
  out.runs = cfg.runs;
  for (std::uint32_t run = 0; run < cfg.runs; ++run) {
    const std::uint64_t seed = splitmix64(base_seed + run);
    Rng rng(seed);
    EpisodicChain chain(cfg.separator(seed), cfg.propagate_integrity);
    EngramPool pool(cfg.engram, seed);
    for (std::uint32_t i = 0; i < cfg.episodes; ++i)
      chain.encode(pool, random_elements(cfg, rng), i + 1);
    chain.disrupt({0, 3});  // events A and D
    const Order linked = chain.order(1, 4, OrderMode::LinkedList);
    const Order arr = chain.order(1, 4, OrderMode::Array);
    auto name = [](Order o) {
      return o == Order::Before ? "Before" : o == Order::After ? "After" : "Unknown";
    };
    out.rows.push_back({seed, "linked_list", name(linked)});
    out.rows.push_back({seed, "array", name(arr)});
    if (linked == Order::Unknown) ++out.linked_unknown;
    if (arr == Order::Before) ++out.array_before;
  }
  out.pass = out.linked_unknown == cfg.runs && out.array_before == cfg.runs;
  return out;
}

// ---- hypothesis 2: false-memory fork and original persistence ----

struct H2Result {
  std::uint64_t probes = 0;
  std::uint64_t correct = 0;
  double accuracy = 0.0;
  double expected_accuracy = 0.0;
  double p_value = 1.0;          // binomial upper tail vs chance
  bool recall_prefers_false = false;
  bool original_intact = false;
  bool pass = false;
};

/// Encode A,B,C; induce the false B'; probe the original B above chance.
inline H2Result run_h2(const MemoryConfig& cfg, std::uint64_t base_seed) {
  cfg.validate();
  H2Result out;
  const std::uint64_t seed = splitmix64(base_seed ^ 0x42ULL);
  Rng rng(seed);
  EpisodicChain chain(cfg.separator(seed), cfg.propagate_integrity);
  EngramPool pool(cfg.engram, seed);
  const Elements a = random_elements(cfg, rng);
  const Elements b = random_elements(cfg, rng);
  const Elements c = random_elements(cfg, rng);
  chain.encode(pool, a, 1);
  const std::uint64_t b_id = chain.encode(pool, b, 2);
  chain.encode(pool, c, 3);
  const Elements b_false = random_elements(cfg, rng);
  const auto fork = chain.induce_false_memory(pool, b_id, b_false, 4);

  // cued recall now lands on the false branch
  const auto successor = chain.successor_on_preferred(0);
  out.recall_prefers_false = successor && *successor == fork.b_prime;
  const auto recalled = chain.recall_by_cue(b_false[0], IntegrityMode::Protected);
  out.recall_prefers_false = out.recall_prefers_false &&
                             recalled.status == RecallResult::Status::Ok &&
                             recalled.episode_id == fork.b_prime;
  // the original stays byte-intact and retrievable on its branch
  out.original_intact = chain.episode_intact(b_id) &&
                        chain.episode(b_id).elements == b;

  out.probes = cfg.probes;
  for (std::uint64_t i = 0; i < cfg.probes; ++i)
    if (chain.probe_original(b_id, rng, cfg.retention_p, cfg.alternatives))
      ++out.correct;
  out.accuracy = static_cast<double>(out.correct) / static_cast<double>(out.probes);
  out.expected_accuracy =
      cfg.retention_p + (1.0 - cfg.retention_p) / cfg.alternatives;
  out.p_value = binomial_upper_tail(out.probes, out.correct, 1.0 / cfg.alternatives);
  out.pass = out.p_value < 0.01 &&
             std::abs(out.accuracy - out.expected_accuracy) <= 0.03 &&
             out.recall_prefers_false && out.original_intact;
  return out;
}

// ---- hypothesis 3: element attacks vs protected recall ----

struct H3Row {
  std::uint64_t trial = 0;
  std::uint64_t episode = 0;
  std::uint32_t element = 0;
  std::string protected_result;
  std::string unprotected_result;
  bool siblings_intact = false;
};

struct H3Result {
  std::vector<H3Row> rows;
  std::uint32_t trials = 0;
  std::uint32_t protected_violations = 0;
  std::uint32_t unprotected_sibling_intact = 0;
  bool pass = false;
};

/// Random single-bit attacks on stored elements: protected recall must
/// refuse the whole episode, unprotected recall returns the stored content
/// with untouched siblings intact.
inline H3Result run_h3(const MemoryConfig& cfg, std::uint64_t base_seed) {
  cfg.validate();
  H3Result out;
  out.trials = cfg.runs;
  for (std::uint32_t trial = 0; trial < cfg.runs; ++trial) {
    const std::uint64_t seed = splitmix64(base_seed ^ (0x1000ULL + trial));
    Rng rng(seed);
    EpisodicChain chain(cfg.separator(seed), cfg.propagate_integrity);
    EngramPool pool(cfg.engram, seed);
    std::vector<Elements> originals;
    for (std::uint32_t i = 0; i < cfg.episodes; ++i) {
      originals.push_back(random_elements(cfg, rng));
      chain.encode(pool, originals.back(), i + 1);
    }
    const std::uint64_t victim = rng.below(cfg.episodes);
    const std::uint32_t element =
        static_cast<std::uint32_t>(rng.below(cfg.elements_per_episode));
    const std::size_t byte = rng.below(cfg.element_dim * sizeof(double));
    const std::uint8_t bit = static_cast<std::uint8_t>(rng.below(8));
    chain.attack_element(victim, element, byte, bit);

    // cue with an element other than the attacked one
    const std::uint32_t cue_element = (element + 1) % cfg.elements_per_episode;
    const auto& cue = originals[victim][cue_element];
    const auto prot = chain.recall_by_cue(cue, IntegrityMode::Protected);
    const auto unprot = chain.recall_by_cue(cue, IntegrityMode::Unprotected);

    bool siblings = unprot.status == RecallResult::Status::Ok;
    if (siblings)
      for (std::uint32_t e = 0; e < cfg.elements_per_episode; ++e)
        if (e != element && !(unprot.elements[e] == originals[victim][e]))
          siblings = false;

    if (prot.status == RecallResult::Status::IntegrityViolation)
      ++out.protected_violations;
    if (siblings) ++out.unprotected_sibling_intact;
    out.rows.push_back({trial, victim, element, to_string(prot.status),
                        to_string(unprot.status), siblings});
  }
  out.pass = out.protected_violations == out.trials &&
             out.unprotected_sibling_intact == out.trials;
  return out;
}

}  // namespace engram_ledger
