#pragma once

// Attack injection, behavior features, the fire-drill-trained linear
// discriminator, and the trust-but-verify fast-commit path.
//
// The discriminator is a margin perceptron over three behavior features,
// trained against a drill generator that keeps concentrating attack
// intensities where detection is currently weakest.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "engram_ledger/errors.hpp"
#include "engram_ledger/ledger.hpp"
#include "engram_ledger/netsim.hpp"
#include "engram_ledger/rng.hpp"

namespace engram_ledger {

/// Applies an attack scenario to a simulation before (or between) runs:
/// double-spend arrivals, stored-chain tampering, or a node behavior flip.
inline void inject_scenario(Simulation& sim, const AttackScenario& scenario) {
  sim.inject(scenario);
}

struct NodeBehaviorFeatures {
  double invalid_approval_rate = 0.0;  // f1: approvals on known-invalid proposals
  double conflict_rate = 0.0;          // f2: conflicting votes / votes cast
  double latency_z = 0.0;              // f3: response latency z-score
  std::uint64_t window_rounds = 0;
};

/// Features over votes with round in [round_lo, round_hi]. f1 is the
/// fraction of known-invalid proposals the node approved, f2 the fraction
/// of its votes that equivocated, f3 the z-score of its mean latency
/// against the population in the same window. Zero denominators yield 0.
inline NodeBehaviorFeatures extract_features(std::span<const VoteRecord> votes,
                                             NodeId node, std::uint64_t round_lo,
                                             std::uint64_t round_hi) {
  NodeBehaviorFeatures f;
  f.window_rounds = round_hi >= round_lo ? round_hi - round_lo + 1 : 0;
  std::uint64_t own_votes = 0, own_conflicts = 0;
  std::uint64_t invalid_seen = 0, invalid_approved = 0;
  double own_latency_sum = 0.0;
  std::map<NodeId, std::pair<double, std::uint64_t>> latency_by_node;
  for (const auto& v : votes) {
    if (v.round < round_lo || v.round > round_hi) continue;
    auto& acc = latency_by_node[v.node];
    acc.first += v.latency;
    acc.second += 1;
    if (v.node != node) continue;
    ++own_votes;
    if (v.conflicting) ++own_conflicts;
    if (v.known_invalid) {
      ++invalid_seen;
      if (v.approved) ++invalid_approved;
    }
    own_latency_sum += v.latency;
  }
  if (invalid_seen > 0)
    f.invalid_approval_rate =
        static_cast<double>(invalid_approved) / static_cast<double>(invalid_seen);
  if (own_votes > 0)
    f.conflict_rate = static_cast<double>(own_conflicts) / static_cast<double>(own_votes);

  if (own_votes > 0 && latency_by_node.size() > 1) {
    std::vector<double> means;
    for (const auto& [id, acc] : latency_by_node)
      means.push_back(acc.first / static_cast<double>(acc.second));
    double pop_mean = 0.0;
    for (double m : means) pop_mean += m;
    pop_mean /= static_cast<double>(means.size());
    double var = 0.0;
    for (double m : means) var += (m - pop_mean) * (m - pop_mean);
    var /= static_cast<double>(means.size());
    const double own_mean = own_latency_sum / static_cast<double>(own_votes);
    if (var > 0.0) f.latency_z = (own_mean - pop_mean) / std::sqrt(var);
  }
  return f;
}

enum class NodeClass { Trusted, Flagged };

struct Discriminator {
  std::array<double, 3> weights{0.0, 0.0, 0.0};
  double bias = 0.0;
  double threshold = 0.0;
  double holdout_balanced_accuracy = 0.0;

  double score(const NodeBehaviorFeatures& f) const {
    return weights[0] * f.invalid_approval_rate + weights[1] * f.conflict_rate +
           weights[2] * f.latency_z + bias;
  }
};

/// Flagged iff score strictly exceeds the threshold.
inline NodeClass classify_node(const Discriminator& d, const NodeBehaviorFeatures& f) {
  return d.score(f) > d.threshold ? NodeClass::Flagged : NodeClass::Trusted;
}

struct DrillSample {
  NodeBehaviorFeatures features;
  bool malicious = false;
};

// A drill produces labeled behavior samples for one attack intensity.
using DrillFactory =
    std::function<std::vector<DrillSample>(double intensity, std::uint64_t seed)>;

struct DrillParams {
  double intensity_lo = 0.1;   // invalid-approval rate range of the attacker
  double intensity_hi = 0.6;
  std::uint32_t honest_nodes = 8;
  std::uint32_t malicious_nodes = 2;
  std::uint32_t voting_rounds = 120;
  double invalid_fraction = 0.5;  // share of known-invalid proposals per drill
  double honest_noise = 0.01;     // honest approval noise, half-normal sigma
  double learning_rate = 0.1;
  double margin = 0.5;
  std::uint32_t grid_size = 50;
};

/// Round-based voting drill: honest nodes approve valid proposals and slip
/// on invalid ones with half-normal noise; malicious nodes approve invalid
/// proposals at the drill intensity and equivocate at a fraction of it.
inline std::vector<DrillSample> run_drill(const DrillParams& p, double intensity,
                                          std::uint64_t seed) {
  Rng rng(splitmix64(seed));
  const std::uint32_t n = p.honest_nodes + p.malicious_nodes;
  std::vector<double> slip(n), equivocate(n);
  std::vector<bool> malicious(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    malicious[i] = i >= p.honest_nodes;
    slip[i] = malicious[i] ? intensity : std::abs(rng.gaussian(0.0, p.honest_noise));
    equivocate[i] = malicious[i] ? 0.3 * intensity : 0.0;
  }
  std::vector<VoteRecord> votes;
  votes.reserve(static_cast<std::size_t>(p.voting_rounds) * n);
  for (std::uint32_t round = 0; round < p.voting_rounds; ++round) {
    const bool invalid = rng.uniform() < p.invalid_fraction;
    for (std::uint32_t i = 0; i < n; ++i) {
      VoteRecord v;
      v.round = round;
      v.node = i;
      v.known_invalid = invalid;
      v.approved = invalid ? rng.uniform() < slip[i] : true;
      v.conflicting = rng.uniform() < equivocate[i];
      v.latency = 1.0 + 0.1 * rng.gaussian();  // latency carries no malice signal
      votes.push_back(v);
    }
  }
  std::vector<DrillSample> samples;
  samples.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i)
    samples.push_back({extract_features(votes, i, 0, p.voting_rounds - 1), malicious[i]});
  return samples;
}

inline DrillFactory default_drill_factory(const DrillParams& p) {
  return [p](double intensity, std::uint64_t seed) {
    return run_drill(p, intensity, seed);
  };
}

/// Alternating adversarial loop. Each round the generator probes the
/// intensity grid, finds the lowest-margin decile under the current
/// weights, drills there, and the discriminator updates by the margin
/// perceptron rule. The threshold is set afterwards at the midpoint of
/// the class score means.
inline Discriminator fire_drill_train(const DrillFactory& factory, std::uint32_t rounds,
                                      std::uint64_t seed,
                                      const DrillParams& p = DrillParams{}) {
  if (rounds < 1) throw DegenerateTraining("need at least one drill round");
  Rng rng(splitmix64(seed ^ 0xd511ULL));
  Discriminator disc;

  const std::uint32_t cells = std::max<std::uint32_t>(p.grid_size, 10);
  std::vector<double> cell_margin(cells, -1e18);  // unvisited = weakest
  auto cell_intensity = [&](std::uint32_t c) {
    return p.intensity_lo +
           (p.intensity_hi - p.intensity_lo) * (static_cast<double>(c) + 0.5) /
               static_cast<double>(cells);
  };

  std::vector<DrillSample> history;
  bool saw_malicious = false, saw_honest = false;

  for (std::uint32_t round = 0; round < rounds; ++round) {
    // lowest-margin decile of the grid
    std::vector<std::uint32_t> order(cells);
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
      return cell_margin[a] < cell_margin[b];
    });
    const std::uint32_t decile = std::max<std::uint32_t>(1, cells / 10);
    const std::uint32_t cell = order[rng.below(decile)];

    const auto samples = factory(cell_intensity(cell), rng.next_u64());
    double worst_margin = 1e18;
    for (const auto& s : samples) {
      (s.malicious ? saw_malicious : saw_honest) = true;
      const double y = s.malicious ? 1.0 : -1.0;
      const std::array<double, 3> x{s.features.invalid_approval_rate,
                                    s.features.conflict_rate, s.features.latency_z};
      const double m = y * (disc.weights[0] * x[0] + disc.weights[1] * x[1] +
                            disc.weights[2] * x[2] + disc.bias);
      if (s.malicious) worst_margin = std::min(worst_margin, m);
      if (m <= p.margin) {
        for (int i = 0; i < 3; ++i) disc.weights[i] += p.learning_rate * y * x[i];
        disc.bias += p.learning_rate * y;
      }
      history.push_back(s);
    }
    if (worst_margin < 1e18) cell_margin[cell] = worst_margin;
  }
  if (!saw_malicious || !saw_honest)
    throw DegenerateTraining("drills produced a single class");

  double sum_pos = 0.0, sum_neg = 0.0;
  std::uint64_t n_pos = 0, n_neg = 0;
  for (const auto& s : history) {
    const double sc = disc.score(s.features);
    if (s.malicious) {
      sum_pos += sc;
      ++n_pos;
    } else {
      sum_neg += sc;
      ++n_neg;
    }
  }
  disc.threshold = 0.5 * (sum_pos / static_cast<double>(n_pos) +
                          sum_neg / static_cast<double>(n_neg));
  return disc;
}

/// Balanced accuracy of a discriminator over labeled samples.
inline double balanced_accuracy(const Discriminator& disc,
                                std::span<const DrillSample> samples) {
  std::uint64_t tp = 0, fn = 0, tn = 0, fp = 0;
  for (const auto& s : samples) {
    const bool flagged = classify_node(disc, s.features) == NodeClass::Flagged;
    if (s.malicious)
      (flagged ? tp : fn) += 1;
    else
      (flagged ? fp : tn) += 1;
  }
  const double tpr = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn);
  const double tnr = tn + fp == 0 ? 0.0 : static_cast<double>(tn) / (tn + fp);
  return 0.5 * (tpr + tnr);
}

// ---- trust-but-verify fast commit ----

enum class CommitPath { Provisional, FullConsensus };

enum class CommitOutcome { Pending, Confirmed, Reverted, Rejected };

struct CommitRecord {
  Transaction txn;
  CommitPath path = CommitPath::FullConsensus;
  CommitOutcome outcome = CommitOutcome::Pending;
  std::uint64_t submit_round = 0;
  std::uint64_t deadline = 0;
  std::uint64_t resolved_round = 0;
};

/// Small transactions commit provisionally and are fully verified within
/// the deferral window; large ones wait for full consensus. Verification
/// applies strictly in arrival order against the confirmed state, so the
/// final state matches the full-consensus pipeline once every deferral
/// has resolved. Reverts restore balances by recomputation, never by
/// rewriting history.
class FastCommitLedger {
 public:
  FastCommitLedger(AccountState initial, std::uint64_t trust_threshold,
                   std::uint64_t deferral_rounds)
      : confirmed_(std::move(initial)),
        trust_threshold_(trust_threshold),
        deferral_(deferral_rounds) {}

  CommitPath submit(const Transaction& txn) {
    CommitRecord rec;
    rec.txn = txn;
    rec.submit_round = round_;
    rec.deadline = round_ + deferral_;
    rec.path = (trust_threshold_ > 0 && txn.amount <= trust_threshold_)
                   ? CommitPath::Provisional
                   : CommitPath::FullConsensus;
    pending_.push_back(rec);
    log_.push_back(rec);
    return rec.path;
  }

  void advance_round() {
    ++round_;
    while (!pending_.empty() && pending_.front().deadline <= round_) {
      CommitRecord rec = pending_.front();
      pending_.pop_front();
      const bool ok = confirmed_.apply(rec.txn) == TxnCheck::Ok;
      rec.resolved_round = round_;
      if (ok)
        rec.outcome = CommitOutcome::Confirmed;
      else
        rec.outcome = rec.path == CommitPath::Provisional ? CommitOutcome::Reverted
                                                          : CommitOutcome::Rejected;
      resolve_log(rec);
    }
  }

  void drain() {
    while (!pending_.empty()) advance_round();
  }

  std::uint64_t round() const { return round_; }
  bool idle() const { return pending_.empty(); }
  const AccountState& confirmed_state() const { return confirmed_; }
  const std::vector<CommitRecord>& log() const { return log_; }

  /// Optimistic view: confirmed state plus the provisional effect of every
  /// still-pending fast-path transaction, in arrival order.
  AccountState provisional_state() const {
    AccountState view = confirmed_;
    for (const auto& rec : pending_)
      if (rec.path == CommitPath::Provisional) view.apply(rec.txn);
    return view;
  }

  std::vector<Transaction> reverted() const {
    std::vector<Transaction> out;
    for (const auto& rec : log_)
      if (rec.outcome == CommitOutcome::Reverted) out.push_back(rec.txn);
    return out;
  }

 private:
  void resolve_log(const CommitRecord& rec) {
    for (auto it = log_.rbegin(); it != log_.rend(); ++it) {
      if (it->txn == rec.txn && it->submit_round == rec.submit_round &&
          it->outcome == CommitOutcome::Pending) {
        *it = rec;
        return;
      }
    }
  }

  AccountState confirmed_;
  std::uint64_t trust_threshold_;
  std::uint64_t deferral_;
  std::uint64_t round_ = 0;
  std::deque<CommitRecord> pending_;
  std::vector<CommitRecord> log_;
};

/// Full-consensus counterfactual: every transaction verified in arrival
/// order, no fast path. The reconciliation oracle for fast_commit runs.
inline AccountState full_consensus_state(AccountState initial,
                                         std::span<const Transaction> txns) {
  for (const auto& t : txns) initial.apply(t);
  return initial;
}

}  // namespace engram_ledger
