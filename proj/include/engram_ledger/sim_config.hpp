#pragma once

// Simulation world parameters. One struct drives every subcommand; strict
// JSON parsing lives in config.hpp, this header is just the plain data and
// its range checks.

#include <cstdint>
#include <string>
#include <vector>

#include "engram_ledger/errors.hpp"

namespace engram_ledger {

enum class SelectionPolicyKind {
  UniformRandom,
  TemporalWindow,
  FreshnessPriority,
  LeastRecentlyUsed,
};

inline std::string to_string(SelectionPolicyKind k) {
  switch (k) {
    case SelectionPolicyKind::UniformRandom: return "uniform_random";
    case SelectionPolicyKind::TemporalWindow: return "temporal_window";
    case SelectionPolicyKind::FreshnessPriority: return "freshness_priority";
    case SelectionPolicyKind::LeastRecentlyUsed: return "least_recently_used";
  }
  return "?";
}

struct AttackScenario {
  enum class Kind { DoubleSpend, Tamper, EquivocatingValidator, InvalidApprover };
  Kind kind = Kind::DoubleSpend;

  // DoubleSpend: two conflicting transfers from `sender`, `delta_t` apart.
  std::uint64_t sender = 1;
  std::uint64_t amount_a = 0;
  std::uint64_t amount_b = 0;
  std::uint64_t delta_t = 1;
  std::uint64_t at_time = 1;

  // Tamper: flip `bit` of the stored chain bytes at `height` on `node`.
  std::uint64_t node = 0;
  std::uint64_t height = 0;
  std::uint32_t bit = 0;

  // EquivocatingValidator / InvalidApprover
  double rate = 0.0;

  void validate() const {
    if (kind == Kind::EquivocatingValidator || kind == Kind::InvalidApprover) {
      if (rate < 0.0 || rate > 1.0) throw BadScenario("rate must lie in [0,1]");
    }
    if (kind == Kind::DoubleSpend && delta_t == 0)
      throw BadScenario("double-spend delta_t must be positive");
  }
};

struct StopRule {
  enum class Kind { Blocks, Time };
  Kind kind = Kind::Blocks;
  std::uint64_t value = 30;
};

struct JoinEvent {
  std::uint64_t time = 0;
  std::uint32_t count = 1;
};

struct SimConfig {
  std::uint32_t n_nodes = 20;
  std::uint32_t difficulty = 8;        // leading zero bits
  std::uint64_t latency_min = 1;       // logical time units
  std::uint64_t latency_max = 5;
  std::uint64_t seed = 1;
  std::uint32_t segment_size = 1000;   // S_txn
  std::uint32_t replication = 3;       // r
  std::uint64_t window = 20;           // W, logical time
  std::uint64_t trust_threshold = 50;  // V, amount units
  std::uint32_t quorum = 0;            // q; 0 = default ceil(2r/3)
  StopRule run_length;
  std::uint32_t n_accounts = 10;
  std::uint64_t initial_balance = 1000;
  std::uint64_t txn_interval = 2;      // one arrival per interval; 0 disables
  bool sharded_verification = false;
  SelectionPolicyKind policy = SelectionPolicyKind::TemporalWindow;
  double freshness_tau = 10.0;         // tau_node
  std::vector<JoinEvent> node_join_schedule;
  std::vector<AttackScenario> adversaries;

  std::uint32_t effective_quorum() const {
    return quorum != 0 ? quorum : (2 * replication + 2) / 3;
  }

  void validate() const {
    if (n_nodes < 1) throw RangeError("n_nodes");
    if (replication > n_nodes) throw RangeError("replication");
    if (effective_quorum() > replication) throw RangeError("quorum");
    if (window == 0) throw RangeError("window");
    if (latency_min > latency_max) throw RangeError("latency");
    if (n_accounts < 1) throw RangeError("n_accounts");
    if (freshness_tau <= 0.0) throw RangeError("freshness_tau");
    for (const auto& s : adversaries) s.validate();
  }
};

}  // namespace engram_ledger
