#pragma once

// Deterministic discrete-event simulation of the mine -> broadcast ->
// verify -> append loop. One run is strictly single-threaded; the trace is
// a pure function of (config, seed). Time is logical. Delivery is reliable
// and non-partitioned; forks arise only from delivery latency.

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <queue>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "engram_ledger/errors.hpp"
#include "engram_ledger/ledger.hpp"
#include "engram_ledger/rng.hpp"
#include "engram_ledger/sharding.hpp"
#include "engram_ledger/sim_config.hpp"

namespace engram_ledger {

struct TraceRow {
  std::uint64_t time = 0;
  std::string kind;
  std::int64_t node = -1;  // -1 = network-level event
  std::string detail;
};

// One verification vote, the raw material for behavior features.
struct VoteRecord {
  std::uint64_t round = 0;  // block height under verification
  NodeId node = 0;
  bool approved = false;
  bool known_invalid = false;
  bool conflicting = false;
  double latency = 0.0;
};

struct SimSummary {
  std::uint64_t blocks_produced = 0;  // mined and locally accepted
  std::uint64_t forks_observed = 0;   // reorg adoptions
  std::uint64_t flagged_double_spends = 0;
  bool converged = false;
  std::uint64_t common_prefix = 0;    // mined blocks shared by every node
  std::uint64_t end_time = 0;
  std::map<NodeId, std::uint64_t> node_heights;
};

struct SimTrace {
  std::vector<TraceRow> rows;
  std::vector<VoteRecord> votes;
  SimSummary summary;
  std::map<NodeId, Chain> final_chains;
  Chain consensus_chain;
};

struct BehaviorSpec {
  enum class Kind { Honest, Equivocating, InvalidApproving };
  Kind kind = Kind::Honest;
  double rate = 0.0;
};

class Simulation {
 public:
  explicit Simulation(SimConfig config) : config_(std::move(config)) {
    config_.validate();
    genesis_ = make_genesis_chain(config_);
    workload_rng_ = Rng(splitmix64(config_.seed ^ kWorkloadTag));
    for (std::uint32_t i = 0; i < config_.n_nodes; ++i) add_node(0);
    for (const auto& j : config_.node_join_schedule)
      schedule(j.time, EvJoin{j.count});
    for (const auto& s : config_.adversaries) inject(s);
    if (config_.run_length.kind == StopRule::Kind::Blocks &&
        config_.run_length.value == 0)
      mining_active_ = false;
    if (mining_active_)
      for (auto& [id, node] : nodes_) schedule(1, EvMine{id});
    if (config_.txn_interval > 0 && mining_active_)
      schedule(1, EvTxn{});
  }

  const SimConfig& config() const { return config_; }

  void set_behavior(NodeId node, BehaviorSpec spec) {
    auto it = nodes_.find(node);
    if (it == nodes_.end()) throw BadScenario("behavior set on unknown node");
    it->second.behavior = spec;
  }

  // Two conflicting transfers from `sender`, delta_t apart. Nonces are
  // assigned on arrival from the shared workload counters, so the
  // conflict is the joint overdraft, not nonce reuse.
  void schedule_double_spend(std::uint64_t at_time, std::uint64_t sender,
                             std::uint64_t amount_a, std::uint64_t amount_b,
                             std::uint64_t delta_t) {
    if (sender == 0 || sender > config_.n_accounts)
      throw BadScenario("double-spend sender is not a funded account");
    const std::uint64_t recipient = sender == 1 ? 2 % (config_.n_accounts + 1) : 1;
    schedule(at_time, EvTxn{PlannedTxn{sender, recipient, amount_a}});
    schedule(at_time + delta_t, EvTxn{PlannedTxn{sender, recipient, amount_b}});
  }

  void schedule_tamper(std::uint64_t at_time, NodeId node, std::uint64_t height,
                       std::uint32_t bit) {
    if (nodes_.find(node) == nodes_.end())
      throw BadScenario("tamper target node unknown");
    schedule(at_time, EvTamper{node, height, bit});
  }

  void inject(const AttackScenario& s) {
    s.validate();
    switch (s.kind) {
      case AttackScenario::Kind::DoubleSpend:
        schedule_double_spend(s.at_time, s.sender, s.amount_a, s.amount_b, s.delta_t);
        break;
      case AttackScenario::Kind::Tamper:
        schedule_tamper(s.at_time == 0 ? 1 : s.at_time, s.node, s.height, s.bit);
        break;
      case AttackScenario::Kind::EquivocatingValidator:
        set_behavior(s.node, {BehaviorSpec::Kind::Equivocating, s.rate});
        break;
      case AttackScenario::Kind::InvalidApprover:
        set_behavior(s.node, {BehaviorSpec::Kind::InvalidApproving, s.rate});
        break;
    }
  }

  SimTrace run() {
    while (!queue_.empty()) {
      Scheduled ev = queue_.top();
      queue_.pop();
      if (config_.run_length.kind == StopRule::Kind::Time &&
          ev.time > config_.run_length.value)
        mining_active_ = false;
      now_ = std::max(now_, ev.time);
      std::visit([&](const auto& e) { handle(ev.time, e); }, ev.payload);
    }
    finalize();
    return std::move(trace_);
  }

 private:
  static constexpr std::uint64_t kWorkloadTag = 0xffffffff00000001ULL;

  struct PlannedTxn {
    std::uint64_t sender;
    std::uint64_t recipient;
    std::uint64_t amount;
  };

  struct EvMine { NodeId node; };
  struct EvDeliver {
    NodeId to;
    NodeId from;
    std::shared_ptr<const Chain> chain;
  };
  struct EvTxn { std::optional<PlannedTxn> planned; };
  struct EvJoin { std::uint32_t count; };
  struct EvTamper {
    NodeId node;
    std::uint64_t height;
    std::uint32_t bit;
  };
  using Payload = std::variant<EvMine, EvDeliver, EvTxn, EvJoin, EvTamper>;

  struct Scheduled {
    std::uint64_t time = 0;
    std::uint64_t seq = 0;
    Payload payload;
    bool operator>(const Scheduled& o) const {
      return std::tie(time, seq) > std::tie(o.time, o.seq);
    }
  };

  struct Node {
    NodeId id = 0;
    std::uint64_t join_time = 0;
    Chain chain;
    AccountState state;
    std::vector<Transaction> mempool;
    // sender -> retained assigned txns (temporal-window sharded mode)
    std::map<std::uint64_t, std::vector<Transaction>> retained;
    BehaviorSpec behavior;
    Rng rng{0};
  };

  void schedule(std::uint64_t time, Payload payload) {
    if (time < now_) throw ConfigInvalid("event scheduled into the past");
    queue_.push(Scheduled{time, seq_++, std::move(payload)});
  }

  void add_node(std::uint64_t join_time) {
    Node n;
    n.id = next_node_id_++;
    n.join_time = join_time;
    n.chain = genesis_;
    n.state = genesis_state(genesis_.blocks[0]);
    n.rng = node_stream(config_.seed, n.id);
    nodes_.emplace(n.id, std::move(n));
  }

  std::vector<NodeId> live_ids() const {
    std::vector<NodeId> ids;
    ids.reserve(nodes_.size());
    for (const auto& [id, n] : nodes_) ids.push_back(id);
    return ids;
  }

  void trace(std::uint64_t t, std::string kind, std::int64_t node, std::string detail) {
    trace_.rows.push_back({t, std::move(kind), node, std::move(detail)});
  }

  // ---- event handlers ----

  void handle(std::uint64_t t, const EvMine& e) {
    if (!mining_active_) return;
    auto it = nodes_.find(e.node);
    if (it == nodes_.end()) return;
    Node& node = it->second;

    Block candidate;
    candidate.index = node.chain.tip().index + 1;
    candidate.prev_digest = node.chain.tip().digest();
    candidate.timestamp = t;
    candidate.transactions = build_candidate_txns(node);
    candidate.payload_digest = payload_digest_of(candidate.transactions);
    candidate.puzzle_nonce = node.rng.next_u64();

    const bool solved = candidate.digest().leading_zero_bits() >=
                        static_cast<int>(config_.difficulty);
    if (solved) {
      bool accepted = true;
      if (config_.sharded_verification)
        accepted = sharded_verification_round(t, candidate);
      if (accepted) {
        append_block(node.chain, candidate, node.state);
        prune_mempool(node);
        ++trace_.summary.blocks_produced;
        trace(t, "mine", static_cast<std::int64_t>(node.id),
              "height=" + std::to_string(candidate.index) +
                  " txns=" + std::to_string(candidate.transactions.size()) +
                  " digest=" + candidate.digest().hex().substr(0, 16));
        if (config_.run_length.kind == StopRule::Kind::Blocks &&
            node.chain.height() >= config_.run_length.value)
          mining_active_ = false;
        auto snapshot = std::make_shared<const Chain>(node.chain);
        for (const auto& [id, peer] : nodes_) {
          if (id == node.id) continue;
          const std::uint64_t latency =
              node.rng.range(config_.latency_min, config_.latency_max);
          schedule(t + latency, EvDeliver{id, node.id, snapshot});
        }
      } else {
        trace(t, "quorum-reject", static_cast<std::int64_t>(node.id),
              "height=" + std::to_string(candidate.index));
      }
    }
    if (mining_active_) schedule(t + 1, EvMine{node.id});
  }

  void handle(std::uint64_t t, const EvDeliver& e) {
    auto it = nodes_.find(e.to);
    if (it == nodes_.end()) return;
    Node& node = it->second;
    const Chain& remote = *e.chain;
    if (!node.chain.blocks.empty() && !remote.blocks.empty() &&
        node.chain.tip().digest() == remote.tip().digest())
      return;  // duplicate of what we already hold
    switch (resolve_fork(node.chain, remote)) {
      case ForkChoice::AdoptRemote: {
        std::size_t div = 0;
        const std::size_t n = std::min(node.chain.blocks.size(), remote.blocks.size());
        while (div < n && node.chain.blocks[div] == remote.blocks[div]) ++div;
        const bool reorg = div < node.chain.blocks.size();
        if (reorg) {
          ++trace_.summary.forks_observed;
          trace(t, "reorg", static_cast<std::int64_t>(node.id),
                "divergence=" + std::to_string(div));
        }
        node.chain = remote;
        node.state = replay_state(node.chain);
        prune_mempool(node);
        trace(t, "adopt", static_cast<std::int64_t>(node.id),
              "from=" + std::to_string(e.from) +
                  " height=" + std::to_string(node.chain.height()));
        break;
      }
      case ForkChoice::KeepLocal:
        trace(t, "drop", static_cast<std::int64_t>(node.id),
              "from=" + std::to_string(e.from));
        break;
      case ForkChoice::RemoteInvalid:
        trace(t, "invalid", static_cast<std::int64_t>(node.id),
              "from=" + std::to_string(e.from) + " reason=" +
                  verify_chain(remote).to_string());
        break;
    }
  }

  void handle(std::uint64_t t, const EvTxn& e) {
    Transaction txn;
    if (e.planned) {
      txn.sender_id = e.planned->sender;
      txn.recipient_id = e.planned->recipient;
      txn.amount = e.planned->amount;
    } else {
      if (!mining_active_) return;
      txn.sender_id = 1 + workload_rng_.below(config_.n_accounts);
      txn.recipient_id = 1 + workload_rng_.below(config_.n_accounts);
      if (txn.recipient_id == txn.sender_id)
        txn.recipient_id = 1 + txn.sender_id % config_.n_accounts;
      txn.amount = 1 + workload_rng_.below(std::max<std::uint64_t>(
                           1, config_.initial_balance / 50));
      // chain the next background arrival
      schedule(t + config_.txn_interval, EvTxn{});
    }
    txn.nonce = next_nonce_[txn.sender_id]++;
    txn.timestamp = t;
    trace(t, "txn", -1,
          "sender=" + std::to_string(txn.sender_id) +
              " amount=" + std::to_string(txn.amount) +
              " nonce=" + std::to_string(txn.nonce));
    deliver_txn(t, txn);
  }

  void handle(std::uint64_t t, const EvJoin& e) {
    for (std::uint32_t i = 0; i < e.count; ++i) {
      add_node(t);
      const NodeId id = next_node_id_ - 1;
      trace(t, "join", static_cast<std::int64_t>(id), "");
      if (mining_active_) schedule(t + 1, EvMine{id});
    }
  }

  void handle(std::uint64_t t, const EvTamper& e) {
    auto it = nodes_.find(e.node);
    if (it == nodes_.end()) return;
    Node& node = it->second;
    if (e.height >= node.chain.blocks.size()) {
      trace(t, "tamper", static_cast<std::int64_t>(e.node), "height out of range");
      return;
    }
    Block& victim = node.chain.blocks[e.height];
    ByteWriter w;
    victim.encode(w);
    Bytes enc = w.take();
    // flip a bit outside the 4-byte transaction-count field so the block
    // still decodes and the corruption is semantic
    std::size_t bit = e.bit % (enc.size() * 8);
    std::size_t byte = bit / 8;
    if (byte >= 88 && byte < 92) byte = 92 % enc.size();
    enc[byte] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    ByteReader r(enc);
    victim = Block::decode(r);
    trace(t, "tamper", static_cast<std::int64_t>(e.node),
          "height=" + std::to_string(e.height) + " bit=" + std::to_string(bit));
  }

  // ---- mechanics ----

  void deliver_txn(std::uint64_t t, const Transaction& txn) {
    if (config_.sharded_verification &&
        config_.policy == SelectionPolicyKind::TemporalWindow) {
      // Route to the sender-window verifier set; a verifier holding a
      // conflicting retained txn flags the later one and rejects it.
      SelectionPolicy pol;
      pol.kind = SelectionPolicyKind::TemporalWindow;
      pol.window = config_.window;
      AssignmentContext ctx = assignment_context(Digest{});
      const NodeSet verifiers = temporal_window_nodes(txn, pol, ctx);
      const std::uint64_t w = txn.timestamp / config_.window;
      for (NodeId v : verifiers) {
        Node& node = nodes_.at(v);
        prune_retained(node, w);
        bool conflict = false;
        for (const auto& prior : node.retained[txn.sender_id]) {
          if (transactions_conflict(prior, txn, node.state.balance(txn.sender_id))) {
            conflict = true;
            break;
          }
        }
        if (conflict) {
          rejected_.insert(txn);
          ++trace_.summary.flagged_double_spends;
          trace(t, "flag", static_cast<std::int64_t>(v),
                "sender=" + std::to_string(txn.sender_id) +
                    " nonce=" + std::to_string(txn.nonce));
          return;  // later transaction rejected network-wide
        }
        node.retained[txn.sender_id].push_back(txn);
      }
    }
    for (auto& [id, node] : nodes_) node.mempool.push_back(txn);
  }

  void prune_retained(Node& node, std::uint64_t current_window) {
    for (auto& [sender, txns] : node.retained) {
      std::erase_if(txns, [&](const Transaction& t) {
        const std::uint64_t w = t.timestamp / config_.window;
        return w + 1 < current_window;  // keep current and previous window
      });
    }
  }

  std::vector<Transaction> build_candidate_txns(const Node& node) {
    std::vector<Transaction> out;
    AccountState scratch = node.state;
    for (const auto& txn : node.mempool) {
      if (rejected_.count(txn)) continue;
      if (scratch.apply(txn) == TxnCheck::Ok) out.push_back(txn);
    }
    return out;
  }

  void prune_mempool(Node& node) {
    AccountState scratch = node.state;
    std::erase_if(node.mempool, [&](const Transaction& t) {
      return scratch.check(t) == TxnCheck::NonceConflict || rejected_.count(t) > 0;
    });
  }

  AssignmentContext assignment_context(const Digest& block_digest) {
    AssignmentContext ctx;
    ctx.chain_seed = config_.seed;
    ctx.block_digest = block_digest;
    ctx.live_nodes = live_ids();
    for (const auto& [id, n] : nodes_) ctx.join_time[id] = n.join_time;
    ctx.last_verified = last_verified_;
    ctx.now = now_;
    ctx.replication = config_.replication;
    ctx.quorum = config_.effective_quorum();
    return ctx;
  }

  bool sharded_verification_round(std::uint64_t t, const Block& candidate) {
    SelectionPolicy pol;
    pol.kind = config_.policy;
    pol.window = config_.window;
    pol.tau_node = config_.freshness_tau;
    const auto segments = partition_block(candidate.transactions, config_.segment_size);
    if (segments.empty()) return true;  // nothing to verify
    const Assignment assignment =
        assign_segments(pol, segments, assignment_context(candidate.digest()));
    std::map<std::uint32_t, std::uint32_t> approvals;
    for (const auto& [seg_id, verifiers] : assignment.segment_nodes) {
      for (NodeId v : verifiers) {
        Node& voter = nodes_.at(v);
        VoteRecord vote;
        vote.round = candidate.index;
        vote.node = v;
        vote.known_invalid = false;  // honest miners only propose valid blocks
        vote.approved = true;
        vote.conflicting = voter.behavior.kind == BehaviorSpec::Kind::Equivocating &&
                           voter.rng.uniform() < voter.behavior.rate;
        vote.latency = 1.0 + voter.rng.uniform();
        trace_.votes.push_back(vote);
        trace(t, "vote", static_cast<std::int64_t>(v),
              "height=" + std::to_string(candidate.index) + " seg=" +
                  std::to_string(seg_id) + (vote.conflicting ? " conflicting" : ""));
        if (vote.approved) ++approvals[seg_id];
      }
    }
    bool accepted = true;
    for (const auto& [seg_id, verifiers] : assignment.segment_nodes)
      if (approvals[seg_id] < assignment.quorum) accepted = false;
    update_usage(assignment, candidate.index, last_verified_);
    return accepted;
  }

  void finalize() {
    SimSummary& s = trace_.summary;
    s.end_time = now_;
    // consensus chain: max height, ties toward the smaller tip digest
    const Chain* best = nullptr;
    for (const auto& [id, n] : nodes_) {
      s.node_heights[id] = n.chain.height();
      if (!best || n.chain.blocks.size() > best->blocks.size() ||
          (n.chain.blocks.size() == best->blocks.size() &&
           n.chain.tip().digest() < best->tip().digest()))
        best = &n.chain;
    }
    trace_.consensus_chain = *best;
    std::uint64_t prefix = trace_.consensus_chain.blocks.size();
    for (const auto& [id, n] : nodes_) {
      std::uint64_t p = 0;
      const auto limit = std::min<std::uint64_t>(prefix, n.chain.blocks.size());
      while (p < limit && n.chain.blocks[p] == trace_.consensus_chain.blocks[p]) ++p;
      prefix = std::min(prefix, p);
      trace_.final_chains.emplace(id, n.chain);
    }
    s.common_prefix = prefix == 0 ? 0 : prefix - 1;  // mined blocks, genesis excluded
    if (config_.run_length.kind == StopRule::Kind::Blocks)
      s.converged = config_.run_length.value == 0 ||
                    s.common_prefix + 1 >= config_.run_length.value;
    else
      s.converged = prefix == trace_.consensus_chain.blocks.size();
  }

  SimConfig config_;
  Chain genesis_;
  std::map<NodeId, Node> nodes_;
  std::map<std::uint64_t, std::uint64_t> next_nonce_;
  std::map<NodeId, std::uint64_t> last_verified_;
  std::set<Transaction> rejected_;
  std::priority_queue<Scheduled, std::vector<Scheduled>, std::greater<>> queue_;
  std::uint64_t seq_ = 0;
  std::uint64_t now_ = 0;
  std::uint64_t next_node_id_ = 0;
  bool mining_active_ = true;
  Rng workload_rng_{0};
  SimTrace trace_;
};

/// Builds and runs one simulation to its configured stop rule.
inline SimTrace run_simulation(const SimConfig& config) {
  Simulation sim(config);
  return sim.run();
}

/// One mining attempt: draw a nonce from the node's stream and test the
/// puzzle. Exposed standalone for the attempt-statistics tests.
inline std::optional<Block> mine_attempt(const Chain& chain, const AccountState& state,
                                         const std::vector<Transaction>& mempool,
                                         std::uint64_t timestamp, Rng& rng,
                                         std::uint32_t difficulty) {
  Block candidate;
  candidate.index = chain.tip().index + 1;
  candidate.prev_digest = chain.tip().digest();
  candidate.timestamp = timestamp;
  AccountState scratch = state;
  for (const auto& txn : mempool)
    if (scratch.apply(txn) == TxnCheck::Ok) candidate.transactions.push_back(txn);
  candidate.payload_digest = payload_digest_of(candidate.transactions);
  candidate.puzzle_nonce = rng.next_u64();
  if (candidate.digest().leading_zero_bits() < static_cast<int>(difficulty))
    return std::nullopt;
  return candidate;
}

}  // namespace engram_ledger
