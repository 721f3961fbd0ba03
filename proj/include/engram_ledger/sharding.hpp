#pragma once

// Verification sharding: blocks are partitioned into transaction segments
// and each segment is checked by a replicated node set chosen by one of
// four selection policies. The temporal-window policy keys node sets on
// (sender, time window) so any two conflicting transactions inside one
// window share at least one verifier.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <utility>
#include <vector>

#include "engram_ledger/digest.hpp"
#include "engram_ledger/errors.hpp"
#include "engram_ledger/ledger.hpp"
#include "engram_ledger/rng.hpp"
#include "engram_ledger/sim_config.hpp"

namespace engram_ledger {

using NodeId = std::uint64_t;
using NodeSet = std::set<NodeId>;

struct Segment {
  std::uint32_t segment_id = 0;
  std::vector<Transaction> transactions;
};

/// Splits a transaction list into segments of at most s_txn, order
/// preserved; the last segment may be short.
inline std::vector<Segment> partition_block(const std::vector<Transaction>& txns,
                                            std::uint32_t s_txn) {
  if (s_txn == 0) throw BadSegmentSize("segment size must be positive");
  std::vector<Segment> out;
  for (std::size_t pos = 0; pos < txns.size(); pos += s_txn) {
    Segment s;
    s.segment_id = static_cast<std::uint32_t>(out.size());
    const std::size_t end = std::min(txns.size(), pos + s_txn);
    s.transactions.assign(txns.begin() + pos, txns.begin() + end);
    out.push_back(std::move(s));
  }
  return out;
}

inline std::uint64_t seed_from_digest(const Digest& d) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | d.bytes[i];
  return v;
}

/// Deterministic node-set draw: the PRNG is seeded from
/// hash_bytes(chain_seed || key) and r distinct members of live_nodes are
/// drawn by rejection. Pure function of its inputs.
inline NodeSet derive_node_set(std::uint64_t chain_seed,
                               std::span<const std::uint8_t> key, std::uint32_t r,
                               const std::vector<NodeId>& live_nodes) {
  if (r > live_nodes.size())
    throw NotEnoughNodes("need " + std::to_string(r) + " nodes, have " +
                         std::to_string(live_nodes.size()));
  ByteWriter w;
  w.u64_be(chain_seed);
  w.raw(key);
  Rng rng(seed_from_digest(hash_bytes(w.bytes())));
  NodeSet set;
  while (set.size() < r)
    set.insert(live_nodes[rng.below(live_nodes.size())]);
  return set;
}

struct SelectionPolicy {
  SelectionPolicyKind kind = SelectionPolicyKind::UniformRandom;
  std::uint64_t window = 20;       // W, TemporalWindow
  double tau_node = 10.0;          // age decay, FreshnessPriority
  double weight_floor = 0.01;      // epsilon, keeps old nodes selectable
};

struct AssignmentContext {
  std::uint64_t chain_seed = 0;
  Digest block_digest;
  std::vector<NodeId> live_nodes;                    // ordered
  std::map<NodeId, std::uint64_t> join_time;         // FreshnessPriority
  std::map<NodeId, std::uint64_t> last_verified;     // LeastRecentlyUsed
  std::uint64_t now = 0;
  std::uint32_t replication = 3;                     // r
  std::uint32_t quorum = 2;                          // q
};

struct Assignment {
  // Verifier set per segment; TemporalWindow unions are capped at 3r.
  std::map<std::uint32_t, NodeSet> segment_nodes;
  // Per-transaction verifier sets. Sender-window sets are never dropped
  // here, so the overlap guarantee survives the segment-level cap.
  std::map<std::pair<std::uint32_t, std::size_t>, NodeSet> txn_nodes;
  std::uint32_t quorum = 0;

  NodeSet all_nodes() const {
    NodeSet all;
    for (const auto& [seg, nodes] : segment_nodes) all.insert(nodes.begin(), nodes.end());
    for (const auto& [key, nodes] : txn_nodes) all.insert(nodes.begin(), nodes.end());
    return all;
  }
};

namespace detail {

inline Bytes segment_key(const Digest& block_digest, std::uint32_t segment_id) {
  ByteWriter w;
  w.raw(std::span<const std::uint8_t>(block_digest.bytes));
  w.u64_be(segment_id);
  return w.take();
}

inline Bytes sender_window_key(std::uint64_t sender, std::int64_t window_index) {
  ByteWriter w;
  w.u64_be(sender);
  w.u64_be(static_cast<std::uint64_t>(window_index));
  return w.take();
}

inline Rng segment_rng(const AssignmentContext& ctx, std::uint32_t segment_id) {
  ByteWriter w;
  w.u64_be(ctx.chain_seed);
  w.raw(std::span<const std::uint8_t>(segment_key(ctx.block_digest, segment_id)));
  return Rng(seed_from_digest(hash_bytes(w.bytes())));
}

// Weighted sampling without replacement, deterministic under rng.
inline NodeSet weighted_sample(const std::vector<NodeId>& nodes,
                               const std::vector<double>& weights, std::uint32_t r,
                               Rng& rng) {
  std::vector<std::size_t> remaining(nodes.size());
  std::iota(remaining.begin(), remaining.end(), std::size_t{0});
  NodeSet out;
  for (std::uint32_t pick = 0; pick < r; ++pick) {
    double total = 0.0;
    for (std::size_t i : remaining) total += weights[i];
    double x = rng.uniform() * total;
    std::size_t chosen = remaining.back();
    for (std::size_t pos = 0; pos < remaining.size(); ++pos) {
      x -= weights[remaining[pos]];
      if (x < 0.0) {
        chosen = remaining[pos];
        remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pos));
        break;
      }
      if (pos + 1 == remaining.size()) {  // numeric tail
        chosen = remaining[pos];
        remaining.pop_back();
      }
    }
    out.insert(nodes[chosen]);
  }
  return out;
}

}  // namespace detail

/// Verifier set for one transaction under the temporal-window policy: the
/// union of the sender-keyed sets for the transaction's window w and for
/// w-1, which closes the window-boundary straddle.
inline NodeSet temporal_window_nodes(const Transaction& txn,
                                     const SelectionPolicy& policy,
                                     const AssignmentContext& ctx) {
  if (policy.window == 0) throw MissingContext("temporal window W not set");
  const auto w = static_cast<std::int64_t>(txn.timestamp / policy.window);
  NodeSet nodes = derive_node_set(
      ctx.chain_seed, detail::sender_window_key(txn.sender_id, w), ctx.replication,
      ctx.live_nodes);
  const NodeSet prev = derive_node_set(
      ctx.chain_seed, detail::sender_window_key(txn.sender_id, w - 1),
      ctx.replication, ctx.live_nodes);
  nodes.insert(prev.begin(), prev.end());
  return nodes;
}

inline Assignment assign_segments(const SelectionPolicy& policy,
                                  const std::vector<Segment>& segments,
                                  const AssignmentContext& ctx) {
  if (ctx.replication > ctx.live_nodes.size())
    throw NotEnoughNodes("replication exceeds live node count");
  Assignment out;
  out.quorum = ctx.quorum;
  for (const auto& seg : segments) {
    switch (policy.kind) {
      case SelectionPolicyKind::UniformRandom: {
        NodeSet nodes = derive_node_set(
            ctx.chain_seed, detail::segment_key(ctx.block_digest, seg.segment_id),
            ctx.replication, ctx.live_nodes);
        for (std::size_t i = 0; i < seg.transactions.size(); ++i)
          out.txn_nodes[{seg.segment_id, i}] = nodes;
        out.segment_nodes[seg.segment_id] = std::move(nodes);
        break;
      }
      case SelectionPolicyKind::TemporalWindow: {
        // Segment set = union over its transactions, first-derived order,
        // capped at 3r. Per-txn sets stay uncapped in txn_nodes.
        std::vector<NodeId> ordered;
        NodeSet seen;
        for (std::size_t i = 0; i < seg.transactions.size(); ++i) {
          NodeSet txn_set = temporal_window_nodes(seg.transactions[i], policy, ctx);
          for (NodeId n : txn_set)
            if (seen.insert(n).second) ordered.push_back(n);
          out.txn_nodes[{seg.segment_id, i}] = std::move(txn_set);
        }
        const std::size_t cap = 3ull * ctx.replication;
        if (ordered.size() > cap) ordered.resize(cap);
        out.segment_nodes[seg.segment_id] = NodeSet(ordered.begin(), ordered.end());
        break;
      }
      case SelectionPolicyKind::FreshnessPriority: {
        std::vector<double> weights(ctx.live_nodes.size());
        for (std::size_t i = 0; i < ctx.live_nodes.size(); ++i) {
          auto it = ctx.join_time.find(ctx.live_nodes[i]);
          if (it == ctx.join_time.end())
            throw MissingContext("freshness policy needs join_time per node");
          const double age = static_cast<double>(ctx.now - std::min(ctx.now, it->second));
          weights[i] = std::exp(-age / policy.tau_node) + policy.weight_floor;
        }
        Rng rng = detail::segment_rng(ctx, seg.segment_id);
        NodeSet nodes =
            detail::weighted_sample(ctx.live_nodes, weights, ctx.replication, rng);
        for (std::size_t i = 0; i < seg.transactions.size(); ++i)
          out.txn_nodes[{seg.segment_id, i}] = nodes;
        out.segment_nodes[seg.segment_id] = std::move(nodes);
        break;
      }
      case SelectionPolicyKind::LeastRecentlyUsed: {
        Rng rng = detail::segment_rng(ctx, seg.segment_id);
        std::vector<std::pair<std::pair<std::uint64_t, std::uint64_t>, NodeId>> ranked;
        ranked.reserve(ctx.live_nodes.size());
        for (NodeId n : ctx.live_nodes) {
          auto it = ctx.last_verified.find(n);
          const std::uint64_t used = it == ctx.last_verified.end() ? 0 : it->second;
          ranked.push_back({{used, rng.next_u64()}, n});
        }
        std::sort(ranked.begin(), ranked.end());
        NodeSet nodes;
        for (std::uint32_t i = 0; i < ctx.replication; ++i)
          nodes.insert(ranked[i].second);
        for (std::size_t i = 0; i < seg.transactions.size(); ++i)
          out.txn_nodes[{seg.segment_id, i}] = nodes;
        out.segment_nodes[seg.segment_id] = std::move(nodes);
        break;
      }
    }
  }
  return out;
}

/// Conflict rule shared by detection paths: same sender and either nonce
/// reuse or a joint overdraft of the sender's balance.
inline bool transactions_conflict(const Transaction& a, const Transaction& b,
                                  std::uint64_t sender_balance) {
  if (a.sender_id != b.sender_id) return false;
  if (a.nonce == b.nonce) return true;
  return a.amount + b.amount > sender_balance;
}

struct FlaggedPair {
  Transaction earlier;
  Transaction later;
  auto operator<=>(const FlaggedPair&) const = default;
};

/// A pair is flagged iff some node holds both of its transactions in view
/// and they conflict. Views are per-node retained transactions (current
/// plus previous window under the temporal policy).
inline std::set<FlaggedPair> detect_double_spend(
    const Assignment& assignment, const std::vector<Segment>& segments,
    const std::map<std::uint64_t, std::uint64_t>& sender_balances) {
  std::map<NodeId, std::vector<Transaction>> views;
  for (const auto& [key, nodes] : assignment.txn_nodes) {
    const auto& [seg_id, txn_idx] = key;
    const Transaction& txn = segments.at(seg_id).transactions.at(txn_idx);
    for (NodeId n : nodes) views[n].push_back(txn);
  }
  std::set<FlaggedPair> flagged;
  for (auto& [node, txns] : views) {
    std::sort(txns.begin(), txns.end());
    for (std::size_t i = 0; i < txns.size(); ++i) {
      for (std::size_t j = i + 1; j < txns.size(); ++j) {
        if (txns[i].sender_id != txns[j].sender_id) break;  // sorted by sender
        auto bal = sender_balances.find(txns[i].sender_id);
        const std::uint64_t balance = bal == sender_balances.end() ? 0 : bal->second;
        if (!transactions_conflict(txns[i], txns[j], balance)) continue;
        FlaggedPair p{txns[i], txns[j]};
        if (p.later.timestamp < p.earlier.timestamp ||
            (p.later.timestamp == p.earlier.timestamp && p.later.nonce < p.earlier.nonce))
          std::swap(p.earlier, p.later);
        flagged.insert(p);
      }
    }
  }
  return flagged;
}

enum class VerifyMode { Monolithic, Sharded };

struct CostModel {
  double per_txn = 1.0;      // c
  double per_segment = 0.0;  // o, coordination overhead
};

/// Closed-form verification latency: segments verify in parallel,
/// coordination is serialized.
inline double measure_verification_latency(VerifyMode mode, const CostModel& cost,
                                           std::uint64_t t_txns,
                                           std::uint64_t s_segments = 1) {
  if (mode == VerifyMode::Monolithic)
    return cost.per_txn * static_cast<double>(t_txns);
  if (s_segments == 0) throw BadSegmentSize("sharded mode needs S >= 1");
  const auto per_seg = (t_txns + s_segments - 1) / s_segments;  // ceil
  return cost.per_txn * static_cast<double>(per_seg) +
         cost.per_segment * static_cast<double>(s_segments);
}

/// Stamps every assigned node as used in `round`.
inline void update_usage(const Assignment& assignment, std::uint64_t round,
                         std::map<NodeId, std::uint64_t>& last_verified) {
  for (NodeId n : assignment.all_nodes()) last_verified[n] = round;
}

/// Sharded acceptance: every segment needs at least q approvals among its
/// assigned verifiers.
inline bool quorum_accepted(
    const Assignment& assignment,
    const std::function<bool(std::uint32_t, NodeId)>& approves) {
  for (const auto& [seg_id, nodes] : assignment.segment_nodes) {
    std::uint32_t votes = 0;
    for (NodeId n : nodes)
      if (approves(seg_id, n)) ++votes;
    if (votes < assignment.quorum) return false;
  }
  return true;
}

}  // namespace engram_ledger
