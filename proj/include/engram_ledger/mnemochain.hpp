#pragma once

// Episodic memory as an append-only hash chain: episodes carry content
// element vectors, link to their predecessor by digest, and recruit a
// neuron engram whose membership follows excitability. Includes the three
// hypothesis experiments (order disruption, false-memory forks, element
// attacks) run as in-silico protocols.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "engram_ledger/digest.hpp"
#include "engram_ledger/errors.hpp"
#include "engram_ledger/ledger.hpp"
#include "engram_ledger/rng.hpp"
#include "engram_ledger/sparse.hpp"

namespace engram_ledger {

struct EngramParams {
  std::uint32_t n_neurons = 2048;     // N
  std::uint32_t engram_size = 40;     // m
  double boost = 5.0;                 // excitability added on recruitment
  double tau_mem = 10.0;              // decay constant back toward the floor
  double excitability_floor = 1.0;    // epsilon_0 > 0
  double tau_young = 5.0;             // neurogenesis window
  double young_multiplier = 1.5;      // gamma > 1

  void validate() const {
    if (n_neurons == 0) throw RangeError("n_neurons");
    if (engram_size == 0) throw RangeError("engram_size");
    if (excitability_floor <= 0.0) throw RangeError("excitability_floor");
    if (tau_mem <= 0.0) throw RangeError("tau_mem");
    if (young_multiplier < 1.0) throw RangeError("young_multiplier");
  }
};

struct Engram {
  std::uint64_t episode_id = 0;
  std::vector<std::uint32_t> neurons;  // sorted, exactly engram_size entries
};

inline std::uint32_t engram_overlap(const Engram& a, const Engram& b) {
  std::vector<std::uint32_t> inter;
  std::set_intersection(a.neurons.begin(), a.neurons.end(), b.neurons.begin(),
                        b.neurons.end(), std::back_inserter(inter));
  return static_cast<std::uint32_t>(inter.size());
}

// Excitability-weighted recruitment. Recruited neurons get a boost that
// decays back toward the floor, so engrams formed close in time share
// members; young neurons carry a multiplier (neurogenesis priority).
class EngramPool {
 public:
  EngramPool(EngramParams params, std::uint64_t seed)
      : params_(params), rng_(splitmix64(seed ^ 0xe2674aULL)) {
    params_.validate();
    excitability_.assign(params_.n_neurons, params_.excitability_floor);
    birth_time_.assign(params_.n_neurons, 0);
  }

  std::size_t size() const { return excitability_.size(); }
  double excitability(std::uint32_t i) const { return excitability_.at(i); }

  void add_neurons(std::uint32_t count, std::uint64_t birth_time) {
    excitability_.insert(excitability_.end(), count, params_.excitability_floor);
    birth_time_.insert(birth_time_.end(), count, birth_time);
  }

  Engram recruit(std::uint64_t t) {
    if (params_.engram_size > excitability_.size())
      throw PoolTooSmall("engram size exceeds pool");
    decay_to(t);
    const std::size_t n = excitability_.size();
    std::vector<double> weight(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint64_t age = t >= birth_time_[i] ? t - birth_time_[i] : 0;
      weight[i] = excitability_[i] *
                  (static_cast<double>(age) < params_.tau_young
                       ? params_.young_multiplier
                       : 1.0);
    }
    Engram e;
    e.episode_id = next_episode_++;
    std::vector<std::uint32_t> picked;
    std::vector<bool> taken(n, false);
    double total = 0.0;
    for (double w : weight) total += w;
    for (std::uint32_t k = 0; k < params_.engram_size; ++k) {
      double x = rng_.uniform() * total;
      std::size_t chosen = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (taken[i]) continue;
        x -= weight[i];
        if (x < 0.0) {
          chosen = i;
          break;
        }
      }
      if (chosen == n) {  // numeric tail: last untaken
        for (std::size_t i = n; i-- > 0;)
          if (!taken[i]) {
            chosen = i;
            break;
          }
      }
      taken[chosen] = true;
      total -= weight[chosen];
      picked.push_back(static_cast<std::uint32_t>(chosen));
    }
    for (std::uint32_t i : picked) excitability_[i] += params_.boost;
    std::sort(picked.begin(), picked.end());
    e.neurons = std::move(picked);
    return e;
  }

 private:
  void decay_to(std::uint64_t t) {
    if (t <= last_update_) return;
    const double dt = static_cast<double>(t - last_update_);
    const double f = std::exp(-dt / params_.tau_mem);
    for (double& e : excitability_)
      e = params_.excitability_floor + (e - params_.excitability_floor) * f;
    last_update_ = t;
  }

  EngramParams params_;
  std::vector<double> excitability_;
  std::vector<std::uint64_t> birth_time_;
  std::uint64_t last_update_ = 0;
  std::uint64_t next_episode_ = 0;
  Rng rng_;
};

using Elements = std::vector<std::vector<double>>;

inline Bytes canonical_elements(const Elements& elements) {
  ByteWriter w;
  w.u32_be(static_cast<std::uint32_t>(elements.size()));
  for (const auto& el : elements) {
    w.u32_be(static_cast<std::uint32_t>(el.size()));
    for (double v : el) w.f64_be(v);
  }
  return w.take();
}

inline Digest episode_digest_of(const Elements& elements, const Digest& prev) {
  ByteWriter w;
  w.raw(std::span<const std::uint8_t>(canonical_elements(elements)));
  w.raw(std::span<const std::uint8_t>(prev.bytes));
  return hash_bytes(w.bytes());
}

struct Episode {
  std::uint64_t id = 0;
  Elements elements;
  Digest prev_digest;
  Digest episode_digest;  // over canonical elements || prev_digest
  std::uint64_t encode_time = 0;
  SparseCode code;
  Engram engram;
};

enum class IntegrityMode { Protected, Unprotected };

struct RecallResult {
  enum class Status { Ok, IntegrityViolation, CueNotFound };
  Status status = Status::CueNotFound;
  std::uint64_t episode_id = 0;
  Elements elements;  // empty unless status == Ok
};

inline std::string to_string(RecallResult::Status s) {
  switch (s) {
    case RecallResult::Status::Ok: return "Ok";
    case RecallResult::Status::IntegrityViolation: return "IntegrityViolation";
    case RecallResult::Status::CueNotFound: return "CueNotFound";
  }
  return "?";
}

// Append-only episodic chain with fork support. The preferred recall path
// is the branch holding the newest episode. Nothing is ever overwritten
// except through attack_element, which is the modeled attack.
class EpisodicChain {
 public:
  explicit EpisodicChain(SeparatorParams separator_params,
                         bool propagate_integrity = false)
      : separator_(separator_params), propagate_(propagate_integrity) {}

  static Digest anchor() { return hash_bytes(std::string_view{}); }

  std::size_t size() const { return entries_.size(); }

  const Episode& episode(std::uint64_t id) const { return entry(id).ep; }
  bool disrupted(std::uint64_t id) const { return entry(id).disrupted; }

  /// Appends onto the preferred tip: digest over content plus predecessor
  /// digest, engram recruitment, sparse code over the flattened elements.
  std::uint64_t encode(EngramPool& pool, Elements elements, std::uint64_t t) {
    if (elements.empty()) throw EmptyEpisode("episode needs at least one element");
    return append(pool, std::move(elements), preferred_tip_digest(), t);
  }

  /// Path from genesis anchor to the newest leaf.
  std::vector<std::uint64_t> preferred_path() const {
    std::vector<std::uint64_t> path;
    if (entries_.empty()) return path;
    std::uint64_t leaf = 0;
    for (std::uint64_t id = 0; id < entries_.size(); ++id)
      if (children_.find(entries_[id].ep.episode_digest) == children_.end())
        leaf = id;  // newest childless entry wins
    for (std::optional<std::uint64_t> cur = leaf; cur; cur = parent_of(*cur))
      path.push_back(*cur);
    std::reverse(path.begin(), path.end());
    return path;
  }

  std::optional<std::uint64_t> successor_on_preferred(std::uint64_t id) const {
    const auto path = preferred_path();
    for (std::size_t i = 0; i + 1 < path.size(); ++i)
      if (path[i] == id) return path[i + 1];
    return std::nullopt;
  }

  /// Cue-based holistic recall: exact element match, preferred branch
  /// first. Protected mode recomputes the episode digest (and, when
  /// forward propagation is on, every ancestor's) before releasing any
  /// content; a mismatch returns IntegrityViolation with no elements.
  RecallResult recall_by_cue(const std::vector<double>& cue,
                             IntegrityMode mode) const {
    RecallResult r;
    const auto found = find_by_cue(cue);
    if (!found) return r;  // CueNotFound
    const Entry& e = entry(*found);
    r.episode_id = *found;
    if (mode == IntegrityMode::Protected && !integrity_ok(*found)) {
      r.status = RecallResult::Status::IntegrityViolation;
      return r;
    }
    r.status = RecallResult::Status::Ok;
    r.elements = e.ep.elements;
    return r;
  }

  void disrupt(const std::set<std::uint64_t>& targets) {
    for (std::uint64_t id : targets)
      if (id >= entries_.size()) throw UnknownEpisode("disrupt target " + std::to_string(id));
    for (std::uint64_t id : targets) entries_[id].disrupted = true;
  }

  /// Relative order of two episodes. Array mode reads encode positions.
  /// LinkedList mode requires an intact link walk from the genesis anchor
  /// through both episodes; a disrupted episode severs the walk.
  Order order(std::uint64_t a, std::uint64_t b, OrderMode mode) const {
    entry(a);
    entry(b);
    if (a == b) return Order::Unknown;
    if (mode == OrderMode::Array) return a < b ? Order::Before : Order::After;
    if (!link_reachable(a) || !link_reachable(b)) return Order::Unknown;
    // both ancestries intact; order holds if one lies on the other's path
    if (is_ancestor(a, b)) return Order::Before;
    if (is_ancestor(b, a)) return Order::After;
    return Order::Unknown;  // parallel branches carry no link order
  }

  struct ForkResult {
    std::uint64_t b_prime = 0;
    std::optional<std::uint64_t> c_prime;  // absent when B was the tip
  };

  /// False-memory induction: fork B' off B's predecessor and re-link a
  /// copy of B's successor onto it. The original branch stays byte-intact;
  /// recall then prefers the newer branch.
  ForkResult induce_false_memory(EngramPool& pool, std::uint64_t at_b,
                                 Elements false_elements, std::uint64_t t) {
    const Entry& b = entry(at_b);
    if (false_elements.empty()) throw EmptyEpisode("false memory needs elements");
    const Digest prev_a = b.ep.prev_digest;
    const std::optional<std::uint64_t> c = first_child(at_b);
    ForkResult out;
    out.b_prime = append(pool, std::move(false_elements), prev_a, t);
    if (c) {
      Elements c_copy = entry(*c).ep.elements;
      out.c_prime =
          append(pool, std::move(c_copy), entries_[out.b_prime].ep.episode_digest, t);
    }
    return out;
  }

  /// The attack: mutate a stored element bit without recomputing the
  /// stored digest.
  void attack_element(std::uint64_t id, std::size_t element_index,
                      std::size_t byte_index, std::uint8_t bit) {
    Entry& e = mutable_entry(id);
    if (element_index >= e.ep.elements.size())
      throw BadIndex("element index out of range");
    auto& el = e.ep.elements[element_index];
    if (byte_index >= el.size() * sizeof(double))
      throw BadIndex("byte index out of range");
    double& v = el[byte_index / sizeof(double)];
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    bits ^= 1ULL << ((byte_index % sizeof(double)) * 8 + (bit % 8));
    std::memcpy(&v, &bits, sizeof bits);
  }

  /// Forced-choice probe of an overwritten original: with the retention
  /// probability the original content is retrieved from its branch,
  /// otherwise the answer is a uniform guess among the alternatives.
  bool probe_original(std::uint64_t id, Rng& rng, double retention_p = 0.75,
                      std::uint32_t alternatives = 4) const {
    entry(id);
    if (rng.uniform() < retention_p) return true;
    return rng.below(alternatives) == 0;
  }

  /// True when the stored digest matches a recomputation from content.
  bool episode_intact(std::uint64_t id) const {
    const Entry& e = entry(id);
    return episode_digest_of(e.ep.elements, e.ep.prev_digest) == e.ep.episode_digest;
  }

 private:
  struct Entry {
    Episode ep;
    bool disrupted = false;
  };

  const Entry& entry(std::uint64_t id) const {
    if (id >= entries_.size()) throw UnknownEpisode("episode " + std::to_string(id));
    return entries_[id];
  }

  Entry& mutable_entry(std::uint64_t id) {
    if (id >= entries_.size()) throw UnknownEpisode("episode " + std::to_string(id));
    return entries_[id];
  }

  Digest preferred_tip_digest() const {
    const auto path = preferred_path();
    return path.empty() ? anchor() : entries_[path.back()].ep.episode_digest;
  }

  std::uint64_t append(EngramPool& pool, Elements elements, const Digest& prev,
                       std::uint64_t t) {
    Episode ep;
    ep.id = entries_.size();
    ep.prev_digest = prev;
    ep.episode_digest = episode_digest_of(elements, prev);
    ep.encode_time = t;
    ep.engram = pool.recruit(t);
    std::vector<double> flat;
    for (const auto& el : elements) flat.insert(flat.end(), el.begin(), el.end());
    ep.code = separator_.encode(flat);
    ep.elements = std::move(elements);
    const std::uint64_t id = ep.id;
    by_digest_.emplace(ep.episode_digest, id);
    children_[prev].push_back(id);
    entries_.push_back(Entry{std::move(ep), false});
    return id;
  }

  std::optional<std::uint64_t> parent_of(std::uint64_t id) const {
    const Digest& prev = entries_[id].ep.prev_digest;
    auto it = by_digest_.find(prev);
    if (it == by_digest_.end()) return std::nullopt;  // anchored at genesis
    return it->second;
  }

  std::optional<std::uint64_t> first_child(std::uint64_t id) const {
    auto it = children_.find(entries_[id].ep.episode_digest);
    if (it == children_.end() || it->second.empty()) return std::nullopt;
    return *std::min_element(it->second.begin(), it->second.end());
  }

  bool link_reachable(std::uint64_t id) const {
    for (std::optional<std::uint64_t> cur = id; cur; cur = parent_of(*cur))
      if (entries_[*cur].disrupted) return false;
    return true;
  }

  bool is_ancestor(std::uint64_t maybe_ancestor, std::uint64_t id) const {
    for (std::optional<std::uint64_t> cur = parent_of(id); cur; cur = parent_of(*cur))
      if (*cur == maybe_ancestor) return true;
    return false;
  }

  bool integrity_ok(std::uint64_t id) const {
    if (!episode_intact(id)) return false;
    if (!propagate_) return true;
    for (std::optional<std::uint64_t> cur = parent_of(id); cur; cur = parent_of(*cur))
      if (!episode_intact(*cur)) return false;
    return true;
  }

  std::optional<std::uint64_t> find_by_cue(const std::vector<double>& cue) const {
    const auto path = preferred_path();
    for (auto it = path.rbegin(); it != path.rend(); ++it)
      for (const auto& el : entries_[*it].ep.elements)
        if (el == cue) return *it;
    for (std::uint64_t id = entries_.size(); id-- > 0;) {
      for (const auto& el : entries_[id].ep.elements)
        if (el == cue) return id;
    }
    return std::nullopt;
  }

  std::vector<Entry> entries_;
  std::map<Digest, std::uint64_t> by_digest_;
  std::map<Digest, std::vector<std::uint64_t>> children_;
  SparseSeparator separator_;
  bool propagate_;
};

}  // namespace engram_ledger
