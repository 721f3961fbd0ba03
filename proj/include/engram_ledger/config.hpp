#pragma once

// Strict JSON configuration: unknown keys are errors, every field has a
// documented default, and any accepted config round-trips through
// parse -> serialize -> parse unchanged.

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "engram_ledger/adversary.hpp"
#include "engram_ledger/errors.hpp"
#include "engram_ledger/experiments.hpp"
#include "engram_ledger/sim_config.hpp"

namespace engram_ledger {

struct DrillConfig {
  DrillParams params;
  std::uint32_t rounds = 60;
  std::uint32_t holdout_drills = 40;
};

struct ShardBenchConfig {
  std::uint32_t trials = 10000;
};

struct AppConfig {
  SimConfig sim;
  DrillConfig drill;
  MemoryConfig memory;
  ShardBenchConfig bench;
};

namespace detail {

using Json = nlohmann::json;

inline void require_keys(const Json& obj, std::initializer_list<const char*> known,
                         const std::string& scope) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* k : known)
      if (key == k) ok = true;
    if (!ok) throw UnknownKey(scope.empty() ? key : scope + "." + key);
  }
}

template <typename T>
T get_or(const Json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ParseError(std::string(key) + ": " + e.what());
  }
}

inline SelectionPolicyKind policy_from_string(const std::string& s) {
  if (s == "uniform_random") return SelectionPolicyKind::UniformRandom;
  if (s == "temporal_window") return SelectionPolicyKind::TemporalWindow;
  if (s == "freshness_priority") return SelectionPolicyKind::FreshnessPriority;
  if (s == "least_recently_used") return SelectionPolicyKind::LeastRecentlyUsed;
  throw ParseError("unknown policy: " + s);
}

inline AttackScenario scenario_from_json(const Json& j) {
  AttackScenario s;
  const std::string kind = get_or<std::string>(j, "kind", "");
  if (kind == "double_spend") {
    require_keys(j, {"kind", "sender", "amount_a", "amount_b", "delta_t", "at_time"},
                 "adversary");
    s.kind = AttackScenario::Kind::DoubleSpend;
    s.sender = get_or<std::uint64_t>(j, "sender", 1);
    s.amount_a = get_or<std::uint64_t>(j, "amount_a", 60);
    s.amount_b = get_or<std::uint64_t>(j, "amount_b", 60);
    s.delta_t = get_or<std::uint64_t>(j, "delta_t", 1);
    s.at_time = get_or<std::uint64_t>(j, "at_time", 1);
  } else if (kind == "tamper") {
    require_keys(j, {"kind", "node", "height", "bit", "at_time"}, "adversary");
    s.kind = AttackScenario::Kind::Tamper;
    s.node = get_or<std::uint64_t>(j, "node", 0);
    s.height = get_or<std::uint64_t>(j, "height", 0);
    s.bit = get_or<std::uint32_t>(j, "bit", 0);
    s.at_time = get_or<std::uint64_t>(j, "at_time", 1);
  } else if (kind == "equivocating_validator" || kind == "invalid_approver") {
    require_keys(j, {"kind", "node", "rate"}, "adversary");
    s.kind = kind == "equivocating_validator"
                 ? AttackScenario::Kind::EquivocatingValidator
                 : AttackScenario::Kind::InvalidApprover;
    s.node = get_or<std::uint64_t>(j, "node", 0);
    s.rate = get_or<double>(j, "rate", 0.0);
  } else {
    throw ParseError("unknown adversary kind: " + kind);
  }
  return s;
}

inline Json scenario_to_json(const AttackScenario& s) {
  Json j;
  switch (s.kind) {
    case AttackScenario::Kind::DoubleSpend:
      j["kind"] = "double_spend";
      j["sender"] = s.sender;
      j["amount_a"] = s.amount_a;
      j["amount_b"] = s.amount_b;
      j["delta_t"] = s.delta_t;
      j["at_time"] = s.at_time;
      break;
    case AttackScenario::Kind::Tamper:
      j["kind"] = "tamper";
      j["node"] = s.node;
      j["height"] = s.height;
      j["bit"] = s.bit;
      j["at_time"] = s.at_time;
      break;
    case AttackScenario::Kind::EquivocatingValidator:
      j["kind"] = "equivocating_validator";
      j["node"] = s.node;
      j["rate"] = s.rate;
      break;
    case AttackScenario::Kind::InvalidApprover:
      j["kind"] = "invalid_approver";
      j["node"] = s.node;
      j["rate"] = s.rate;
      break;
  }
  return j;
}

}  // namespace detail

inline AppConfig parse_config_text(const std::string& text) {
  using detail::get_or;
  using detail::require_keys;
  using Json = detail::Json;

  Json root;
  try {
    root = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(e.what());
  }
  if (!root.is_object()) throw ParseError("config root must be an object");
  require_keys(root,
               {"n_nodes", "difficulty", "latency", "seed", "segment_size",
                "replication", "window", "trust_threshold", "quorum", "run_length",
                "n_accounts", "initial_balance", "txn_interval",
                "sharded_verification", "policy", "freshness_tau",
                "node_join_schedule", "adversary", "drill", "memory", "shard_bench"},
               "");

  AppConfig cfg;
  SimConfig& sim = cfg.sim;
  sim.n_nodes = get_or<std::uint32_t>(root, "n_nodes", sim.n_nodes);
  sim.difficulty = get_or<std::uint32_t>(root, "difficulty", sim.difficulty);
  if (root.contains("latency")) {
    const Json& l = root.at("latency");
    require_keys(l, {"min", "max"}, "latency");
    sim.latency_min = get_or<std::uint64_t>(l, "min", sim.latency_min);
    sim.latency_max = get_or<std::uint64_t>(l, "max", sim.latency_max);
  }
  sim.seed = get_or<std::uint64_t>(root, "seed", sim.seed);
  sim.segment_size = get_or<std::uint32_t>(root, "segment_size", sim.segment_size);
  sim.replication = get_or<std::uint32_t>(root, "replication", sim.replication);
  sim.window = get_or<std::uint64_t>(root, "window", sim.window);
  sim.trust_threshold =
      get_or<std::uint64_t>(root, "trust_threshold", sim.trust_threshold);
  sim.quorum = get_or<std::uint32_t>(root, "quorum", sim.quorum);
  if (root.contains("run_length")) {
    const Json& r = root.at("run_length");
    require_keys(r, {"blocks", "time"}, "run_length");
    if (r.contains("blocks") == r.contains("time"))
      throw ParseError("run_length needs exactly one of blocks|time");
    if (r.contains("blocks"))
      sim.run_length = {StopRule::Kind::Blocks, get_or<std::uint64_t>(r, "blocks", 30)};
    else
      sim.run_length = {StopRule::Kind::Time, get_or<std::uint64_t>(r, "time", 1000)};
  }
  sim.n_accounts = get_or<std::uint32_t>(root, "n_accounts", sim.n_accounts);
  sim.initial_balance =
      get_or<std::uint64_t>(root, "initial_balance", sim.initial_balance);
  sim.txn_interval = get_or<std::uint64_t>(root, "txn_interval", sim.txn_interval);
  sim.sharded_verification =
      get_or<bool>(root, "sharded_verification", sim.sharded_verification);
  if (root.contains("policy"))
    sim.policy = detail::policy_from_string(get_or<std::string>(root, "policy", ""));
  sim.freshness_tau = get_or<double>(root, "freshness_tau", sim.freshness_tau);
  if (root.contains("node_join_schedule")) {
    for (const Json& j : root.at("node_join_schedule")) {
      require_keys(j, {"time", "count"}, "node_join_schedule");
      sim.node_join_schedule.push_back({get_or<std::uint64_t>(j, "time", 0),
                                        get_or<std::uint32_t>(j, "count", 1)});
    }
  }
  if (root.contains("adversary"))
    for (const Json& j : root.at("adversary"))
      sim.adversaries.push_back(detail::scenario_from_json(j));

  if (root.contains("drill")) {
    const Json& d = root.at("drill");
    require_keys(d,
                 {"rounds", "holdout_drills", "intensity_lo", "intensity_hi",
                  "honest_nodes", "malicious_nodes", "voting_rounds",
                  "invalid_fraction", "honest_noise", "learning_rate", "margin",
                  "grid_size"},
                 "drill");
    DrillConfig& dc = cfg.drill;
    dc.rounds = get_or<std::uint32_t>(d, "rounds", dc.rounds);
    dc.holdout_drills = get_or<std::uint32_t>(d, "holdout_drills", dc.holdout_drills);
    dc.params.intensity_lo = get_or<double>(d, "intensity_lo", dc.params.intensity_lo);
    dc.params.intensity_hi = get_or<double>(d, "intensity_hi", dc.params.intensity_hi);
    dc.params.honest_nodes =
        get_or<std::uint32_t>(d, "honest_nodes", dc.params.honest_nodes);
    dc.params.malicious_nodes =
        get_or<std::uint32_t>(d, "malicious_nodes", dc.params.malicious_nodes);
    dc.params.voting_rounds =
        get_or<std::uint32_t>(d, "voting_rounds", dc.params.voting_rounds);
    dc.params.invalid_fraction =
        get_or<double>(d, "invalid_fraction", dc.params.invalid_fraction);
    dc.params.honest_noise = get_or<double>(d, "honest_noise", dc.params.honest_noise);
    dc.params.learning_rate =
        get_or<double>(d, "learning_rate", dc.params.learning_rate);
    dc.params.margin = get_or<double>(d, "margin", dc.params.margin);
    dc.params.grid_size = get_or<std::uint32_t>(d, "grid_size", dc.params.grid_size);
  }

  if (root.contains("memory")) {
    const Json& m = root.at("memory");
    require_keys(m,
                 {"episodes", "elements_per_episode", "element_dim", "retention_p",
                  "alternatives", "probes", "runs", "propagate_integrity",
                  "sparse_population", "sparse_active", "engram"},
                 "memory");
    MemoryConfig& mc = cfg.memory;
    mc.episodes = get_or<std::uint32_t>(m, "episodes", mc.episodes);
    mc.elements_per_episode =
        get_or<std::uint32_t>(m, "elements_per_episode", mc.elements_per_episode);
    mc.element_dim = get_or<std::uint32_t>(m, "element_dim", mc.element_dim);
    mc.retention_p = get_or<double>(m, "retention_p", mc.retention_p);
    mc.alternatives = get_or<std::uint32_t>(m, "alternatives", mc.alternatives);
    mc.probes = get_or<std::uint32_t>(m, "probes", mc.probes);
    mc.runs = get_or<std::uint32_t>(m, "runs", mc.runs);
    mc.propagate_integrity =
        get_or<bool>(m, "propagate_integrity", mc.propagate_integrity);
    mc.sparse_population =
        get_or<std::uint32_t>(m, "sparse_population", mc.sparse_population);
    mc.sparse_active = get_or<std::uint32_t>(m, "sparse_active", mc.sparse_active);
    if (m.contains("engram")) {
      const Json& e = m.at("engram");
      require_keys(e,
                   {"n_neurons", "engram_size", "boost", "tau_mem",
                    "excitability_floor", "tau_young", "young_multiplier"},
                   "memory.engram");
      EngramParams& ep = mc.engram;
      ep.n_neurons = get_or<std::uint32_t>(e, "n_neurons", ep.n_neurons);
      ep.engram_size = get_or<std::uint32_t>(e, "engram_size", ep.engram_size);
      ep.boost = get_or<double>(e, "boost", ep.boost);
      ep.tau_mem = get_or<double>(e, "tau_mem", ep.tau_mem);
      ep.excitability_floor =
          get_or<double>(e, "excitability_floor", ep.excitability_floor);
      ep.tau_young = get_or<double>(e, "tau_young", ep.tau_young);
      ep.young_multiplier =
          get_or<double>(e, "young_multiplier", ep.young_multiplier);
    }
  }

  if (root.contains("shard_bench")) {
    const Json& b = root.at("shard_bench");
    require_keys(b, {"trials"}, "shard_bench");
    cfg.bench.trials = get_or<std::uint32_t>(b, "trials", cfg.bench.trials);
  }

  cfg.sim.validate();
  cfg.memory.validate();
  return cfg;
}

inline AppConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

inline std::string serialize_config(const AppConfig& cfg) {
  using Json = detail::Json;
  Json root;
  const SimConfig& sim = cfg.sim;
  root["n_nodes"] = sim.n_nodes;
  root["difficulty"] = sim.difficulty;
  root["latency"] = {{"min", sim.latency_min}, {"max", sim.latency_max}};
  root["seed"] = sim.seed;
  root["segment_size"] = sim.segment_size;
  root["replication"] = sim.replication;
  root["window"] = sim.window;
  root["trust_threshold"] = sim.trust_threshold;
  root["quorum"] = sim.quorum;
  if (sim.run_length.kind == StopRule::Kind::Blocks)
    root["run_length"] = {{"blocks", sim.run_length.value}};
  else
    root["run_length"] = {{"time", sim.run_length.value}};
  root["n_accounts"] = sim.n_accounts;
  root["initial_balance"] = sim.initial_balance;
  root["txn_interval"] = sim.txn_interval;
  root["sharded_verification"] = sim.sharded_verification;
  root["policy"] = to_string(sim.policy);
  root["freshness_tau"] = sim.freshness_tau;
  root["node_join_schedule"] = Json::array();
  for (const auto& j : sim.node_join_schedule)
    root["node_join_schedule"].push_back({{"time", j.time}, {"count", j.count}});
  root["adversary"] = Json::array();
  for (const auto& s : sim.adversaries)
    root["adversary"].push_back(detail::scenario_to_json(s));

  root["drill"] = {{"rounds", cfg.drill.rounds},
                   {"holdout_drills", cfg.drill.holdout_drills},
                   {"intensity_lo", cfg.drill.params.intensity_lo},
                   {"intensity_hi", cfg.drill.params.intensity_hi},
                   {"honest_nodes", cfg.drill.params.honest_nodes},
                   {"malicious_nodes", cfg.drill.params.malicious_nodes},
                   {"voting_rounds", cfg.drill.params.voting_rounds},
                   {"invalid_fraction", cfg.drill.params.invalid_fraction},
                   {"honest_noise", cfg.drill.params.honest_noise},
                   {"learning_rate", cfg.drill.params.learning_rate},
                   {"margin", cfg.drill.params.margin},
                   {"grid_size", cfg.drill.params.grid_size}};

  root["memory"] = {
      {"episodes", cfg.memory.episodes},
      {"elements_per_episode", cfg.memory.elements_per_episode},
      {"element_dim", cfg.memory.element_dim},
      {"retention_p", cfg.memory.retention_p},
      {"alternatives", cfg.memory.alternatives},
      {"probes", cfg.memory.probes},
      {"runs", cfg.memory.runs},
      {"propagate_integrity", cfg.memory.propagate_integrity},
      {"sparse_population", cfg.memory.sparse_population},
      {"sparse_active", cfg.memory.sparse_active},
      {"engram",
       {{"n_neurons", cfg.memory.engram.n_neurons},
        {"engram_size", cfg.memory.engram.engram_size},
        {"boost", cfg.memory.engram.boost},
        {"tau_mem", cfg.memory.engram.tau_mem},
        {"excitability_floor", cfg.memory.engram.excitability_floor},
        {"tau_young", cfg.memory.engram.tau_young},
        {"young_multiplier", cfg.memory.engram.young_multiplier}}}};

  root["shard_bench"] = {{"trials", cfg.bench.trials}};
  return root.dump(2) + "\n";
}

}  // namespace engram_ledger
