// Experiment harness CLI: simulate | shard-bench | drill | memory | verify.
// Every run is a pure function of (subcommand, config bytes, seed); outputs
// are byte-stable except the manifest wall-clock field.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "engram_ledger/adversary.hpp"
#include "engram_ledger/config.hpp"
#include "engram_ledger/experiments.hpp"
#include "engram_ledger/ledger.hpp"
#include "engram_ledger/log.hpp"
#include "engram_ledger/metrics.hpp"
#include "engram_ledger/netsim.hpp"
#include "engram_ledger/sharding.hpp"

namespace el = engram_ledger;
namespace fs = std::filesystem;

namespace {

struct RunContext {
  el::AppConfig config;
  std::string config_digest;
  std::uint64_t seed = 0;
  fs::path out_dir;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw el::IoError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

RunContext make_context(const std::string& config_path, std::uint64_t seed,
                        bool seed_given, const std::string& out_dir) {
  RunContext ctx;
  std::string raw;
  if (!config_path.empty()) {
    raw = read_file(config_path);
    ctx.config = el::parse_config_text(raw);
  }
  ctx.config_digest = el::hash_bytes(raw).hex();
  ctx.seed = seed_given ? seed : ctx.config.sim.seed;
  ctx.config.sim.seed = ctx.seed;
  ctx.out_dir = out_dir.empty() ? fs::path(".") : fs::path(out_dir);
  fs::create_directories(ctx.out_dir);
  return ctx;
}

void finish_manifest(const RunContext& ctx, const std::string& subcommand,
                     std::vector<std::string> outputs,
                     std::chrono::steady_clock::time_point started) {
  el::RunManifest m;
  m.subcommand = subcommand;
  m.config_digest = ctx.config_digest;
  m.seed = ctx.seed;
  m.outputs = std::move(outputs);
  m.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
          .count();
  m.write((ctx.out_dir / "manifest.json").string());
}

int cmd_simulate(const RunContext& ctx) {
  const auto started = std::chrono::steady_clock::now();
  el::SimTrace trace = el::run_simulation(ctx.config.sim);

  el::MetricTable rows({"time", "event", "node", "detail"});
  for (const auto& r : trace.rows)
    rows.add_row({r.time, r.kind, r.node, r.detail});
  rows.write_csv((ctx.out_dir / "trace.csv").string());

  nlohmann::json summary;
  summary["blocks_produced"] = trace.summary.blocks_produced;
  summary["forks_observed"] = trace.summary.forks_observed;
  summary["flagged_double_spends"] = trace.summary.flagged_double_spends;
  summary["converged"] = trace.summary.converged;
  summary["common_prefix"] = trace.summary.common_prefix;
  summary["end_time"] = trace.summary.end_time;
  nlohmann::json heights;
  for (const auto& [id, h] : trace.summary.node_heights)
    heights[std::to_string(id)] = h;
  summary["node_heights"] = heights;
  el::MetricTable::write_file((ctx.out_dir / "summary.json").string(),
                              summary.dump(2) + "\n");

  el::save_chain_file(trace.consensus_chain, (ctx.out_dir / "chain.bin").string());
  finish_manifest(ctx, "simulate", {"trace.csv", "summary.json", "chain.bin"}, started);
  el::log_info("simulate: blocks=" + std::to_string(trace.summary.blocks_produced) +
               " converged=" + std::to_string(trace.summary.converged));
  return 0;
}

double uniform_closed_form(std::uint32_t n, std::uint32_t r) {
  double disjoint = 1.0;
  for (std::uint32_t i = 0; i < r; ++i)
    disjoint *= static_cast<double>(n - r - i) / static_cast<double>(n - i);
  return 1.0 - disjoint;
}

int cmd_shard_bench(const RunContext& ctx, const std::string& policies,
                    std::uint32_t trials_override) {
  const auto started = std::chrono::steady_clock::now();
  const el::SimConfig& sim = ctx.config.sim;
  const std::uint32_t trials =
      trials_override > 0 ? trials_override : ctx.config.bench.trials;
  el::Rng rng(el::splitmix64(ctx.seed ^ 0xbe4c4ULL));

  std::vector<el::NodeId> live(sim.n_nodes);
  std::iota(live.begin(), live.end(), el::NodeId{0});

  std::vector<el::SelectionPolicyKind> kinds;
  for (auto kind : {el::SelectionPolicyKind::TemporalWindow,
                    el::SelectionPolicyKind::UniformRandom,
                    el::SelectionPolicyKind::FreshnessPriority,
                    el::SelectionPolicyKind::LeastRecentlyUsed})
    if (policies == "all" || policies.find(el::to_string(kind)) != std::string::npos)
      kinds.push_back(kind);
  if (kinds.empty()) throw el::ParseError("no policy matches --policies " + policies);

  el::MetricTable detection({"policy", "trials", "detected", "rate", "closed_form"});
  for (auto kind : kinds) {
    std::uint64_t detected = 0;
    for (std::uint32_t trial = 0; trial < trials; ++trial) {
      const std::uint64_t sender = 1 + rng.below(sim.n_accounts);
      const std::uint64_t balance = sim.initial_balance;
      el::Transaction t1, t2;
      t1.sender_id = t2.sender_id = sender;
      t1.recipient_id = t2.recipient_id = sender + 1;
      t1.amount = balance / 2 + 1 + rng.below(balance / 4);
      t2.amount = balance / 2 + 1 + rng.below(balance / 4);  // joint overdraft
      t1.nonce = 0;
      t2.nonce = 1;
      t1.timestamp = rng.below(sim.window * 50);
      t2.timestamp = t1.timestamp + 1 + rng.below(sim.window - 1);  // dt < W

      el::SelectionPolicy pol;
      pol.kind = kind;
      pol.window = sim.window;
      pol.tau_node = sim.freshness_tau;
      el::AssignmentContext actx;
      actx.chain_seed = el::splitmix64(ctx.seed ^ (trial * 2654435761ULL + 17));
      actx.block_digest = el::hash_bytes(std::to_string(trial));
      actx.live_nodes = live;
      for (el::NodeId n : live) actx.join_time[n] = 0;
      actx.now = t2.timestamp;
      actx.replication = sim.replication;
      actx.quorum = sim.effective_quorum();

      // two single-transaction segments: independently keyed for the
      // block-keyed policies, sender/window-keyed for temporal
      std::vector<el::Segment> segments(2);
      segments[0].segment_id = 0;
      segments[0].transactions = {t1};
      segments[1].segment_id = 1;
      segments[1].transactions = {t2};
      const el::Assignment assignment = el::assign_segments(pol, segments, actx);
      const auto flagged = el::detect_double_spend(assignment, segments,
                                                   {{sender, balance}});
      if (!flagged.empty()) ++detected;
    }
    const double rate = static_cast<double>(detected) / trials;
    const double closed = kind == el::SelectionPolicyKind::TemporalWindow
                              ? 1.0
                              : uniform_closed_form(sim.n_nodes, sim.replication);
    detection.add_row({el::to_string(kind), std::uint64_t{trials}, detected, rate,
                       closed});
  }
  detection.write_csv((ctx.out_dir / "detection.csv").string());

  el::MetricTable latency({"mode", "segments", "latency", "speedup"});
  const el::CostModel cost{1.0, 30.0};
  const std::uint64_t total_txns = 10000;
  const double mono = el::measure_verification_latency(el::VerifyMode::Monolithic,
                                                       cost, total_txns);
  latency.add_row({std::string("monolithic"), std::uint64_t{1}, mono, 1.0});
  for (std::uint64_t s : {1ULL, 5ULL, 10ULL, 20ULL, 50ULL}) {
    const double lat = el::measure_verification_latency(el::VerifyMode::Sharded, cost,
                                                        total_txns, s);
    latency.add_row({std::string("sharded"), s, lat, mono / lat});
  }
  latency.write_csv((ctx.out_dir / "latency.csv").string());

  finish_manifest(ctx, "shard-bench", {"detection.csv", "latency.csv"}, started);
  return 0;
}

int cmd_drill(const RunContext& ctx, std::uint32_t rounds_override) {
  const auto started = std::chrono::steady_clock::now();
  el::DrillConfig dc = ctx.config.drill;
  if (rounds_override > 0) dc.rounds = rounds_override;

  const el::DrillFactory factory = el::default_drill_factory(dc.params);
  const el::Discriminator disc =
      el::fire_drill_train(factory, dc.rounds, ctx.seed, dc.params);

  // held-out drills across the full intensity range
  el::Rng rng(el::splitmix64(ctx.seed ^ 0x401d0ULL));
  el::MetricTable drills({"round", "scenario", "detected"});
  std::vector<el::DrillSample> holdout;
  for (std::uint32_t d = 0; d < dc.holdout_drills; ++d) {
    const double intensity =
        rng.uniform(dc.params.intensity_lo, dc.params.intensity_hi);
    const auto samples = el::run_drill(dc.params, intensity, rng.next_u64());
    bool all_malicious_flagged = true;
    for (const auto& s : samples) {
      if (s.malicious &&
          el::classify_node(disc, s.features) != el::NodeClass::Flagged)
        all_malicious_flagged = false;
      holdout.push_back(s);
    }
    drills.add_row({std::uint64_t{d},
                    "invalid_approver rate=" + el::format_number(intensity),
                    all_malicious_flagged});
  }
  const double accuracy = el::balanced_accuracy(disc, holdout);
  drills.write_csv((ctx.out_dir / "drills.csv").string());

  nlohmann::json dj;
  dj["weights"] = {disc.weights[0], disc.weights[1], disc.weights[2]};
  dj["bias"] = disc.bias;
  dj["threshold"] = disc.threshold;
  dj["accuracy"] = accuracy;
  el::MetricTable::write_file((ctx.out_dir / "discriminator.json").string(),
                              dj.dump(2) + "\n");

  finish_manifest(ctx, "drill", {"discriminator.json", "drills.csv"}, started);
  el::log_info("drill: holdout balanced accuracy " + el::format_number(accuracy));
  return 0;
}

int cmd_memory(const RunContext& ctx, const std::string& experiment) {
  const auto started = std::chrono::steady_clock::now();
  const el::MemoryConfig& mc = ctx.config.memory;
  nlohmann::json summary;
  std::vector<std::string> outputs;

  if (experiment == "h1" || experiment == "all") {
    const el::H1Result h1 = el::run_h1(mc, ctx.seed);
    el::MetricTable t({"seed", "mode", "result"});
    for (const auto& r : h1.rows) t.add_row({r.seed, r.mode, r.result});
    t.write_csv((ctx.out_dir / "h1_order.csv").string());
    outputs.push_back("h1_order.csv");
    summary["h1"] = {{"pass", h1.pass},
                     {"runs", h1.runs},
                     {"linked_unknown", h1.linked_unknown},
                     {"array_before", h1.array_before}};
  }
  if (experiment == "h2" || experiment == "all") {
    const el::H2Result h2 = el::run_h2(mc, ctx.seed);
    el::MetricTable t({"probes", "correct", "accuracy", "expected_accuracy",
                       "p_value", "recall_prefers_false", "original_intact"});
    t.add_row({h2.probes, h2.correct, h2.accuracy, h2.expected_accuracy, h2.p_value,
               h2.recall_prefers_false, h2.original_intact});
    t.write_csv((ctx.out_dir / "h2_probe.csv").string());
    outputs.push_back("h2_probe.csv");
    summary["h2"] = {{"pass", h2.pass},
                     {"accuracy", h2.accuracy},
                     {"expected_accuracy", h2.expected_accuracy},
                     {"p_value", h2.p_value}};
  }
  if (experiment == "h3" || experiment == "all") {
    const el::H3Result h3 = el::run_h3(mc, ctx.seed);
    el::MetricTable t({"trial", "episode", "element", "protected_result",
                       "unprotected_result", "siblings_intact"});
    for (const auto& r : h3.rows)
      t.add_row({r.trial, r.episode, std::uint64_t{r.element}, r.protected_result,
                 r.unprotected_result, r.siblings_intact});
    t.write_csv((ctx.out_dir / "h3_integrity.csv").string());
    outputs.push_back("h3_integrity.csv");
    summary["h3"] = {{"pass", h3.pass},
                     {"trials", h3.trials},
                     {"protected_violations", h3.protected_violations},
                     {"unprotected_sibling_intact", h3.unprotected_sibling_intact}};
  }

  el::MetricTable::write_file((ctx.out_dir / "summary.json").string(),
                              summary.dump(2) + "\n");
  outputs.push_back("summary.json");
  finish_manifest(ctx, "memory", outputs, started);

  bool all_pass = true;
  for (const auto& [key, val] : summary.items())
    if (!val.at("pass").get<bool>()) all_pass = false;
  return all_pass ? 0 : 1;
}

int cmd_verify(const std::string& chain_file, const RunContext& ctx) {
  const el::Chain chain =
      el::load_chain_file(chain_file, ctx.config.sim.difficulty);
  const el::ChainVerdict verdict = el::verify_chain(chain);
  std::cout << verdict.to_string() << "\n";
  return verdict.valid ? 0 : 1;
}

int dispatch(const std::string& subcommand, const RunContext& ctx,
             const std::string& experiment, std::uint32_t drill_rounds,
             const std::string& chain_file, const std::string& policies,
             std::uint32_t bench_trials) {
  if (subcommand == "simulate") return cmd_simulate(ctx);
  if (subcommand == "shard-bench") return cmd_shard_bench(ctx, policies, bench_trials);
  if (subcommand == "drill") return cmd_drill(ctx, drill_rounds);
  if (subcommand == "memory") return cmd_memory(ctx, experiment);
  if (subcommand == "verify") return cmd_verify(chain_file, ctx);
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"engram-ledger: sharded hash-chain and episodic-memory simulator"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out_dir;
  std::uint32_t parallel_seeds = 1;
  app.add_option("--config", config_path, "JSON config file (strict keys)");
  app.add_option("--seed", seed, "seed override")->each([&](const std::string&) {
    seed_given = true;
  });
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--parallel-seeds", parallel_seeds,
                 "run k isolated seeded replicas concurrently");

  auto* sim = app.add_subcommand("simulate", "run the network simulation");
  auto* bench = app.add_subcommand("shard-bench",
                                   "double-spend detection and latency benchmarks");
  std::string policies = "all";
  std::uint32_t bench_trials = 0;
  bench->add_option("--policies", policies, "all or comma list of policy names");
  bench->add_option("--trials", bench_trials, "detection trials override");
  auto* drill = app.add_subcommand("drill", "fire-drill discriminator training");
  std::uint32_t drill_rounds = 0;
  drill->add_option("--rounds", drill_rounds, "training rounds override");
  auto* memory = app.add_subcommand("memory", "episodic-memory hypothesis runs");
  std::string experiment = "all";
  memory->add_option("--experiment", experiment, "h1|h2|h3|all")
      ->check(CLI::IsMember({"h1", "h2", "h3", "all"}));
  auto* verify = app.add_subcommand("verify", "verify a chain file");
  std::string chain_file;
  verify->add_option("chain-file", chain_file, "canonical chain file")->required();
  (void)sim;

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  const std::string subcommand = app.get_subcommands().front()->get_name();
  try {
    if (parallel_seeds > 1 && subcommand != "verify") {
      std::vector<std::thread> workers;
      std::vector<int> results(parallel_seeds, 0);
      for (std::uint32_t k = 0; k < parallel_seeds; ++k) {
        workers.emplace_back([&, k] {
          try {
            RunContext ctx = make_context(
                config_path, (seed_given ? seed : 0) + k, true,
                (fs::path(out_dir.empty() ? "." : out_dir) /
                 ("seed-" + std::to_string((seed_given ? seed : 0) + k)))
                    .string());
            results[k] = dispatch(subcommand, ctx, experiment, drill_rounds,
                                  chain_file, policies, bench_trials);
          } catch (...) {
            results[k] = 2;
          }
        });
      }
      for (auto& w : workers) w.join();
      for (int r : results)
        if (r != 0) return r;
      return 0;
    }
    RunContext ctx = make_context(config_path, seed, seed_given, out_dir);
    return dispatch(subcommand, ctx, experiment, drill_rounds, chain_file, policies,
                    bench_trials);
  } catch (const el::ParseError& e) {
    el::log_error(e.what());
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const el::UnknownKey& e) {
    std::cerr << "config error: unknown key " << e.what() << "\n";
    return 2;
  } catch (const el::RangeError& e) {
    std::cerr << "config error: out-of-range field " << e.what() << "\n";
    return 2;
  } catch (const el::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
