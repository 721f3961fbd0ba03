// Acceptance suite: runs every acceptance criterion at its stated
// tolerance and prints one PASS/FAIL line per criterion. Exit code is the
// number of failed criteria. argv[1] must point at the engram-ledger CLI
// binary (used by the determinism criterion).

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "engram_ledger/adversary.hpp"
#include "engram_ledger/experiments.hpp"
#include "engram_ledger/ledger.hpp"
#include "engram_ledger/netsim.hpp"
#include "engram_ledger/sharding.hpp"
#include "engram_ledger/sparse.hpp"

namespace el = engram_ledger;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& what,
            const std::string& detail) {
  std::printf("%s  criterion %2d: %s (%s)\n", pass ? "PASS" : "FAIL", criterion,
              what.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

el::Block mine(const el::Chain& chain, std::vector<el::Transaction> txns,
               std::uint64_t timestamp, el::Rng& rng) {
  el::Block b;
  b.index = chain.tip().index + 1;
  b.prev_digest = chain.tip().digest();
  b.timestamp = timestamp;
  b.transactions = std::move(txns);
  b.payload_digest = el::payload_digest_of(b.transactions);
  for (;;) {
    b.puzzle_nonce = rng.next_u64();
    if (b.digest().leading_zero_bits() >= static_cast<int>(chain.difficulty)) break;
  }
  return b;
}

std::pair<el::Chain, el::AccountState> hundred_block_chain(std::uint64_t seed) {
  el::SimConfig cfg;
  cfg.n_accounts = 5;
  cfg.initial_balance = 10000;
  cfg.difficulty = 12;  // tip-header flips must fail the puzzle check
  el::Chain chain = el::make_genesis_chain(cfg);
  el::AccountState state = el::genesis_state(chain.blocks[0]);
  el::Rng rng(seed);
  std::map<std::uint64_t, std::uint64_t> nonces;
  for (std::uint32_t h = 1; h <= 100; ++h) {
    std::vector<el::Transaction> txns;
    for (std::uint64_t i = 0; i < 1 + rng.below(4); ++i) {
      el::Transaction t;
      t.sender_id = 1 + rng.below(5);
      t.recipient_id = 1 + rng.below(5);
      t.amount = 1 + rng.below(20);
      t.nonce = nonces[t.sender_id]++;
      t.timestamp = h;
      txns.push_back(t);
    }
    el::append_block(chain, mine(chain, std::move(txns), h, rng), state);
  }
  return {chain, state};
}

void criterion_1_tamper_detection() {
  const double t0 = now_seconds();
  auto [chain, state] = hundred_block_chain(0xc1);
  const el::Bytes clean = chain.encode();
  el::Rng rng(0x1a);
  int detected = 0;
  const int flips = 1000;
  for (int i = 0; i < flips; ++i) {
    el::Bytes bytes = clean;
    const std::size_t bit = rng.below(bytes.size() * 8);
    bytes[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    try {
      if (!el::verify_chain(el::Chain::decode(bytes, chain.difficulty)).valid)
        ++detected;
    } catch (const el::ParseError&) {
      ++detected;  // structural corruption is detection too
    }
  }
  const double elapsed = now_seconds() - t0;
  report(1, detected == flips && elapsed < 10.0, "tamper detection",
         std::to_string(detected) + "/1000 flips detected in " +
             std::to_string(elapsed) + " s");
}

void criterion_2_sha_vectors() {
  const bool empty_ok =
      el::hash_bytes("").hex() ==
      "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855";
  const bool abc_ok =
      el::hash_bytes("abc").hex() ==
      "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad";
  report(2, empty_ok && abc_ok, "sha-256 conformance",
         std::string("empty=") + (empty_ok ? "ok" : "bad") + " abc=" +
             (abc_ok ? "ok" : "bad"));
}

void criterion_3_avalanche() {
  el::Rng rng(0x3a);
  const int trials = 10000;
  std::uint64_t flipped_bits = 0;
  for (int t = 0; t < trials; ++t) {
    el::Bytes header(88);
    for (auto& b : header) b = static_cast<std::uint8_t>(rng.next_u64());
    const el::Digest base = el::block_digest(header);
    const std::size_t bit = rng.below(88 * 8);
    header[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    const el::Digest mod = el::block_digest(header);
    for (int i = 0; i < 32; ++i) {
      std::uint8_t x = base.bytes[i] ^ mod.bytes[i];
      while (x) {
        flipped_bits += x & 1;
        x >>= 1;
      }
    }
  }
  const double fraction = static_cast<double>(flipped_bits) / (256.0 * trials);
  report(3, fraction >= 0.48 && fraction <= 0.52, "avalanche",
         "mean flipped fraction " + std::to_string(fraction));
}

el::AssignmentContext detection_context(std::uint64_t chain_seed) {
  el::AssignmentContext ctx;
  ctx.chain_seed = chain_seed;
  ctx.block_digest = el::hash_bytes("acceptance");
  ctx.live_nodes.resize(100);
  std::iota(ctx.live_nodes.begin(), ctx.live_nodes.end(), el::NodeId{0});
  for (el::NodeId n : ctx.live_nodes) ctx.join_time[n] = 0;
  ctx.replication = 3;
  ctx.quorum = 2;
  return ctx;
}

void criterion_4_temporal_window() {
  el::SelectionPolicy pol;
  pol.kind = el::SelectionPolicyKind::TemporalWindow;
  pol.window = 20;
  el::Rng rng(0x4a);
  const int trials = 10000;
  int flagged = 0;
  for (int t = 0; t < trials; ++t) {
    el::AssignmentContext ctx = detection_context(el::splitmix64(t));
    const std::uint64_t balance = 100;
    el::Transaction t1{1 + rng.below(50), 1, 60, 0, rng.below(2000)};
    el::Transaction t2 = t1;
    t2.nonce = 1;
    t2.amount = 60;  // joint overdraft of 120 > 100
    t2.timestamp = t1.timestamp + 1 + rng.below(pol.window - 1);  // dt < W
    std::vector<el::Segment> segs(2);
    segs[0] = {0, {t1}};
    segs[1] = {1, {t2}};
    const el::Assignment a = el::assign_segments(pol, segs, ctx);
    if (!el::detect_double_spend(a, segs, {{t1.sender_id, balance}}).empty())
      ++flagged;
  }
  report(4, flagged == trials, "temporal-window double-spend detection",
         std::to_string(flagged) + "/" + std::to_string(trials) + " flagged");
}

void criterion_5_uniform_random() {
  el::SelectionPolicy pol;
  pol.kind = el::SelectionPolicyKind::UniformRandom;
  const int trials = 10000;
  int flagged = 0;
  for (int t = 0; t < trials; ++t) {
    el::AssignmentContext ctx = detection_context(el::splitmix64(0xabc + t));
    el::Transaction t1{7, 1, 60, 0, 1};
    el::Transaction t2{7, 1, 60, 1, 2};
    std::vector<el::Segment> segs(2);
    segs[0] = {0, {t1}};
    segs[1] = {1, {t2}};
    const el::Assignment a = el::assign_segments(pol, segs, ctx);
    if (!el::detect_double_spend(a, segs, {{7, 100}}).empty()) ++flagged;
  }
  const double rate = static_cast<double>(flagged) / trials;
  double disjoint = 1.0;
  for (int i = 0; i < 3; ++i) disjoint *= (97.0 - i) / (100.0 - i);
  const double closed = 1.0 - disjoint;  // 0.08819
  const bool closed_ok = std::abs(closed - 0.0882) < 1e-4;
  report(5, std::abs(rate - closed) <= 0.01 && closed_ok,
         "uniform-random detection rate",
         "empirical " + std::to_string(rate) + " vs closed form " +
             std::to_string(closed));
}

void criterion_6_speedup() {
  const el::CostModel cost{1.0, 30.0};
  const double mono =
      el::measure_verification_latency(el::VerifyMode::Monolithic, cost, 10000);
  const double sharded =
      el::measure_verification_latency(el::VerifyMode::Sharded, cost, 10000, 10);
  const double speedup = mono / sharded;
  report(6, speedup >= 7.0, "sharded verification speedup",
         "T=10000 c=1 o=30 S=10: " + std::to_string(speedup) + "x");
}

void criterion_7_convergence() {
  int converged = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const double t0 = now_seconds();
    el::SimConfig cfg;
    cfg.n_nodes = 20;
    cfg.difficulty = 8;
    cfg.seed = seed;
    cfg.run_length = {el::StopRule::Kind::Blocks, 30};
    const el::SimTrace trace = el::run_simulation(cfg);
    const double elapsed = now_seconds() - t0;
    worst = std::max(worst, elapsed);
    if (trace.summary.common_prefix >= 29 && elapsed < 5.0) ++converged;
  }
  report(7, converged == 100, "consensus convergence",
         std::to_string(converged) + "/100 runs with prefix >= 29, worst " +
             std::to_string(worst) + " s/run");
}

// ---- criterion 8: CLI determinism ----

std::string run_cli(const std::string& cli, const std::string& args) {
  const std::string cmd = cli + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  if (rc == -1 || !WIFEXITED(rc) || (WEXITSTATUS(rc) != 0 && WEXITSTATUS(rc) != 1))
    return "spawn failed: " + cmd;
  return "";
}

bool same_bytes(const fs::path& a, const fs::path& b) {
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  if (!fa || !fb) return false;
  std::stringstream sa, sb;
  sa << fa.rdbuf();
  sb << fb.rdbuf();
  return sa.str() == sb.str();
}

bool same_manifest_modulo_clock(const fs::path& a, const fs::path& b) {
  std::ifstream fa(a), fb(b);
  if (!fa || !fb) return false;
  auto ja = nlohmann::json::parse(fa);
  auto jb = nlohmann::json::parse(fb);
  ja.erase("wall_clock_seconds");
  jb.erase("wall_clock_seconds");
  return ja == jb;
}

void criterion_8_determinism(const std::string& cli) {
  const fs::path root =
      fs::temp_directory_path() / ("engram_accept_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path config = root / "config.json";
  {
    std::ofstream out(config);
    out << R"({"n_nodes": 10, "difficulty": 6, "run_length": {"blocks": 8},)"
        << R"( "shard_bench": {"trials": 2000},)"
        << R"( "memory": {"runs": 20, "probes": 1000},)"
        << R"( "drill": {"rounds": 30, "holdout_drills": 15}})";
  }
  const std::string base = " --config " + config.string() + " --seed 77 --out ";

  struct Sub {
    const char* name;
    std::vector<const char*> files;
  };
  const std::vector<Sub> subs = {
      {"simulate", {"trace.csv", "summary.json", "chain.bin"}},
      {"shard-bench", {"detection.csv", "latency.csv"}},
      {"drill", {"discriminator.json", "drills.csv"}},
      {"memory", {"h1_order.csv", "h2_probe.csv", "h3_integrity.csv", "summary.json"}},
  };
  std::string failure;
  for (const auto& sub : subs) {
    for (const char* run : {"x", "y"}) {
      const std::string err = run_cli(
          cli,
          std::string(sub.name) + base + (root / (sub.name + std::string(run))).string());
      if (!err.empty()) failure = err;
    }
    for (const char* file : sub.files) {
      const fs::path x = root / (sub.name + std::string("x")) / file;
      const fs::path y = root / (sub.name + std::string("y")) / file;
      if (!same_bytes(x, y))
        failure = std::string(sub.name) + "/" + file + " differs between runs";
    }
    if (!same_manifest_modulo_clock(
            root / (sub.name + std::string("x")) / "manifest.json",
            root / (sub.name + std::string("y")) / "manifest.json"))
      failure = std::string(sub.name) + "/manifest.json differs beyond wall clock";
  }
  // verify: identical verdict text across reruns
  const fs::path chain = root / "simulatex" / "chain.bin";
  for (const char* run : {"vx", "vy"}) {
    const std::string cmd = cli + " verify --config " + config.string() + " " +
                            chain.string() + " > " + (root / run).string() + " 2>&1";
    if (std::system(cmd.c_str()) != 0) failure = "verify run failed";
  }
  if (!same_bytes(root / "vx", root / "vy")) failure = "verify output differs";
  report(8, failure.empty(), "byte-identical reruns of every subcommand",
         failure.empty() ? "simulate, shard-bench, drill, memory, verify" : failure);
  fs::remove_all(root);
}

void criterion_9_pattern_separation() {
  el::SeparatorParams params;  // D=1024, N=2048, k=40
  params.seed = 0x9a;
  el::SparseSeparator sep(params);
  el::Rng rng(0x9b);

  auto normalize = [](std::vector<double>& v) {
    double n = 0.0;
    for (double a : v) n += a * a;
    n = std::sqrt(n);
    for (double& a : v) a /= n;
  };

  bool pass = true;
  std::string detail;
  for (double s : {0.5, 0.6, 0.7, 0.8, 0.9, 0.95}) {
    double jaccard = 0.0;
    for (int pair = 0; pair < 1000; ++pair) {
      std::vector<double> x(params.input_dim), z(params.input_dim);
      for (std::size_t i = 0; i < params.input_dim; ++i) {
        x[i] = rng.gaussian();
        z[i] = rng.gaussian();
      }
      normalize(x);
      double dot = 0.0;
      for (std::size_t i = 0; i < params.input_dim; ++i) dot += z[i] * x[i];
      for (std::size_t i = 0; i < params.input_dim; ++i) z[i] -= dot * x[i];
      normalize(z);
      std::vector<double> y(params.input_dim);
      for (std::size_t i = 0; i < params.input_dim; ++i)
        y[i] = s * x[i] + std::sqrt(1.0 - s * s) * z[i];
      jaccard += el::code_overlap(sep.encode(x), sep.encode(y)).jaccard;
    }
    const double mean = jaccard / 1000.0;
    if (mean >= s - 0.05) pass = false;
    detail += "s=" + std::to_string(s).substr(0, 4) + ":" +
              std::to_string(mean).substr(0, 6) + " ";
  }

  double shared = 0.0;
  for (int pair = 0; pair < 1000; ++pair) {
    std::vector<double> x(params.input_dim), y(params.input_dim);
    for (std::size_t i = 0; i < params.input_dim; ++i) {
      x[i] = rng.gaussian();
      y[i] = rng.gaussian();
    }
    shared += el::code_overlap(sep.encode(x), sep.encode(y)).shared;
  }
  const double mean_shared = shared / 1000.0;
  const double expected = 40.0 * 40.0 / 2048.0;
  if (std::abs(mean_shared - expected) > 0.1 * expected) pass = false;
  detail += "rand:" + std::to_string(mean_shared).substr(0, 6) + " vs " +
            std::to_string(expected).substr(0, 7);
  report(9, pass, "pattern separation", detail);
}

void criterion_10_temporal_linking() {
  const el::EngramParams params;
  const el::TemporalLinkingResult r = el::run_temporal_linking(params, 0xaa, 2000, 10);
  report(10, r.pass, "engram temporal linking",
         "slope " + std::to_string(r.slope.slope) + " CI [" +
             std::to_string(r.slope.lo) + ", " + std::to_string(r.slope.hi) +
             "] over " + std::to_string(r.lags.size()) + " pairs");
}

void criterion_11_discriminator() {
  const el::DrillParams params;
  const auto factory = el::default_drill_factory(params);
  const el::Discriminator a = el::fire_drill_train(factory, 60, 0xb1, params);
  const el::Discriminator b = el::fire_drill_train(factory, 60, 0xb1, params);
  const bool deterministic =
      a.weights == b.weights && a.bias == b.bias && a.threshold == b.threshold;

  el::Rng rng(0xb2);
  std::vector<el::DrillSample> holdout;
  for (int d = 0; d < 50; ++d) {
    const double intensity = rng.uniform(params.intensity_lo, params.intensity_hi);
    const auto s = el::run_drill(params, intensity, rng.next_u64());
    holdout.insert(holdout.end(), s.begin(), s.end());
  }
  const double accuracy = el::balanced_accuracy(a, holdout);
  report(11, deterministic && accuracy >= 0.90, "fire-drill discriminator",
         "holdout balanced accuracy " + std::to_string(accuracy) +
             (deterministic ? ", training deterministic" : ", NONDETERMINISTIC"));
}

void criterion_12_fast_commit() {
  el::SimConfig cfg;
  cfg.n_accounts = 5;
  cfg.initial_balance = 200;
  const el::AccountState initial = el::genesis_state(el::make_genesis(cfg));
  int matched = 0;
  for (std::uint64_t run = 0; run < 100; ++run) {
    el::Rng rng(el::splitmix64(run ^ 0xc2));
    el::FastCommitLedger ledger(initial, 50, 4);
    std::vector<el::Transaction> all;
    std::map<std::uint64_t, std::uint64_t> nonces;
    for (int round = 0; round < 50; ++round) {
      for (std::uint64_t i = 0; i < rng.below(4); ++i) {
        el::Transaction t;
        t.sender_id = 1 + rng.below(5);
        t.recipient_id = 1 + rng.below(5);
        t.amount = 1 + rng.below(150);
        t.nonce = rng.below(8) == 0 ? 0 : nonces[t.sender_id];
        if (t.nonce == nonces[t.sender_id]) nonces[t.sender_id] += 1;
        t.timestamp = round;
        ledger.submit(t);
        all.push_back(t);
      }
      ledger.advance_round();
    }
    ledger.drain();
    if (ledger.confirmed_state() == el::full_consensus_state(initial, all) &&
        ledger.provisional_state() == ledger.confirmed_state())
      ++matched;
  }
  report(12, matched == 100, "trust-but-verify reconciliation",
         std::to_string(matched) + "/100 runs equal the full-consensus oracle");
}

void criterion_13_hypotheses() {
  el::MemoryConfig cfg;  // defaults: 6 episodes, 3x64 elements, N=2048, k=40
  cfg.runs = 100;
  cfg.probes = 1000;
  const el::H1Result h1 = el::run_h1(cfg, 0xd1);
  const el::H2Result h2 = el::run_h2(cfg, 0xd2);
  const el::H3Result h3 = el::run_h3(cfg, 0xd3);
  const bool pass = h1.pass && h2.pass && h3.pass;
  report(13, pass, "hypothesis experiments",
         "H1 " + std::to_string(h1.linked_unknown) + "/100 unknown+" +
             std::to_string(h1.array_before) + "/100 before; H2 acc " +
             std::to_string(h2.accuracy) + " p " + std::to_string(h2.p_value) +
             "; H3 " + std::to_string(h3.protected_violations) + "/" +
             std::to_string(h3.trials) + " violations");
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: acceptance <path-to-engram-ledger-cli>\n");
    return 64;
  }
  criterion_1_tamper_detection();
  criterion_2_sha_vectors();
  criterion_3_avalanche();
  criterion_4_temporal_window();
  criterion_5_uniform_random();
  criterion_6_speedup();
  criterion_7_convergence();
  criterion_8_determinism(argv[1]);
  criterion_9_pattern_separation();
  criterion_10_temporal_linking();
  criterion_11_discriminator();
  criterion_12_fast_commit();
  criterion_13_hypotheses();
  if (g_failures == 0)
    std::printf("all 13 acceptance criteria passed\n");
  else
    std::printf("%d acceptance criteria FAILED\n", g_failures);
  return g_failures;
}
