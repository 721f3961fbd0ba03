#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "engram_ledger/experiments.hpp"
#include "engram_ledger/mnemochain.hpp"

using namespace engram_ledger;

namespace {

MemoryConfig small_memory_config() {
  MemoryConfig cfg;
  cfg.element_dim = 16;
  cfg.elements_per_episode = 3;
  cfg.sparse_population = 512;
  cfg.sparse_active = 12;
  cfg.engram.n_neurons = 512;
  cfg.engram.engram_size = 12;
  return cfg;
}

Elements fixed_elements(double tag, std::uint32_t count = 3, std::uint32_t dim = 16) {
  Elements out(count);
  for (std::uint32_t e = 0; e < count; ++e) {
    out[e].resize(dim);
    for (std::uint32_t i = 0; i < dim; ++i)
      out[e][i] = tag + 0.1 * e + 0.001 * i;  // distinct across nearby tags
  }
  return out;
}

}  // namespace

TEST_CASE("[mnemochain] engram recruitment basics") {
  EngramParams p;
  p.n_neurons = 256;
  p.engram_size = 16;

  SECTION("recruits exactly m valid distinct neurons") {
    EngramPool pool(p, 1);
    const Engram e = pool.recruit(1);
    CHECK(e.neurons.size() == 16);
    CHECK(std::adjacent_find(e.neurons.begin(), e.neurons.end()) == e.neurons.end());
    for (auto n : e.neurons) CHECK(n < 256);
  }
  SECTION("pool too small") {
    EngramParams tiny = p;
    tiny.n_neurons = 8;
    tiny.engram_size = 16;
    CHECK_THROWS_AS(EngramPool(tiny, 1).recruit(1), PoolTooSmall);
  }
  SECTION("huge boost makes same-instant engrams identical") {
    EngramParams big = p;
    big.boost = 1e12;
    EngramPool pool(big, 3);
    const Engram first = pool.recruit(5);
    const Engram second = pool.recruit(5);
    CHECK(engram_overlap(first, second) == big.engram_size);
    CHECK(first.neurons == second.neurons);
  }
}

TEST_CASE("[mnemochain] zero boost gives hypergeometric overlap") {
  EngramParams p;
  p.n_neurons = 2048;
  p.engram_size = 40;
  p.boost = 0.0;
  p.young_multiplier = 1.0;
  double total = 0.0;
  const int pairs = 1500;
  for (int t = 0; t < pairs; ++t) {
    EngramPool pool(p, splitmix64(t));
    const Engram a = pool.recruit(1);
    const Engram b = pool.recruit(2);
    total += engram_overlap(a, b);
  }
  const double mean = total / pairs;
  const double expected = 40.0 * 40.0 / 2048.0;  // 0.78125
  CHECK(mean == Catch::Approx(expected).margin(0.08));
}

TEST_CASE("[mnemochain] overlap decays with temporal lag") {
  EngramParams p;  // defaults: boost 5, tau 10
  const TemporalLinkingResult r = run_temporal_linking(p, 404, 2000, 10);
  REQUIRE(r.mean_overlap_by_lag.size() == 10);
  CHECK(r.mean_overlap_by_lag.front() > r.mean_overlap_by_lag.back());
  CHECK(r.slope.slope < 0.0);
  CHECK(r.slope.hi < 0.0);  // bootstrap CI excludes zero
  CHECK(r.pass);
  // early lags overlap clearly more than late lags; per-lag means at the
  // tail are near the 0.78 baseline and individually noisy
  const double early = (r.mean_overlap_by_lag[0] + r.mean_overlap_by_lag[1] +
                        r.mean_overlap_by_lag[2]) /
                       3.0;
  const double late = (r.mean_overlap_by_lag[7] + r.mean_overlap_by_lag[8] +
                       r.mean_overlap_by_lag[9]) /
                      3.0;
  CHECK(early > late + 0.5);
}

TEST_CASE("[mnemochain] neurogenesis favors young neurons") {
  EngramParams p;
  p.n_neurons = 512;
  p.engram_size = 16;
  p.young_multiplier = 8.0;
  p.tau_young = 10.0;
  EngramPool pool(p, 9);
  pool.add_neurons(64, 100);  // newborn cohort at t=100
  int young_hits = 0;
  const Engram e = pool.recruit(101);
  for (auto n : e.neurons)
    if (n >= 512) ++young_hits;
  // young cohort is 11% of the pool but carries 50% of the weight, so it
  // lands far above its population share of ~1.8 expected picks
  CHECK(young_hits >= 4);
}

TEST_CASE("[mnemochain] episode digests chain over content and history") {
  MemoryConfig cfg = small_memory_config();
  EngramPool pool(cfg.engram, 1);

  SECTION("identical elements, different predecessors, different digests") {
    EpisodicChain chain_a(cfg.separator(1));
    EpisodicChain chain_b(cfg.separator(1));
    EngramPool pool_b(cfg.engram, 2);
    chain_a.encode(pool, fixed_elements(1.0), 1);
    chain_b.encode(pool_b, fixed_elements(2.0), 1);  // different ancestor
    const auto id_a = chain_a.encode(pool, fixed_elements(5.0), 2);
    const auto id_b = chain_b.encode(pool_b, fixed_elements(5.0), 2);
    CHECK(chain_a.episode(id_a).elements == chain_b.episode(id_b).elements);
    CHECK(chain_a.episode(id_a).episode_digest != chain_b.episode(id_b).episode_digest);
  }
  SECTION("first episode anchors at the genesis digest") {
    EpisodicChain chain(cfg.separator(1));
    const auto id = chain.encode(pool, fixed_elements(1.0), 1);
    CHECK(chain.episode(id).prev_digest == EpisodicChain::anchor());
  }
  SECTION("six episodes traverse in order") {
    EpisodicChain chain(cfg.separator(1));
    for (int i = 0; i < 6; ++i) chain.encode(pool, fixed_elements(i), i + 1);
    CHECK(chain.size() == 6);
    const auto path = chain.preferred_path();
    REQUIRE(path.size() == 6);
    for (std::uint64_t i = 0; i < 6; ++i) CHECK(path[i] == i);
    for (std::uint64_t i = 0; i + 1 < 6; ++i)
      CHECK(chain.episode(path[i + 1]).prev_digest ==
            chain.episode(path[i]).episode_digest);
  }
  SECTION("empty episode rejected") {
    EpisodicChain chain(cfg.separator(1));
    CHECK_THROWS_AS(chain.encode(pool, {}, 1), EmptyEpisode);
  }
}

TEST_CASE("[mnemochain] holistic recall and integrity modes") {
  MemoryConfig cfg = small_memory_config();
  EngramPool pool(cfg.engram, 4);
  EpisodicChain chain(cfg.separator(4));
  const Elements content = fixed_elements(3.0);
  chain.encode(pool, fixed_elements(1.0), 1);
  const auto id = chain.encode(pool, content, 2);
  chain.encode(pool, fixed_elements(9.0), 3);

  SECTION("any element cues the whole episode") {
    for (const auto& cue : content) {
      const auto r = chain.recall_by_cue(cue, IntegrityMode::Protected);
      CHECK(r.status == RecallResult::Status::Ok);
      CHECK(r.episode_id == id);
      CHECK(r.elements == content);
    }
  }
  SECTION("unknown cue") {
    const auto r = chain.recall_by_cue({1.0, 2.0}, IntegrityMode::Protected);
    CHECK(r.status == RecallResult::Status::CueNotFound);
  }
  SECTION("attack on one element blocks protected recall entirely") {
    chain.attack_element(id, 2, 5, 3);
    const auto prot = chain.recall_by_cue(content[0], IntegrityMode::Protected);
    CHECK(prot.status == RecallResult::Status::IntegrityViolation);
    CHECK(prot.elements.empty());
    const auto unprot = chain.recall_by_cue(content[0], IntegrityMode::Unprotected);
    CHECK(unprot.status == RecallResult::Status::Ok);
    CHECK(unprot.elements[0] == content[0]);
    CHECK(unprot.elements[1] == content[1]);
    CHECK_FALSE(unprot.elements[2] == content[2]);  // the corrupted sibling
    // neighbors recall normally: digest scope is per-episode
    CHECK(chain.recall_by_cue(fixed_elements(1.0)[0], IntegrityMode::Protected)
              .status == RecallResult::Status::Ok);
    CHECK(chain.recall_by_cue(fixed_elements(9.0)[0], IntegrityMode::Protected)
              .status == RecallResult::Status::Ok);
  }
  SECTION("forward propagation extends the violation downstream") {
    EngramPool pool2(cfg.engram, 5);
    EpisodicChain strict(cfg.separator(5), true);
    strict.encode(pool2, fixed_elements(1.0), 1);
    const auto mid = strict.encode(pool2, content, 2);
    strict.encode(pool2, fixed_elements(9.0), 3);
    strict.attack_element(mid, 0, 0, 0);
    CHECK(strict.recall_by_cue(fixed_elements(9.0)[0], IntegrityMode::Protected)
              .status == RecallResult::Status::IntegrityViolation);
    CHECK(strict.recall_by_cue(fixed_elements(1.0)[0], IntegrityMode::Protected)
              .status == RecallResult::Status::Ok);
  }
  SECTION("attack bounds are checked") {
    CHECK_THROWS_AS(chain.attack_element(99, 0, 0, 0), UnknownEpisode);
    CHECK_THROWS_AS(chain.attack_element(id, 7, 0, 0), BadIndex);
    CHECK_THROWS_AS(chain.attack_element(id, 0, 16 * 8, 0), BadIndex);
  }
}

TEST_CASE("[mnemochain] every single-bit attack defeats protected recall") {
  MemoryConfig cfg = small_memory_config();
  Rng rng(777);
  for (int trial = 0; trial < 300; ++trial) {
    EngramPool pool(cfg.engram, trial);
    EpisodicChain chain(cfg.separator(trial));
    std::vector<Elements> originals;
    for (int i = 0; i < 3; ++i) {
      originals.push_back(fixed_elements(10.0 * trial + i));
      chain.encode(pool, originals.back(), i + 1);
    }
    const std::uint64_t victim = rng.below(3);
    const std::uint32_t element = static_cast<std::uint32_t>(rng.below(3));
    const std::size_t byte = rng.below(16 * sizeof(double));
    const std::uint8_t bit = static_cast<std::uint8_t>(rng.below(8));
    chain.attack_element(victim, element, byte, bit);
    const auto cue = originals[victim][(element + 1) % 3];
    CHECK(chain.recall_by_cue(cue, IntegrityMode::Protected).status ==
          RecallResult::Status::IntegrityViolation);
  }
}

TEST_CASE("[mnemochain] disruption and order queries") {
  MemoryConfig cfg = small_memory_config();
  EngramPool pool(cfg.engram, 6);
  EpisodicChain chain(cfg.separator(6));
  for (int i = 0; i < 6; ++i) chain.encode(pool, fixed_elements(i), i + 1);

  SECTION("empty disruption leaves both modes agreeing") {
    for (std::uint64_t a = 0; a < 6; ++a)
      for (std::uint64_t b = 0; b < 6; ++b)
        CHECK(chain.order(a, b, OrderMode::LinkedList) ==
              chain.order(a, b, OrderMode::Array));
  }
  SECTION("disrupting A and D hides B vs E in linked-list mode") {
    chain.disrupt({0, 3});
    CHECK(chain.order(1, 4, OrderMode::LinkedList) == Order::Unknown);
    CHECK(chain.order(1, 4, OrderMode::Array) == Order::Before);
    CHECK(chain.order(4, 1, OrderMode::Array) == Order::After);
  }
  SECTION("unknown targets throw") {
    CHECK_THROWS_AS(chain.disrupt({99}), UnknownEpisode);
    CHECK_THROWS_AS(chain.order(0, 99, OrderMode::Array), UnknownEpisode);
  }
}

TEST_CASE("[mnemochain] false memory forks preserve the original") {
  MemoryConfig cfg = small_memory_config();
  EngramPool pool(cfg.engram, 8);
  EpisodicChain chain(cfg.separator(8));
  const Elements a = fixed_elements(1.0);
  const Elements b = fixed_elements(2.0);
  const Elements c = fixed_elements(3.0);
  chain.encode(pool, a, 1);
  const auto b_id = chain.encode(pool, b, 2);
  const auto c_id = chain.encode(pool, c, 3);

  const Elements b_false = fixed_elements(7.0);
  const auto fork = chain.induce_false_memory(pool, b_id, b_false, 4);

  SECTION("recall from A's successor lands on the false branch") {
    const auto succ = chain.successor_on_preferred(0);
    REQUIRE(succ.has_value());
    CHECK(*succ == fork.b_prime);
    const auto r = chain.recall_by_cue(b_false[0], IntegrityMode::Protected);
    CHECK(r.episode_id == fork.b_prime);
  }
  SECTION("original branch is byte-identical and still reachable") {
    CHECK(chain.episode(b_id).elements == b);
    CHECK(chain.episode_intact(b_id));
    const auto r = chain.recall_by_cue(b[0], IntegrityMode::Protected);
    CHECK(r.status == RecallResult::Status::Ok);
    CHECK(r.episode_id == b_id);
  }
  SECTION("both branches stay hash-valid") {
    REQUIRE(fork.c_prime.has_value());
    for (std::uint64_t id = 0; id < chain.size(); ++id) CHECK(chain.episode_intact(id));
    CHECK(chain.episode(*fork.c_prime).elements == c);
    CHECK(chain.episode(*fork.c_prime).prev_digest ==
          chain.episode(fork.b_prime).episode_digest);
    CHECK(chain.episode(c_id).prev_digest == chain.episode(b_id).episode_digest);
  }
  SECTION("forking at the tip creates no relinked successor") {
    const auto tip_fork =
        chain.induce_false_memory(pool, *fork.c_prime, fixed_elements(8.0), 5);
    CHECK_FALSE(tip_fork.c_prime.has_value());
    CHECK(chain.episode(tip_fork.b_prime).prev_digest ==
          chain.episode(fork.b_prime).episode_digest);
  }
}

TEST_CASE("[mnemochain] probe accuracy matches the retention model") {
  MemoryConfig cfg = small_memory_config();
  EngramPool pool(cfg.engram, 10);
  EpisodicChain chain(cfg.separator(10));
  chain.encode(pool, fixed_elements(1.0), 1);
  const auto b_id = chain.encode(pool, fixed_elements(2.0), 2);
  chain.encode(pool, fixed_elements(3.0), 3);
  chain.induce_false_memory(pool, b_id, fixed_elements(4.0), 4);

  Rng rng(2718);
  const int probes = 4000;
  int correct = 0;
  for (int i = 0; i < probes; ++i)
    if (chain.probe_original(b_id, rng, 0.75, 4)) ++correct;
  const double accuracy = static_cast<double>(correct) / probes;
  CHECK(accuracy == Catch::Approx(0.8125).margin(0.02));
}

TEST_CASE("[mnemochain] hypothesis experiment runners") {
  MemoryConfig cfg = small_memory_config();
  cfg.runs = 30;
  cfg.probes = 1500;

  const H1Result h1 = run_h1(cfg, 1);
  CHECK(h1.pass);
  CHECK(h1.linked_unknown == 30);
  CHECK(h1.array_before == 30);
  CHECK(h1.rows.size() == 60);

  const H2Result h2 = run_h2(cfg, 2);
  CHECK(h2.pass);
  CHECK(h2.p_value < 0.01);
  CHECK(h2.accuracy == Catch::Approx(0.8125).margin(0.03));
  CHECK(h2.recall_prefers_false);
  CHECK(h2.original_intact);

  const H3Result h3 = run_h3(cfg, 3);
  CHECK(h3.pass);
  CHECK(h3.protected_violations == 30);
  CHECK(h3.unprotected_sibling_intact == 30);
}

TEST_CASE("[mnemochain] binomial tail oracle sanity") {
  // P(X >= 3 | n=10, p=0.5) = 0.9453125 exactly
  CHECK(binomial_upper_tail(10, 3, 0.5) == Catch::Approx(0.9453125));
  // P(X >= 8 | n=10, p=0.25) is tiny
  CHECK(binomial_upper_tail(10, 8, 0.25) < 5e-4);
  CHECK(binomial_upper_tail(10, 0, 0.25) == 1.0);
  CHECK(binomial_upper_tail(10, 11, 0.25) == 0.0);
}
