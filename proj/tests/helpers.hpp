#pragma once

// Shared test fixtures: deterministic chain construction at low difficulty.

#include <cstdint>
#include <vector>

#include "engram_ledger/ledger.hpp"
#include "engram_ledger/rng.hpp"
#include "engram_ledger/sim_config.hpp"

namespace test_helpers {

using namespace engram_ledger;

inline Block mine_block(const Chain& chain, const AccountState& state,
                        std::vector<Transaction> txns, std::uint64_t timestamp,
                        Rng& rng) {
  Block b;
  b.index = chain.tip().index + 1;
  b.prev_digest = chain.tip().digest();
  b.timestamp = timestamp;
  b.transactions = std::move(txns);
  b.payload_digest = payload_digest_of(b.transactions);
  for (;;) {
    b.puzzle_nonce = rng.next_u64();
    if (b.digest().leading_zero_bits() >= static_cast<int>(chain.difficulty)) break;
  }
  (void)state;
  return b;
}

// n_blocks mined blocks of small random transfers on top of genesis
inline std::pair<Chain, AccountState> build_chain(std::uint32_t n_blocks,
                                                  std::uint64_t seed,
                                                  std::uint32_t difficulty = 4,
                                                  std::uint32_t n_accounts = 5,
                                                  std::uint64_t balance = 1000) {
  SimConfig cfg;
  cfg.n_accounts = n_accounts;
  cfg.initial_balance = balance;
  cfg.difficulty = difficulty;
  Chain chain = make_genesis_chain(cfg);
  AccountState state = genesis_state(chain.blocks[0]);
  Rng rng(seed);
  std::map<std::uint64_t, std::uint64_t> nonces;
  for (std::uint32_t h = 1; h <= n_blocks; ++h) {
    std::vector<Transaction> txns;
    const std::uint32_t count = 1 + static_cast<std::uint32_t>(rng.below(3));
    for (std::uint32_t i = 0; i < count; ++i) {
      Transaction t;
      t.sender_id = 1 + rng.below(n_accounts);
      t.recipient_id = 1 + rng.below(n_accounts);
      t.amount = 1 + rng.below(5);
      t.nonce = nonces[t.sender_id]++;
      t.timestamp = h;
      txns.push_back(t);
    }
    Block b = mine_block(chain, state, std::move(txns), h, rng);
    append_block(chain, b, state);
  }
  return {chain, state};
}

}  // namespace test_helpers
