#pragma once

// The append-only hash-linked chain and its account-balance state machine.
//
// Canonical encodings are bit-exact and big-endian throughout:
//   header  = index(8) || prev_digest(32) || payload_digest(32) ||
//             timestamp(8) || puzzle_nonce(8)                     -- 88 bytes
//   txn     = sender(8) || recipient(8) || amount(8) || nonce(8) ||
//             timestamp(8)                                        -- 40 bytes
//   block   = header || txn_count(4) || txns
//   chain   = concatenated blocks, genesis first

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "engram_ledger/bytes.hpp"
#include "engram_ledger/digest.hpp"
#include "engram_ledger/errors.hpp"
#include "engram_ledger/sim_config.hpp"

namespace engram_ledger {

struct Transaction {
  std::uint64_t sender_id = 0;
  std::uint64_t recipient_id = 0;
  std::uint64_t amount = 0;
  std::uint64_t nonce = 0;
  std::uint64_t timestamp = 0;

  auto operator<=>(const Transaction&) const = default;

  void encode(ByteWriter& w) const {
    w.u64_be(sender_id);
    w.u64_be(recipient_id);
    w.u64_be(amount);
    w.u64_be(nonce);
    w.u64_be(timestamp);
  }

  static Transaction decode(ByteReader& r) {
    Transaction t;
    t.sender_id = r.u64_be();
    t.recipient_id = r.u64_be();
    t.amount = r.u64_be();
    t.nonce = r.u64_be();
    t.timestamp = r.u64_be();
    return t;
  }

  // Genesis allocations are self-transfers at nonce 0.
  bool is_mint() const { return sender_id == recipient_id && nonce == 0; }
};

inline Bytes encode_transactions(const std::vector<Transaction>& txns) {
  ByteWriter w;
  for (const auto& t : txns) t.encode(w);
  return w.take();
}

inline Digest payload_digest_of(const std::vector<Transaction>& txns) {
  return hash_bytes(encode_transactions(txns));
}

struct Block {
  std::uint64_t index = 0;
  Digest prev_digest;
  Digest payload_digest;
  std::uint64_t timestamp = 0;
  std::uint64_t puzzle_nonce = 0;
  std::vector<Transaction> transactions;

  bool operator==(const Block&) const = default;

  Bytes header_bytes() const {
    ByteWriter w;
    w.u64_be(index);
    w.raw(std::span<const std::uint8_t>(prev_digest.bytes));
    w.raw(std::span<const std::uint8_t>(payload_digest.bytes));
    w.u64_be(timestamp);
    w.u64_be(puzzle_nonce);
    return w.take();
  }

  Digest digest() const { return block_digest(header_bytes()); }

  void encode(ByteWriter& w) const {
    w.raw(std::span<const std::uint8_t>(header_bytes()));
    w.u32_be(static_cast<std::uint32_t>(transactions.size()));
    for (const auto& t : transactions) t.encode(w);
  }

  static Block decode(ByteReader& r) {
    Block b;
    b.index = r.u64_be();
    std::copy_n(r.take(32).begin(), 32, b.prev_digest.bytes.begin());
    std::copy_n(r.take(32).begin(), 32, b.payload_digest.bytes.begin());
    b.timestamp = r.u64_be();
    b.puzzle_nonce = r.u64_be();
    const std::uint32_t count = r.u32_be();
    if (static_cast<std::size_t>(count) * 40 > r.remaining())
      throw ParseError("transaction count exceeds stream");
    b.transactions.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i)
      b.transactions.push_back(Transaction::decode(r));
    return b;
  }
};

enum class TxnCheck { Ok, InsufficientFunds, NonceConflict };

// Balance and per-sender nonce bookkeeping. Nonces must be strictly
// increasing per sender; gaps are allowed.
struct AccountState {
  std::map<std::uint64_t, std::uint64_t> balances;
  std::map<std::uint64_t, std::uint64_t> next_nonce;

  bool operator==(const AccountState&) const = default;

  std::uint64_t balance(std::uint64_t account) const {
    auto it = balances.find(account);
    return it == balances.end() ? 0 : it->second;
  }

  std::uint64_t min_nonce(std::uint64_t account) const {
    auto it = next_nonce.find(account);
    return it == next_nonce.end() ? 0 : it->second;
  }

  TxnCheck check(const Transaction& t) const {
    if (t.nonce < min_nonce(t.sender_id)) return TxnCheck::NonceConflict;
    if (balance(t.sender_id) < t.amount) return TxnCheck::InsufficientFunds;
    return TxnCheck::Ok;
  }

  TxnCheck apply(const Transaction& t) {
    const TxnCheck c = check(t);
    if (c != TxnCheck::Ok) return c;
    balances[t.sender_id] -= t.amount;
    balances[t.recipient_id] += t.amount;
    next_nonce[t.sender_id] = t.nonce + 1;
    return TxnCheck::Ok;
  }

  void apply_mint(const Transaction& t) { balances[t.recipient_id] += t.amount; }
};

struct Chain {
  std::vector<Block> blocks;
  std::uint32_t difficulty = 0;

  bool operator==(const Chain&) const = default;

  std::uint64_t height() const { return blocks.empty() ? 0 : blocks.back().index; }
  const Block& tip() const { return blocks.back(); }

  Bytes encode() const {
    ByteWriter w;
    for (const auto& b : blocks) b.encode(w);
    return w.take();
  }

  static Chain decode(std::span<const std::uint8_t> data, std::uint32_t difficulty) {
    Chain c;
    c.difficulty = difficulty;
    ByteReader r(data);
    while (!r.done()) c.blocks.push_back(Block::decode(r));
    if (c.blocks.empty()) throw ParseError("empty chain stream");
    return c;
  }
};

/// Deterministic genesis: height 0, zero prev digest, puzzle exempt, one
/// mint per configured account. Depends only on the account allocation, so
/// differing seeds still produce byte-identical genesis blocks.
inline Block make_genesis(const SimConfig& config) {
  Block g;
  g.index = 0;
  g.timestamp = 0;
  g.puzzle_nonce = 0;
  for (std::uint32_t a = 1; a <= config.n_accounts; ++a) {
    Transaction t;
    t.sender_id = a;
    t.recipient_id = a;
    t.amount = config.initial_balance;
    t.nonce = 0;
    t.timestamp = 0;
    g.transactions.push_back(t);
  }
  g.payload_digest = payload_digest_of(g.transactions);
  return g;
}

inline Chain make_genesis_chain(const SimConfig& config) {
  Chain c;
  c.difficulty = config.difficulty;
  c.blocks.push_back(make_genesis(config));
  return c;
}

inline AccountState genesis_state(const Block& genesis) {
  AccountState s;
  for (const auto& t : genesis.transactions) s.apply_mint(t);
  return s;
}

struct BlockVerdict {
  enum class Kind {
    Valid,
    BadLink,
    BadPuzzle,
    BadPayloadDigest,
    InsufficientFunds,
    NonceConflict,
    BadGenesis,
  };
  Kind kind = Kind::Valid;
  std::size_t tx_index = 0;  // set for the two per-transaction reasons

  bool valid() const { return kind == Kind::Valid; }

  std::string to_string() const {
    switch (kind) {
      case Kind::Valid: return "Valid";
      case Kind::BadLink: return "BadLink";
      case Kind::BadPuzzle: return "BadPuzzle";
      case Kind::BadPayloadDigest: return "BadPayloadDigest";
      case Kind::InsufficientFunds:
        return "InsufficientFunds(tx " + std::to_string(tx_index) + ")";
      case Kind::NonceConflict:
        return "NonceConflict(tx " + std::to_string(tx_index) + ")";
      case Kind::BadGenesis: return "BadGenesis";
    }
    return "?";
  }
};

/// Full candidate check against the current tip and account state:
/// linkage, puzzle, payload digest, then every transaction in order.
/// Never throws; the verdict carries the first rejection reason.
inline BlockVerdict validate_block(const Chain& chain, const Block& candidate,
                                   const AccountState& state) {
  using K = BlockVerdict::Kind;
  const Block& tip = chain.tip();
  if (candidate.index != tip.index + 1 || !(candidate.prev_digest == tip.digest()))
    return {K::BadLink};
  if (candidate.digest().leading_zero_bits() < static_cast<int>(chain.difficulty))
    return {K::BadPuzzle};
  if (!(candidate.payload_digest == payload_digest_of(candidate.transactions)))
    return {K::BadPayloadDigest};
  AccountState scratch = state;
  for (std::size_t i = 0; i < candidate.transactions.size(); ++i) {
    switch (scratch.apply(candidate.transactions[i])) {
      case TxnCheck::Ok: break;
      case TxnCheck::InsufficientFunds: return {K::InsufficientFunds, i};
      case TxnCheck::NonceConflict: return {K::NonceConflict, i};
    }
  }
  return {K::Valid};
}

/// Appends after re-validating; throws RejectedInvalid when the
/// precondition does not hold. Prior blocks are never touched.
inline void append_block(Chain& chain, const Block& block, AccountState& state) {
  const BlockVerdict v = validate_block(chain, block, state);
  if (!v.valid()) throw RejectedInvalid("append rejected: " + v.to_string());
  for (const auto& t : block.transactions) state.apply(t);
  chain.blocks.push_back(block);
}

struct ChainVerdict {
  bool valid = true;
  std::uint64_t height = 0;
  BlockVerdict reason;

  std::string to_string() const {
    if (valid) return "Valid";
    return "CorruptAt(" + std::to_string(height) + ", " + reason.to_string() + ")";
  }
};

/// Re-derives everything from genesis: linkage, payload digests, puzzle,
/// and the full state replay. Reports the first failing height.
inline ChainVerdict verify_chain(const Chain& chain) {
  using K = BlockVerdict::Kind;
  if (chain.blocks.empty()) return {false, 0, {K::BadGenesis}};
  const Block& g = chain.blocks[0];
  if (g.index != 0 || !g.prev_digest.is_zero()) return {false, 0, {K::BadGenesis}};
  if (!(g.payload_digest == payload_digest_of(g.transactions)))
    return {false, 0, {K::BadPayloadDigest}};
  for (std::size_t i = 0; i < g.transactions.size(); ++i)
    if (!g.transactions[i].is_mint()) return {false, 0, {K::BadGenesis, i}};

  AccountState state = genesis_state(g);
  Chain prefix;
  prefix.difficulty = chain.difficulty;
  prefix.blocks.push_back(g);
  for (std::size_t h = 1; h < chain.blocks.size(); ++h) {
    const BlockVerdict v = validate_block(prefix, chain.blocks[h], state);
    if (!v.valid()) return {false, h, v};
    for (const auto& t : chain.blocks[h].transactions) state.apply(t);
    prefix.blocks.push_back(chain.blocks[h]);
  }
  return {};
}

/// Replays a valid chain into its final account state.
inline AccountState replay_state(const Chain& chain) {
  AccountState state = genesis_state(chain.blocks[0]);
  for (std::size_t h = 1; h < chain.blocks.size(); ++h)
    for (const auto& t : chain.blocks[h].transactions) state.apply(t);
  return state;
}

enum class ForkChoice { KeepLocal, AdoptRemote, RemoteInvalid };

/// Longest valid chain wins; equal heights break toward the
/// lexicographically smaller tip digest. Symmetric by construction.
inline ForkChoice resolve_fork(const Chain& local, const Chain& remote) {
  if (!verify_chain(remote).valid) return ForkChoice::RemoteInvalid;
  if (remote.blocks.empty() || !(remote.blocks[0] == local.blocks[0]))
    return ForkChoice::RemoteInvalid;
  if (remote.blocks.size() != local.blocks.size())
    return remote.blocks.size() > local.blocks.size() ? ForkChoice::AdoptRemote
                                                      : ForkChoice::KeepLocal;
  const Digest lt = local.tip().digest();
  const Digest rt = remote.tip().digest();
  return rt < lt ? ForkChoice::AdoptRemote : ForkChoice::KeepLocal;
}

enum class OrderMode { LinkedList, Array };
enum class Order { Before, After, Unknown };

/// Relative order of two blocks. Array mode reads stored indices and
/// ignores disruptions. LinkedList mode only trusts link traversal from
/// genesis; a disrupted block severs traversal on both sides, so any pair
/// not fully inside the genesis-reachable prefix is Unknown.
inline Order relative_order(const Chain& chain, std::uint64_t height_a,
                            std::uint64_t height_b, OrderMode mode,
                            const std::set<std::uint64_t>& disrupted = {}) {
  const std::uint64_t n = chain.blocks.size();
  if (height_a >= n || height_b >= n) throw UnknownBlock("height out of range");
  if (height_a == height_b) return Order::Unknown;
  if (mode == OrderMode::Array)
    return height_a < height_b ? Order::Before : Order::After;
  std::uint64_t reachable = n;  // first severed height, if any
  for (std::uint64_t h : disrupted)
    if (h < reachable) reachable = h;
  if (height_a >= reachable || height_b >= reachable) return Order::Unknown;
  return height_a < height_b ? Order::Before : Order::After;
}

inline void save_chain_file(const Chain& chain, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  const Bytes data = chain.encode();
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("write failed: " + path);
}

inline Chain load_chain_file(const std::string& path, std::uint32_t difficulty) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return Chain::decode(data, difficulty);
}

}  // namespace engram_ledger
