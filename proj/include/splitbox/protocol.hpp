#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "splitbox/bitstring.hpp"
#include "splitbox/error.hpp"
#include "splitbox/hash.hpp"
#include "splitbox/nfmodel.hpp"
#include "splitbox/random.hpp"

namespace splitbox {

// 1-based position of the entry counter; indexes the blind table.
struct CounterIndex {
  std::uint32_t value = 1;
  friend bool operator==(CounterIndex, CounterIndex) = default;
  friend auto operator<=>(CounterIndex, CounterIndex) = default;
};

using MatchId = std::uint32_t;
using ActionId = std::uint32_t;
// 1..t; 0 is reserved on the wire for messages not tied to a processor.
using ProcessorId = std::uint8_t;

inline constexpr std::uint32_t kDefaultDeltaMin = 16;

struct ProtocolParams {
  std::uint32_t n = 104;
  std::uint32_t l = 1024;
  std::uint32_t t = 2;
  std::uint32_t q = kSha1DigestBits;
  std::uint32_t delta_min = kDefaultDeltaMin;
  // rho = rho_num / rho_den, probability that an emission slot carries a
  // real packet.
  std::uint32_t rho_num = 1;
  std::uint32_t rho_den = 1;

  double rho() const noexcept { return static_cast<double>(rho_num) / static_cast<double>(rho_den); }
  std::size_t header_bytes() const noexcept { return bytes_for_bits(n); }
  std::size_t digest_bytes() const noexcept { return q / 8; }

  void validate() const {
    if (n == 0) throw ConfigError("n must be positive");
    if (l == 0) throw ConfigError("l must be at least 1");
    if (t < 2 || t > 255) throw ConfigError("t must be in [2, 255]");
    if (rho_den == 0 || rho_num == 0 || rho_num > rho_den) throw ConfigError("rho must be in (0, 1]");
    MatchHasher{q};  // rejects unsupported widths
  }

  friend bool operator==(const ProtocolParams&, const ProtocolParams&) = default;
};

// Approximates a probability as a fraction with a fixed denominator.
inline void set_rho(ProtocolParams& p, double rho) {
  if (!(rho > 0.0 && rho <= 1.0)) throw ConfigError("rho must be in (0, 1]");
  constexpr std::uint32_t den = 1'000'000;
  p.rho_den = den;
  p.rho_num = std::max<std::uint32_t>(1, static_cast<std::uint32_t>(rho * den + 0.5));
}

struct SetupOptions {
  bool allow_weak_matches = false;
};

// ---------------------------------------------------------------------------
// Tables

// Table S: l uniform n-bit blinds.
class BlindTable {
 public:
  BlindTable() = default;
  BlindTable(std::uint32_t n, std::vector<BitString> blinds) : n_(n), blinds_(std::move(blinds)) {
    for (const auto& b : blinds_) {
      if (b.size() != n_) throw ContractViolation("blind length != n");
    }
  }

  std::uint32_t bits() const noexcept { return n_; }
  std::uint32_t size() const noexcept { return static_cast<std::uint32_t>(blinds_.size()); }

  const BitString& at(CounterIndex i) const {
    if (i.value < 1 || i.value > blinds_.size()) {
      throw ContractViolation("counter index " + std::to_string(i.value) + " outside [1, " +
                              std::to_string(blinds_.size()) + "]");
    }
    return blinds_[i.value - 1];
  }
  const std::vector<BitString>& blinds() const noexcept { return blinds_; }

  friend bool operator==(const BlindTable&, const BlindTable&) = default;

 private:
  std::uint32_t n_ = 0;
  std::vector<BitString> blinds_;
};

// Table S~: l x |M| digests, row-major by counter index.
class HashedMatchTable {
 public:
  HashedMatchTable() = default;
  HashedMatchTable(std::uint32_t l, std::uint32_t match_count, std::uint32_t digest_bits)
      : l_(l), matches_(match_count), digest_bits_(digest_bits),
        cells_(static_cast<std::size_t>(l) * match_count * (digest_bits / 8), 0) {}

  std::uint32_t rows() const noexcept { return l_; }
  std::uint32_t match_count() const noexcept { return matches_; }
  std::uint32_t digest_bits() const noexcept { return digest_bits_; }
  std::size_t digest_bytes() const noexcept { return digest_bits_ / 8; }

  std::span<const std::uint8_t> digest(CounterIndex i, MatchId j) const { return cell(i, j); }
  std::span<std::uint8_t> mutable_digest(CounterIndex i, MatchId j) {
    auto c = cell(i, j);
    return {const_cast<std::uint8_t*>(c.data()), c.size()};
  }

  std::span<const std::uint8_t> raw() const noexcept { return cells_; }
  std::span<std::uint8_t> mutable_raw() noexcept { return cells_; }

  friend bool operator==(const HashedMatchTable&, const HashedMatchTable&) = default;

 private:
  std::span<const std::uint8_t> cell(CounterIndex i, MatchId j) const {
    if (i.value < 1 || i.value > l_) throw ContractViolation("digest row out of range");
    if (j >= matches_) throw ContractViolation("match id out of range");
    const std::size_t off = ((static_cast<std::size_t>(i.value) - 1) * matches_ + j) * digest_bytes();
    return std::span<const std::uint8_t>(cells_).subspan(off, digest_bytes());
  }

  std::uint32_t l_ = 0;
  std::uint32_t matches_ = 0;
  std::uint32_t digest_bits_ = 0;
  std::vector<std::uint8_t> cells_;
};

struct LookupTables {
  BlindTable blinds;
  HashedMatchTable hashed;
};

inline void check_match_weights(const ProtocolParams& params, std::span<const TriStateString> matches,
                                const SetupOptions& opts) {
  if (opts.allow_weak_matches) return;
  for (std::size_t j = 0; j < matches.size(); ++j) {
    const std::size_t w = matches[j].fixed_count();
    if (w < params.delta_min) throw WeakMatchError(j, w, params.delta_min);
  }
}

// Samples l blinds and fills S~[i][j] = H(mu_j xor mask(pi_mu_j, s_i)),
// with mu_j's stars embedded as 0.
inline LookupTables setup_lookup_tables(const ProtocolParams& params, std::span<const TriStateString> matches,
                                        RandomSource& rng, const SetupOptions& opts = {}) {
  params.validate();
  if (matches.empty()) throw ContractViolation("setup_lookup_tables: no matches");
  for (const auto& mu : matches) {
    if (mu.size() != params.n) throw ContractViolation("match length != n");
  }
  check_match_weights(params, matches, opts);

  const MatchHasher hasher(params.q);
  std::vector<BitString> blinds;
  blinds.reserve(params.l);
  HashedMatchTable hashed(params.l, static_cast<std::uint32_t>(matches.size()), params.q);
  for (std::uint32_t i = 1; i <= params.l; ++i) {
    BitString s = rng.bits(params.n);
    for (MatchId j = 0; j < matches.size(); ++j) {
      const BitString blinded = matches[j].value() ^ mask(matches[j].care(), s);
      hasher.hash(blinded, hashed.mutable_digest(CounterIndex{i}, j));
    }
    blinds.push_back(std::move(s));
  }
  return {BlindTable(params.n, std::move(blinds)), std::move(hashed)};
}

// The only match information a processor receives.
inline BitString hide_match(const TriStateString& mu) { return projection(mu); }

// ---------------------------------------------------------------------------
// Action shares

struct ActionShares {
  ProcessorId processor = 1;
  ActionId action = 0;
  BitString alpha;  // alpha_j
  BitString beta;   // beta_j

  friend bool operator==(const ActionShares&, const ActionShares&) = default;
};

// t-out-of-t XOR sharing of (mask(pi_a, a), pi_a). Shares 1..t-1 are
// uniform; share t closes the sum.
inline std::vector<ActionShares> split_action(const TriStateString& alpha, std::uint32_t t, RandomSource& rng,
                                              ActionId id = 0) {
  if (t < 2) throw ContractViolation("split_action: t must be >= 2");
  const std::size_t n = alpha.size();
  std::vector<ActionShares> out(t);
  BitString alpha_sum = alpha.value();
  for (std::uint32_t j = 0; j + 1 < t; ++j) {
    out[j].alpha = rng.bits(n);
    alpha_sum ^= out[j].alpha;
  }
  BitString beta_sum = alpha.care();
  for (std::uint32_t j = 0; j + 1 < t; ++j) {
    out[j].beta = rng.bits(n);
    beta_sum ^= out[j].beta;
  }
  out[t - 1].alpha = std::move(alpha_sum);
  out[t - 1].beta = std::move(beta_sum);
  for (std::uint32_t j = 0; j < t; ++j) {
    out[j].processor = static_cast<ProcessorId>(j + 1);
    out[j].action = id;
  }
  return out;
}

struct CumulativeShares {
  BitString alpha;  // alpha'_j
  BitString beta;   // beta'_j

  static CumulativeShares zero(std::size_t n) { return {BitString(n), BitString(n)}; }
  friend bool operator==(const CumulativeShares&, const CumulativeShares&) = default;
};

inline CumulativeShares compute_action(CumulativeShares cum, const ActionShares& share) {
  cum.alpha ^= share.alpha;
  cum.beta ^= share.beta;
  return cum;
}

// ---------------------------------------------------------------------------
// Private tree and role configurations

struct PrivateBranch {
  MatchId match = 0;
  NodeId on_miss = 0;
  NodeId on_match = 0;
  friend bool operator==(const PrivateBranch&, const PrivateBranch&) = default;
};

struct PrivateNode {
  ActionId action = 0;
  std::optional<PrivateBranch> branch;
  friend bool operator==(const PrivateNode&, const PrivateNode&) = default;
};

// Same shape as the policy tree; matches and actions replaced by ids.
struct PrivatePolicyTree {
  std::vector<PrivateNode> nodes;  // node 0 is the root
  friend bool operator==(const PrivatePolicyTree&, const PrivatePolicyTree&) = default;
};

struct EntryConfig {
  ProtocolParams params;
  BlindTable blinds;
  friend bool operator==(const EntryConfig&, const EntryConfig&) = default;
};

struct ProcessorConfig {
  ProtocolParams params;
  ProcessorId id = 1;
  PrivatePolicyTree tree;
  HashedMatchTable table;
  std::vector<BitString> projections;  // indexed by MatchId
  std::vector<ActionShares> shares;    // indexed by ActionId, this processor's only
  friend bool operator==(const ProcessorConfig&, const ProcessorConfig&) = default;
};

struct ClientConfig {
  ProtocolParams params;
  BlindTable blinds;
  std::uint32_t match_count = 0;
  std::uint32_t action_count = 0;
  std::optional<std::uint64_t> seed;  // recorded when setup used a seeded source
  friend bool operator==(const ClientConfig&, const ClientConfig&) = default;
};

struct SetupBundle {
  EntryConfig entry;
  std::vector<ProcessorConfig> processors;
  ClientConfig client;
};

// Distinct matches and actions of a tree, numbered by first appearance in
// node-id order. The identity action gets an id like any other action.
struct PolicyCatalog {
  std::vector<TriStateString> matches;
  std::vector<TriStateString> actions;
  std::vector<ActionId> node_action;            // per node
  std::vector<std::optional<MatchId>> node_match;  // per node

  static PolicyCatalog of(const PolicyTree& psi) {
    PolicyCatalog c;
    std::map<TriStateString, MatchId> match_ids;
    std::map<TriStateString, ActionId> action_ids;
    for (NodeId id = 0; id < psi.size(); ++id) {
      const auto& nd = psi.node(id);
      auto [ait, anew] = action_ids.emplace(nd.action, static_cast<ActionId>(c.actions.size()));
      if (anew) c.actions.push_back(nd.action);
      c.node_action.push_back(ait->second);
      if (nd.branch) {
        auto [mit, mnew] = match_ids.emplace(nd.branch->match, static_cast<MatchId>(c.matches.size()));
        if (mnew) c.matches.push_back(nd.branch->match);
        c.node_match.push_back(mit->second);
      } else {
        c.node_match.push_back(std::nullopt);
      }
    }
    return c;
  }
};

inline std::string describe(const std::vector<Diagnostic>& diags) {
  std::string s;
  for (const auto& d : diags) {
    if (!s.empty()) s += "; ";
    s += "node " + std::to_string(d.node) + ": " + d.message;
  }
  return s;
}

// Runs table setup, match hiding and action splitting once per distinct
// match/action and packages what each role receives. Random draws happen
// in a fixed order: blinds (row by row), then per action alpha shares and
// beta shares.
inline SetupBundle global_setup(const ProtocolParams& params, const PolicyTree& psi, RandomSource& rng,
                                const SetupOptions& opts = {}) {
  params.validate();
  if (psi.bits() != params.n) throw ConfigError("tree bit width != n");
  if (auto diags = validate_tree(psi); !diags.empty()) throw InvalidTreeError(describe(diags));

  const PolicyCatalog cat = PolicyCatalog::of(psi);

  PrivatePolicyTree priv;
  priv.nodes.reserve(psi.size());
  for (NodeId id = 0; id < psi.size(); ++id) {
    PrivateNode pn{cat.node_action[id], std::nullopt};
    if (const auto& br = psi.node(id).branch) pn.branch = PrivateBranch{*cat.node_match[id], br->on_miss, br->on_match};
    priv.nodes.push_back(pn);
  }

  // A tree of only the identity root has no matches; tables are still
  // l-sized (with zero columns) so the entry can blind packets.
  LookupTables tables;
  if (cat.matches.empty()) {
    std::vector<BitString> blinds;
    for (std::uint32_t i = 0; i < params.l; ++i) blinds.push_back(rng.bits(params.n));
    tables = {BlindTable(params.n, std::move(blinds)), HashedMatchTable(params.l, 0, params.q)};
  } else {
    tables = setup_lookup_tables(params, cat.matches, rng, opts);
  }

  std::vector<BitString> projections;
  for (const auto& mu : cat.matches) projections.push_back(hide_match(mu));

  std::vector<std::vector<ActionShares>> per_action;
  for (ActionId a = 0; a < cat.actions.size(); ++a) per_action.push_back(split_action(cat.actions[a], params.t, rng, a));

  SetupBundle out;
  out.entry = {params, tables.blinds};
  for (std::uint32_t j = 0; j < params.t; ++j) {
    ProcessorConfig pc;
    pc.params = params;
    pc.id = static_cast<ProcessorId>(j + 1);
    pc.tree = priv;
    pc.table = tables.hashed;
    pc.projections = projections;
    for (const auto& shares : per_action) pc.shares.push_back(shares[j]);
    out.processors.push_back(std::move(pc));
  }
  out.client = {params, std::move(tables.blinds), static_cast<std::uint32_t>(cat.matches.size()),
                static_cast<std::uint32_t>(cat.actions.size()), rng.seed()};
  return out;
}

// ---------------------------------------------------------------------------
// Per-packet algorithms

struct SplitPacket {
  BitString reader;  // x_r, to every processor
  Packet writer;     // x_w, to the client
  CounterIndex index;
};

// The blind covers the n header bits only; the payload travels unchanged.
inline SplitPacket split_packet(const Packet& x, CounterIndex i, const BlindTable& blinds) {
  const BitString& s = blinds.at(i);
  if (x.header.size() != s.size()) throw ContractViolation("split_packet: header length != n");
  SplitPacket out{x.header ^ s, x, i};
  out.writer.header ^= s;
  return out;
}

inline bool compute_match(const BitString& reader, CounterIndex i, MatchId j, const HashedMatchTable& table,
                          const BitString& proj, const MatchHasher& hasher) {
  const auto expected = table.digest(i, j);
  Digest got{};
  hasher.hash(mask(proj, reader), std::span(got.data(), hasher.digest_bytes()));
  return std::equal(expected.begin(), expected.end(), got.begin());
}

inline bool compute_match(const BitString& reader, CounterIndex i, MatchId j, const HashedMatchTable& table,
                          const BitString& proj) {
  return compute_match(reader, i, j, table, proj, MatchHasher(table.digest_bits()));
}

struct TraversalShares {
  CounterIndex index;
  CumulativeShares cum;
  std::size_t match_evaluations = 0;
};

// Walks the private tree exactly like the plaintext evaluator: action shares
// accumulate at every visited node, edges are decided by compute_match on x_r.
inline TraversalShares private_traversal(const ProcessorConfig& cfg, const BitString& reader, CounterIndex i,
                                         const MatchHasher& hasher) {
  TraversalShares out{i, CumulativeShares::zero(cfg.params.n), 0};
  NodeId current = 0;
  for (;;) {
    const PrivateNode& nd = cfg.tree.nodes.at(current);
    out.cum = compute_action(std::move(out.cum), cfg.shares.at(nd.action));
    if (!nd.branch) return out;
    ++out.match_evaluations;
    const auto& br = *nd.branch;
    current = compute_match(reader, i, br.match, cfg.table, cfg.projections.at(br.match), hasher) ? br.on_match
                                                                                                  : br.on_miss;
  }
}

inline TraversalShares private_traversal(const ProcessorConfig& cfg, const BitString& reader, CounterIndex i) {
  return private_traversal(cfg, reader, i, MatchHasher(cfg.params.q));
}

enum class VerdictKind : std::uint8_t { forwarded, dropped };

struct MergeResult {
  VerdictKind kind;
  Packet packet;  // reconstructed packet; header is 0^n when dropped
};

inline MergeResult merge_shares(CounterIndex i, const Packet& writer, std::span<const TraversalShares> shares,
                                const BlindTable& blinds, std::uint32_t t) {
  if (shares.size() != t) {
    throw ReassemblyError("expected " + std::to_string(t) + " share pairs, got " + std::to_string(shares.size()));
  }
  const std::size_t n = blinds.bits();
  BitString alpha(n), beta(n);
  for (const auto& s : shares) {
    if (s.index != i) throw ReassemblyError("share counter index differs from packet index");
    alpha ^= s.cum.alpha;
    beta ^= s.cum.beta;
  }
  MergeResult out{VerdictKind::forwarded, writer};
  out.packet.header ^= blinds.at(i);
  out.packet.header = (out.packet.header & ~beta) | (alpha & beta);
  if (out.packet.header.is_zero()) out.kind = VerdictKind::dropped;
  return out;
}

// ---------------------------------------------------------------------------
// Dummy packets

inline std::vector<std::uint8_t> split_dummy_flag(bool is_real, std::uint32_t t, RandomSource& rng) {
  if (t < 2) throw ContractViolation("split_dummy_flag: t must be >= 2");
  std::vector<std::uint8_t> shares(t);
  std::uint8_t acc = is_real ? 1 : 0;
  for (std::uint32_t j = 0; j + 1 < t; ++j) {
    shares[j] = rng.bit() ? 1 : 0;
    acc ^= shares[j];
  }
  shares[t - 1] = acc;
  return shares;
}

inline Packet make_dummy_packet(std::size_t n, std::size_t payload_len, RandomSource& rng) {
  Packet p;
  p.header = rng.bits(n);
  p.payload.resize(payload_len);
  rng.fill(p.payload);
  return p;
}

}  // namespace splitbox
