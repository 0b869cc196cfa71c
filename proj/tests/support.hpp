#pragma once

// Seeded generators shared by the property tests.

#include <cstdint>
#include <vector>

#include "splitbox/nfmodel.hpp"
#include "splitbox/protocol.hpp"
#include "splitbox/random.hpp"

namespace splitbox::gen {

// Each position is a star with probability p_star, otherwise a uniform bit.
inline TriStateString random_tristate(RandomSource& rng, std::size_t n, double p_star = 0.5) {
  TriStateString z(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (rng.bernoulli(p_star)) continue;
    z.set(i, rng.bit() ? Symbol::one : Symbol::zero);
  }
  return z;
}

// Match with at least min_fixed fixed positions.
inline TriStateString random_match(RandomSource& rng, std::size_t n, std::size_t min_fixed, double p_star = 0.6) {
  for (;;) {
    auto z = random_tristate(rng, n, p_star);
    if (z.fixed_count() >= min_fixed) return z;
  }
}

// Action that fixes a random contiguous field of bits, away from `used`.
inline TriStateString random_action(RandomSource& rng, std::size_t n, const BitString& used) {
  for (int attempt = 0; attempt < 64; ++attempt) {
    const std::size_t len = rng.uniform(1, std::min<std::size_t>(n, 16));
    const std::size_t start = rng.uniform(0, n - len);
    TriStateString a(n);
    bool clash = false;
    for (std::size_t i = start; i < start + len; ++i) {
      if (used.get(i)) clash = true;
      a.set(i, rng.bit() ? Symbol::one : Symbol::zero);
    }
    if (!clash) return a;
  }
  return TriStateString(n);
}

inline Packet random_packet(RandomSource& rng, std::size_t n, std::size_t max_payload = 32) {
  Packet p;
  p.header = rng.bits(n);
  p.payload.resize(rng.uniform(0, max_payload));
  rng.fill(p.payload);
  return p;
}

// Packet whose header satisfies mu.
inline Packet matching_packet(RandomSource& rng, const TriStateString& mu) {
  Packet p = random_packet(rng, mu.size(), 0);
  p.header = (p.header & ~mu.care()) | mu.value();
  return p;
}

// Chain of k policies with drop or single-field rewrite actions.
inline PolicyTree random_chain(RandomSource& rng, std::size_t n, std::size_t k, std::size_t min_fixed, double p_star = 0.6) {
  std::vector<Policy> ps;
  for (std::size_t j = 0; j < k; ++j) {
    TriStateString action = rng.bernoulli(0.5) ? TriStateString::exact(BitString(n)) : random_action(rng, n, BitString(n));
    ps.push_back({random_match(rng, n, min_fixed, p_star), std::move(action)});
  }
  return build_chain(ps, n);
}

// General tree: every node may branch; right children carry an action whose
// projection avoids everything already fixed on the path.
inline PolicyTree random_tree(RandomSource& rng, std::size_t n, std::size_t max_parents, std::size_t min_fixed,
                              double p_star = 0.6) {
  PolicyTree tree(n);
  struct Open {
    NodeId id;
    BitString used;
  };
  std::vector<Open> open{{PolicyTree::root(), BitString(n)}};
  std::size_t parents = 0;
  while (!open.empty() && parents < max_parents) {
    const std::size_t pick = rng.uniform(0, open.size() - 1);
    Open o = open[pick];
    open.erase(open.begin() + static_cast<std::ptrdiff_t>(pick));
    const NodeId miss = tree.add_node(TriStateString::stars(n));
    TriStateString act = rng.bernoulli(0.3) ? TriStateString(n) : random_action(rng, n, o.used);
    BitString used_hit = o.used | act.care();
    const NodeId hit = tree.add_node(std::move(act));
    tree.add_branch(o.id, random_match(rng, n, min_fixed, p_star), miss, hit);
    ++parents;
    open.push_back({miss, o.used});
    open.push_back({hit, std::move(used_hit)});
  }
  return tree;
}

}  // namespace splitbox::gen
