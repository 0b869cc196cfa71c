#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "splitbox/bitstring.hpp"
#include "splitbox/error.hpp"

namespace splitbox {

// ---------------------------------------------------------------------------
// Packets

// First n bits are the header the network function sees; the payload is
// carried untouched. Inputs shorter than n are zero-prefixed on ingest and
// prefix_bits remembers how many zeros were added.
struct Packet {
  BitString header;
  std::vector<std::uint8_t> payload;
  std::size_t prefix_bits = 0;

  static Packet ingest(const BitString& raw, std::size_t n) {
    Packet p;
    if (raw.size() <= n) {
      p.prefix_bits = n - raw.size();
      p.header = BitString(n);
      for (std::size_t i = 0; i < raw.size(); ++i) p.header.set(p.prefix_bits + i, raw.get(i));
      return p;
    }
    if ((raw.size() - n) % 8 != 0) {
      throw ContractViolation("packet tail after the header must be whole octets");
    }
    p.header = raw.prefix(n);
    p.payload.resize((raw.size() - n) / 8);
    for (std::size_t k = 0; k < p.payload.size(); ++k) {
      std::uint8_t b = 0;
      for (std::size_t bit = 0; bit < 8; ++bit) {
        b = static_cast<std::uint8_t>((b << 1) | (raw.get(n + 8 * k + bit) ? 1 : 0));
      }
      p.payload[k] = b;
    }
    return p;
  }

  // Inverse of ingest: strips the zero prefix and re-attaches the payload.
  BitString egress() const {
    const std::size_t total = header.size() - prefix_bits + 8 * payload.size();
    BitString out(total);
    std::size_t pos = 0;
    for (std::size_t i = prefix_bits; i < header.size(); ++i) out.set(pos++, header.get(i));
    for (auto b : payload) {
      for (int bit = 7; bit >= 0; --bit) out.set(pos++, (b >> bit) & 1U);
    }
    return out;
  }

  friend bool operator==(const Packet& a, const Packet& b) {
    return a.header == b.header && a.payload == b.payload;
  }
};

// ---------------------------------------------------------------------------
// Match / action primitives

inline BitString projection(const TriStateString& z) { return z.care(); }

inline BitString mask(const BitString& proj, const BitString& x) {
  if (proj.size() != x.size()) throw ContractViolation("mask: projection and input differ in length");
  return proj & x;
}

inline bool tri_match(const BitString& x, const TriStateString& mu) {
  const std::size_t n = mu.size();
  if (x.size() < n) throw ContractViolation("tri_match: input shorter than n (zero-prefix first)");
  const BitString head = x.size() == n ? x : x.prefix(n);
  return (head & mu.care()) == mu.value();
}

inline BitString apply_action(const BitString& header, const TriStateString& alpha) {
  if (header.size() != alpha.size()) throw ContractViolation("apply_action: header length != n");
  return (header & ~alpha.care()) | alpha.value();
}

inline Packet apply_action(Packet x, const TriStateString& alpha) {
  x.header = apply_action(x.header, alpha);
  return x;
}

// ---------------------------------------------------------------------------
// Policy trees

using NodeId = std::uint32_t;

struct Branch {
  TriStateString match;
  NodeId on_miss = 0;   // left child, edge m-bar
  NodeId on_match = 0;  // right child, edge m
};

struct PolicyNode {
  TriStateString action;
  std::optional<Branch> branch;

  bool is_leaf() const noexcept { return !branch.has_value(); }
};

// Binary tree of actions with match edges; node 0 is the root. Children are
// attached at most once and never to the root, so the part reachable from
// the root is always a finite tree.
class PolicyTree {
 public:
  explicit PolicyTree(std::size_t n) : n_(n) { nodes_.push_back({TriStateString::stars(n), std::nullopt}); }

  std::size_t bits() const noexcept { return n_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  static constexpr NodeId root() noexcept { return 0; }

  const PolicyNode& node(NodeId id) const {
    check(id);
    return nodes_[id];
  }
  const std::vector<PolicyNode>& nodes() const noexcept { return nodes_; }

  NodeId add_node(TriStateString action) {
    nodes_.push_back({std::move(action), std::nullopt});
    parent_.push_back(false);
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  void set_action(NodeId id, TriStateString action) {
    check(id);
    nodes_[id].action = std::move(action);
  }

  void add_branch(NodeId parent, TriStateString match, NodeId on_miss, NodeId on_match) {
    check(parent);
    check(on_miss);
    check(on_match);
    if (nodes_[parent].branch) throw InvalidTreeError("node " + std::to_string(parent) + " already has children");
    for (NodeId child : {on_miss, on_match}) {
      if (child == root()) throw InvalidTreeError("the root cannot be a child");
      if (has_parent(child)) throw InvalidTreeError("node " + std::to_string(child) + " already has a parent");
    }
    if (on_miss == on_match) throw InvalidTreeError("both children are the same node");
    mark_parent(on_miss);
    mark_parent(on_match);
    nodes_[parent].branch = Branch{std::move(match), on_miss, on_match};
  }

  bool has_parent(NodeId id) const { return id != root() && parent_[id - 1]; }

  std::size_t parent_count() const {
    std::size_t c = 0;
    for (const auto& nd : nodes_) c += nd.branch ? 1 : 0;
    return c;
  }
  std::size_t leaf_count() const { return nodes_.size() - parent_count(); }

  std::size_t depth() const {
    std::size_t best = 0;
    std::vector<std::pair<NodeId, std::size_t>> stack{{root(), 1}};
    while (!stack.empty()) {
      auto [id, d] = stack.back();
      stack.pop_back();
      best = std::max(best, d);
      if (const auto& br = nodes_[id].branch) {
        stack.push_back({br->on_miss, d + 1});
        stack.push_back({br->on_match, d + 1});
      }
    }
    return best;
  }

 private:
  void check(NodeId id) const {
    if (id >= nodes_.size()) throw ContractViolation("node id " + std::to_string(id) + " out of range");
  }
  void mark_parent(NodeId id) { parent_[id - 1] = true; }

  std::size_t n_;
  std::vector<PolicyNode> nodes_;
  std::vector<bool> parent_;  // indexed by id - 1
};

struct Policy {
  TriStateString match;
  TriStateString action;
};

// First-match-terminates chain: policy i's match leads to its action leaf,
// its complement descends to the identity node carrying policy i+1.
inline PolicyTree build_chain(const std::vector<Policy>& policies, std::size_t n) {
  PolicyTree tree(n);
  NodeId cursor = PolicyTree::root();
  for (const auto& p : policies) {
    if (p.match.size() != n || p.action.size() != n) throw ContractViolation("build_chain: policy length != n");
    const NodeId hit = tree.add_node(p.action);
    const NodeId miss = tree.add_node(TriStateString::stars(n));
    tree.add_branch(cursor, p.match, miss, hit);
    cursor = miss;
  }
  return tree;
}

inline PolicyTree build_chain(const std::vector<Policy>& policies) {
  if (policies.empty()) throw ContractViolation("build_chain: empty policy list");
  return build_chain(policies, policies.front().match.size());
}

// ---------------------------------------------------------------------------
// Reference evaluator

struct TraversalResult {
  Packet output;
  std::vector<NodeId> path;
  std::size_t match_attempts = 0;
};

// Called after each action on the writeable copy; may mutate it.
using TraversalObserver = std::function<void(NodeId, Packet&)>;

inline TraversalResult traverse_detailed(const PolicyTree& psi, const Packet& x,
                                         const TraversalObserver& observer = {}) {
  const BitString reader = x.header;  // x_r
  TraversalResult res{x, {}, 0};      // output is x_w
  NodeId current = PolicyTree::root();
  for (;;) {
    const PolicyNode& node = psi.node(current);
    res.output.header = apply_action(res.output.header, node.action);
    res.path.push_back(current);
    if (observer) observer(current, res.output);
    if (node.is_leaf()) return res;
    ++res.match_attempts;
    current = tri_match(reader, node.branch->match) ? node.branch->on_match : node.branch->on_miss;
  }
}

inline Packet traverse(const PolicyTree& psi, const Packet& x) { return traverse_detailed(psi, x).output; }

// ---------------------------------------------------------------------------
// Validation

enum class DiagnosticKind {
  root_not_identity,
  left_child_not_identity,
  overlapping_actions,
  repeated_action,
  length_mismatch,
  unreachable_node,
};

struct Diagnostic {
  DiagnosticKind kind;
  NodeId node;
  std::string message;
};

namespace detail {

inline std::string one_based_positions(const BitString& bits) {
  std::string out;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (!bits.get(i)) continue;
    if (!out.empty()) out += ',';
    out += std::to_string(i + 1);
  }
  return out;
}

}  // namespace detail

// Empty result means the tree can be evaluated privately: identity root and
// left children, and along each root-to-leaf path the non-identity actions
// have pairwise disjoint projections (and no action repeats).
inline std::vector<Diagnostic> validate_tree(const PolicyTree& psi) {
  std::vector<Diagnostic> out;
  const std::size_t n = psi.bits();
  for (NodeId id = 0; id < psi.size(); ++id) {
    const auto& nd = psi.node(id);
    if (nd.action.size() != n) {
      out.push_back({DiagnosticKind::length_mismatch, id, "action length " + std::to_string(nd.action.size()) + " != n"});
    }
    if (nd.branch && nd.branch->match.size() != n) {
      out.push_back({DiagnosticKind::length_mismatch, id, "match length " + std::to_string(nd.branch->match.size()) + " != n"});
    }
  }
  if (!out.empty()) return out;

  if (!psi.node(PolicyTree::root()).action.is_all_star()) {
    out.push_back({DiagnosticKind::root_not_identity, PolicyTree::root(), "root action is not the identity"});
  }

  struct Frame {
    NodeId id;
    BitString used;                      // OR of projections on the path so far
    std::vector<NodeId> actions_on_path;  // non-identity only
  };
  std::vector<bool> seen(psi.size(), false);
  std::vector<Frame> stack{{PolicyTree::root(), BitString(n), {}}};
  while (!stack.empty()) {
    Frame f = std::move(stack.back());
    stack.pop_back();
    seen[f.id] = true;
    const auto& nd = psi.node(f.id);
    if (!nd.action.is_all_star()) {
      bool repeated = false;
      for (NodeId prev : f.actions_on_path) {
        if (psi.node(prev).action == nd.action) {
          out.push_back({DiagnosticKind::repeated_action, f.id,
                         "action " + nd.action.to_string() + " repeats node " + std::to_string(prev) + " on one path"});
          repeated = true;
          break;
        }
      }
      const BitString overlap = f.used & nd.action.care();
      if (!repeated && !overlap.is_zero()) {
        out.push_back({DiagnosticKind::overlapping_actions, f.id,
                       "action projection overlaps an earlier action on the path at bits " +
                           detail::one_based_positions(overlap)});
      }
      f.used |= nd.action.care();
      f.actions_on_path.push_back(f.id);
    }
    if (nd.branch) {
      if (!psi.node(nd.branch->on_miss).action.is_all_star()) {
        out.push_back({DiagnosticKind::left_child_not_identity, nd.branch->on_miss,
                       "left child of node " + std::to_string(f.id) + " is not the identity"});
      }
      stack.push_back({nd.branch->on_match, f.used, f.actions_on_path});
      stack.push_back({nd.branch->on_miss, std::move(f.used), std::move(f.actions_on_path)});
    }
  }
  for (NodeId id = 0; id < psi.size(); ++id) {
    if (!seen[id]) out.push_back({DiagnosticKind::unreachable_node, id, "node is not reachable from the root"});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Text format:
//   node <id> action=<tristate>
//   edge <parent> <child> match=<tristate> polarity=<pos|neg>
// Root is id 0. '#' starts a comment.

inline std::string serialize_tree(const PolicyTree& psi) {
  std::ostringstream os;
  std::vector<NodeId> order;
  std::map<NodeId, NodeId> renumber;
  std::vector<NodeId> stack{PolicyTree::root()};
  while (!stack.empty()) {
    NodeId id = stack.back();
    stack.pop_back();
    renumber[id] = static_cast<NodeId>(order.size());
    order.push_back(id);
    if (const auto& br = psi.node(id).branch) {
      stack.push_back(br->on_match);
      stack.push_back(br->on_miss);
    }
  }
  for (NodeId id : order) {
    const auto& nd = psi.node(id);
    os << "node " << renumber[id] << " action=" << nd.action.to_string() << '\n';
    if (nd.branch) {
      const std::string m = nd.branch->match.to_string();
      os << "edge " << renumber[id] << ' ' << renumber[nd.branch->on_miss] << " match=" << m << " polarity=neg\n";
      os << "edge " << renumber[id] << ' ' << renumber[nd.branch->on_match] << " match=" << m << " polarity=pos\n";
    }
  }
  return os.str();
}

namespace detail {

inline std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream is{std::string(line)};
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

inline std::string_view strip_comment(std::string_view line) {
  const auto hash = line.find('#');
  return hash == std::string_view::npos ? line : line.substr(0, hash);
}

inline std::string take_value(const std::string& tok, std::string_view key, std::size_t line) {
  const std::string prefix = std::string(key) + "=";
  if (tok.rfind(prefix, 0) != 0) throw ParseError(line, "expected " + prefix + "...");
  return tok.substr(prefix.size());
}

inline std::uint64_t parse_id(const std::string& tok, std::size_t line) {
  std::size_t used = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(tok, &used);
  } catch (const std::exception&) {
    throw ParseError(line, "bad node id '" + tok + "'");
  }
  if (used != tok.size() || tok.front() == '-') throw ParseError(line, "bad node id '" + tok + "'");
  return v;
}

inline TriStateString parse_tristate(const std::string& text, std::size_t line) {
  try {
    return TriStateString::from_text(text);
  } catch (const ContractViolation& e) {
    throw ParseError(line, e.what());
  }
}

}  // namespace detail

// Parses the text format; n is taken from the root action's length.
// Structural problems (duplicate ids, missing edges, cycles) raise ParseError;
// semantic rule violations are left to validate_tree.
inline PolicyTree parse_tree(std::string_view text) {
  struct EdgeRec {
    std::uint64_t child;
    TriStateString match;
    std::size_t line;
  };
  std::map<std::uint64_t, std::pair<TriStateString, std::size_t>> nodes;
  std::map<std::uint64_t, std::optional<EdgeRec>> pos_edges, neg_edges;

  std::size_t line_no = 0;
  std::istringstream is{std::string(text)};
  std::string raw;
  while (std::getline(is, raw)) {
    ++line_no;
    auto toks = detail::split_ws(detail::strip_comment(raw));
    if (toks.empty()) continue;
    if (toks[0] == "node") {
      if (toks.size() != 3) throw ParseError(line_no, "node line needs: node <id> action=<tristate>");
      const auto id = detail::parse_id(toks[1], line_no);
      auto action = detail::parse_tristate(detail::take_value(toks[2], "action", line_no), line_no);
      if (!nodes.emplace(id, std::make_pair(std::move(action), line_no)).second) {
        throw ParseError(line_no, "duplicate node id " + toks[1]);
      }
    } else if (toks[0] == "edge") {
      if (toks.size() != 5) throw ParseError(line_no, "edge line needs: edge <parent> <child> match=<m> polarity=<pos|neg>");
      const auto parent = detail::parse_id(toks[1], line_no);
      const auto child = detail::parse_id(toks[2], line_no);
      auto match = detail::parse_tristate(detail::take_value(toks[3], "match", line_no), line_no);
      const auto pol = detail::take_value(toks[4], "polarity", line_no);
      auto* table = pol == "pos" ? &pos_edges : pol == "neg" ? &neg_edges : nullptr;
      if (!table) throw ParseError(line_no, "polarity must be pos or neg");
      auto& slot = (*table)[parent];
      if (slot) throw ParseError(line_no, "node " + toks[1] + " already has a " + pol + " edge");
      slot = EdgeRec{child, std::move(match), line_no};
    } else {
      throw ParseError(line_no, "unknown directive '" + toks[0] + "'");
    }
  }
  if (!nodes.count(0)) throw ParseError(line_no, "missing root node 0");
  const std::size_t n = nodes.at(0).first.size();

  PolicyTree tree(n);
  std::map<std::uint64_t, NodeId> ids{{0, PolicyTree::root()}};
  tree.set_action(PolicyTree::root(), nodes.at(0).first);
  for (const auto& [id, rec] : nodes) {
    if (id == 0) continue;
    ids[id] = tree.add_node(rec.first);
  }
  auto parents = pos_edges;
  for (const auto& [p, e] : neg_edges) parents[p];
  for (const auto& [parent, unused] : parents) {
    const auto& pe = pos_edges[parent];
    const auto& ne = neg_edges[parent];
    const std::size_t line = pe ? pe->line : ne->line;
    if (!pe || !ne) throw ParseError(line, "node " + std::to_string(parent) + " needs both a pos and a neg edge");
    if (!(pe->match == ne->match)) throw ParseError(line, "pos and neg edges of a node must carry the same match");
    for (auto id : {parent, pe->child, ne->child}) {
      if (!ids.count(id)) throw ParseError(line, "edge references unknown node " + std::to_string(id));
    }
    try {
      tree.add_branch(ids[parent], pe->match, ids[ne->child], ids[pe->child]);
    } catch (const InvalidTreeError& e) {
      throw ParseError(line, e.what());
    }
  }
  return tree;
}

}  // namespace splitbox
