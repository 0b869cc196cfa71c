#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "splitbox/protocol.hpp"
#include "splitbox/random.hpp"
#include "splitbox/wire.hpp"

namespace splitbox {

using StatsSnapshot = std::map<std::string, std::uint64_t>;

// One "key value" pair per line.
inline std::string format_stats(const StatsSnapshot& s) {
  std::string out;
  for (const auto& [k, v] : s) out += k + " " + std::to_string(v) + "\n";
  return out;
}

inline StatsSnapshot parse_stats(std::string_view text) {
  StatsSnapshot s;
  std::istringstream is{std::string(text)};
  std::string line;
  std::size_t no = 0;
  while (std::getline(is, line)) {
    ++no;
    std::istringstream ls(line);
    std::string key, value, extra;
    if (!(ls >> key)) continue;
    if (!(ls >> value) || (ls >> extra)) throw ParseError(no, "expected 'key value'");
    try {
      std::size_t used = 0;
      s[key] = std::stoull(value, &used);
      if (used != value.size()) throw ParseError(no, "bad integer");
    } catch (const std::logic_error&) {
      throw ParseError(no, "bad integer '" + value + "'");
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Entry (A)

struct Destination {
  enum class Kind : std::uint8_t { processor, client } kind;
  ProcessorId processor = 0;  // 1..t when kind == processor

  static Destination to_processor(ProcessorId j) { return {Kind::processor, j}; }
  static Destination to_client() { return {Kind::client, 0}; }
  friend bool operator==(Destination, Destination) = default;
};

struct OutboundMessage {
  Destination to;
  WireMessage msg;
};

struct EntryStats {
  std::uint64_t emitted = 0;
  std::uint64_t real = 0;
  std::uint64_t dummies = 0;
  std::uint64_t wraps = 0;

  StatsSnapshot snapshot() const {
    return {{"entry.emitted", emitted}, {"entry.real", real}, {"entry.dummies", dummies}, {"entry.wraps", wraps}};
  }
};

struct IngestResult {
  std::vector<OutboundMessage> messages;
  std::uint64_t real_seq = 0;  // sequence number carried by the real packet
  std::size_t dummies = 0;
};

// Owns the blind counter; the single serialized mutation point of the
// pipeline. Counter starts at 1 and wraps from l back to 1.
class EntryState {
 public:
  EntryState(EntryConfig cfg, RandomSource rng, std::uint64_t first_seq = 1)
      : cfg_(std::move(cfg)), rng_(std::move(rng)), next_seq_(first_seq) {
    cfg_.params.validate();
    if (cfg_.blinds.size() != cfg_.params.l) throw ConfigError("entry blind table size != l");
  }

  const ProtocolParams& params() const noexcept { return cfg_.params; }
  CounterIndex counter() const noexcept { return counter_; }
  std::uint64_t next_seq() const noexcept { return next_seq_; }
  const EntryStats& stats() const noexcept { return stats_; }

  // Before the real packet, a geometric number of dummies: each emission
  // slot is a dummy with probability 1 - rho. Dummies copy the real
  // packet's payload length.
  IngestResult ingest(const Packet& x) {
    if (x.header.size() != cfg_.params.n) throw ContractViolation("entry: header length != n");
    IngestResult out;
    if (cfg_.params.rho_num != cfg_.params.rho_den) {
      const double p_dummy = 1.0 - cfg_.params.rho();
      while (rng_.bernoulli(p_dummy)) {
        emit(make_dummy_packet(cfg_.params.n, x.payload.size(), rng_), false, out);
        ++out.dummies;
      }
    }
    out.real_seq = emit(x, true, out);
    return out;
  }

 private:
  std::uint64_t emit(const Packet& x, bool is_real, IngestResult& out) {
    const std::uint64_t seq = next_seq_++;
    const CounterIndex i = counter_;
    const SplitPacket sp = split_packet(x, i, cfg_.blinds);
    const auto flags = split_dummy_flag(is_real, cfg_.params.t, rng_);
    for (std::uint32_t j = 0; j < cfg_.params.t; ++j) {
      WireMessage m;
      m.kind = MessageKind::to_processor;
      m.seq = seq;
      m.counter_index = i.value;
      m.processor_id = static_cast<std::uint8_t>(j + 1);
      m.flag_share = flags[j];
      m.body.assign(sp.reader.bytes().begin(), sp.reader.bytes().end());
      out.messages.push_back({Destination::to_processor(static_cast<ProcessorId>(j + 1)), std::move(m)});
    }
    WireMessage xw;
    xw.kind = MessageKind::to_client_xw;
    xw.seq = seq;
    xw.counter_index = i.value;
    xw.body.assign(sp.writer.header.bytes().begin(), sp.writer.header.bytes().end());
    xw.body.insert(xw.body.end(), sp.writer.payload.begin(), sp.writer.payload.end());
    out.messages.push_back({Destination::to_client(), std::move(xw)});

    ++stats_.emitted;
    ++(is_real ? stats_.real : stats_.dummies);
    if (counter_.value == cfg_.params.l) {
      counter_.value = 1;
      ++stats_.wraps;
    } else {
      ++counter_.value;
    }
    return seq;
  }

  EntryConfig cfg_;
  RandomSource rng_;
  CounterIndex counter_{1};
  std::uint64_t next_seq_;
  EntryStats stats_;
};

inline IngestResult entry_ingest(EntryState& state, const Packet& x) { return state.ingest(x); }

// ---------------------------------------------------------------------------
// Processor (B_j)

struct ProcessorStats {
  std::atomic<std::uint64_t> handled{0};
  std::atomic<std::uint64_t> malformed{0};
  std::atomic<std::uint64_t> match_evaluations{0};
};

// Immutable after construction apart from relaxed counters, so handle() may
// run on any number of threads.
class ProcessorState {
 public:
  explicit ProcessorState(ProcessorConfig cfg) : cfg_(std::move(cfg)), hasher_(cfg_.params.q) {
    cfg_.params.validate();
    for (const auto& nd : cfg_.tree.nodes) {
      if (nd.action >= cfg_.shares.size()) throw ConfigError("processor tree references unknown action");
      if (nd.branch) {
        if (nd.branch->match >= cfg_.projections.size() || nd.branch->match >= cfg_.table.match_count()) {
          throw ConfigError("processor tree references unknown match");
        }
        if (nd.branch->on_miss >= cfg_.tree.nodes.size() || nd.branch->on_match >= cfg_.tree.nodes.size()) {
          throw ConfigError("processor tree references unknown node");
        }
      }
    }
    if (cfg_.tree.nodes.empty()) throw ConfigError("processor tree is empty");
    if (cfg_.table.rows() != cfg_.params.l) throw ConfigError("processor table rows != l");
  }

  const ProcessorConfig& config() const noexcept { return cfg_; }
  ProcessorId id() const noexcept { return cfg_.id; }

  StatsSnapshot stats() const {
    const std::string p = "processor." + std::to_string(cfg_.id) + ".";
    return {{p + "handled", stats_.handled.load()},
            {p + "malformed", stats_.malformed.load()},
            {p + "match_evaluations", stats_.match_evaluations.load()}};
  }

  // Exactly one output per well-formed input; malformed input is counted and
  // produces nothing. The flag share is forwarded untouched.
  std::optional<WireMessage> handle(const WireMessage& in) const {
    std::size_t evaluations = 0;
    return handle(in, evaluations);
  }

  // Also reports how many match evaluations the traversal made.
  std::optional<WireMessage> handle(const WireMessage& in, std::size_t& evaluations) const {
    evaluations = 0;
    const auto& p = cfg_.params;
    if (in.kind != MessageKind::to_processor || in.processor_id != cfg_.id || in.counter_index < 1 ||
        in.counter_index > p.l || in.body.size() != p.header_bytes() || in.flag_share > 1) {
      stats_.malformed.fetch_add(1, std::memory_order_relaxed);
      return std::nullopt;
    }
    BitString reader;
    try {
      reader = BitString::from_bytes(in.body, p.n);
    } catch (const ContractViolation&) {
      stats_.malformed.fetch_add(1, std::memory_order_relaxed);
      return std::nullopt;
    }
    const TraversalShares res = private_traversal(cfg_, reader, CounterIndex{in.counter_index}, hasher_);
    stats_.handled.fetch_add(1, std::memory_order_relaxed);
    stats_.match_evaluations.fetch_add(res.match_evaluations, std::memory_order_relaxed);
    evaluations = res.match_evaluations;

    WireMessage out;
    out.kind = MessageKind::to_client_shares;
    out.seq = in.seq;
    out.counter_index = in.counter_index;
    out.processor_id = cfg_.id;
    out.flag_share = in.flag_share;
    out.body.reserve(2 * p.header_bytes());
    out.body.assign(res.cum.alpha.bytes().begin(), res.cum.alpha.bytes().end());
    out.body.insert(out.body.end(), res.cum.beta.bytes().begin(), res.cum.beta.bytes().end());
    return out;
  }

  std::optional<WireMessage> handle(std::span<const std::uint8_t> datagram) const {
    try {
      return handle(decode(datagram, cfg_.params.n));
    } catch (const DecodeError&) {
      stats_.malformed.fetch_add(1, std::memory_order_relaxed);
      return std::nullopt;
    }
  }

 private:
  ProcessorConfig cfg_;
  MatchHasher hasher_;
  mutable ProcessorStats stats_;
};

inline std::optional<WireMessage> processor_handle(const ProcessorState& state, const WireMessage& msg) {
  return state.handle(msg);
}

// ---------------------------------------------------------------------------
// Client (C)

using TimeNs = std::uint64_t;

struct Verdict {
  std::uint64_t seq = 0;
  CounterIndex index;
  VerdictKind kind = VerdictKind::forwarded;
  Packet packet;
};

struct ClientOptions {
  std::size_t capacity = 4096;
  TimeNs timeout_ns = 1'000'000'000;
};

struct ClientStats {
  std::uint64_t forwarded = 0;
  std::uint64_t dropped = 0;
  std::uint64_t dummies_discarded = 0;
  std::uint64_t expired = 0;
  std::uint64_t evicted = 0;
  std::uint64_t poisoned = 0;
  std::uint64_t duplicates = 0;
  std::uint64_t late = 0;
  std::uint64_t malformed = 0;

  // Every sequence number that reached a final state.
  std::uint64_t finalized() const noexcept { return forwarded + dropped + dummies_discarded + expired + evicted + poisoned; }

  StatsSnapshot snapshot() const {
    return {{"client.forwarded", forwarded}, {"client.dropped", dropped},   {"client.dummies_discarded", dummies_discarded},
            {"client.expired", expired},     {"client.evicted", evicted},   {"client.poisoned", poisoned},
            {"client.duplicates", duplicates}, {"client.late", late},       {"client.malformed", malformed}};
  }
};

struct ReassemblySlot {
  enum class State : std::uint8_t { empty, open, done } state = State::empty;
  std::uint64_t seq = 0;
  CounterIndex index;
  bool has_index = false;
  std::optional<Packet> writer;
  std::vector<std::optional<CumulativeShares>> shares;  // per processor, index j-1
  std::vector<std::uint8_t> flags;
  std::size_t share_count = 0;
  TimeNs first_arrival = 0;
  TimeNs last_arrival = 0;

  bool complete() const noexcept { return writer.has_value() && share_count == shares.size(); }
};

// Collects the x_w copy and the t share pairs of each sequence number in a
// circular buffer (slot = seq mod capacity) and merges once all arrived.
class ClientState {
 public:
  ClientState(ClientConfig cfg, ClientOptions opts = {}) : cfg_(std::move(cfg)), opts_(opts), slots_(opts.capacity) {
    cfg_.params.validate();
    if (opts_.capacity == 0) throw ConfigError("client buffer capacity must be positive");
    if (cfg_.blinds.size() != cfg_.params.l) throw ConfigError("client blind table size != l");
  }

  const ClientStats& stats() const noexcept { return stats_; }
  const ClientOptions& options() const noexcept { return opts_; }
  std::size_t occupancy() const noexcept { return open_; }

  std::optional<Verdict> handle(std::span<const std::uint8_t> datagram, TimeNs now) {
    WireMessage m;
    try {
      m = decode(datagram, cfg_.params.n);
    } catch (const DecodeError&) {
      ++stats_.malformed;
      return std::nullopt;
    }
    return handle(m, now);
  }

  std::optional<Verdict> handle(const WireMessage& m, TimeNs now) {
    const auto& p = cfg_.params;
    if (m.kind == MessageKind::to_processor || m.counter_index < 1 || m.counter_index > p.l ||
        m.flag_share > 1 || (m.kind == MessageKind::to_client_shares && (m.processor_id < 1 || m.processor_id > p.t)) ||
        (m.kind == MessageKind::to_client_shares && m.body.size() != 2 * p.header_bytes()) ||
        (m.kind == MessageKind::to_client_xw && m.body.size() < p.header_bytes())) {
      ++stats_.malformed;
      return std::nullopt;
    }
    const std::size_t nb = p.header_bytes();
    const std::span body(m.body);
    std::optional<Packet> writer;
    std::optional<CumulativeShares> pair;
    try {
      if (m.kind == MessageKind::to_client_xw) {
        writer.emplace();
        writer->header = BitString::from_bytes(body.subspan(0, nb), p.n);
        writer->payload.assign(body.begin() + static_cast<std::ptrdiff_t>(nb), body.end());
      } else {
        pair = CumulativeShares{BitString::from_bytes(body.subspan(0, nb), p.n),
                                BitString::from_bytes(body.subspan(nb, nb), p.n)};
      }
    } catch (const ContractViolation&) {
      ++stats_.malformed;
      return std::nullopt;
    }

    ReassemblySlot* slot = slot_for(m.seq, now);
    if (!slot) return std::nullopt;
    if (slot->state == ReassemblySlot::State::done) {
      ++stats_.duplicates;
      return std::nullopt;
    }
    slot->last_arrival = now;

    const CounterIndex idx{m.counter_index};
    if (writer) {
      if (slot->writer) {
        ++stats_.duplicates;
        return std::nullopt;
      }
      slot->writer = std::move(writer);
    } else {
      auto& cell = slot->shares[m.processor_id - 1];
      if (cell) {
        ++stats_.duplicates;
        return std::nullopt;
      }
      cell = std::move(pair);
      slot->flags[m.processor_id - 1] = m.flag_share;
      ++slot->share_count;
    }
    if (!slot->has_index) {
      slot->index = idx;
      slot->has_index = true;
    } else if (slot->index != idx) {
      finish(*slot);
      ++stats_.poisoned;
      return std::nullopt;
    }
    if (!slot->complete()) return std::nullopt;
    return reconstruct(*slot);
  }

  // Slots whose first message is older than the timeout (strictly) expire.
  std::vector<std::uint64_t> expire(TimeNs now) {
    std::vector<std::uint64_t> out;
    while (!pending_.empty()) {
      const auto [arrival, seq] = pending_.front();
      ReassemblySlot& s = slots_[seq % slots_.size()];
      if (s.seq != seq || s.state != ReassemblySlot::State::open || s.first_arrival != arrival) {
        pending_.pop_front();
        continue;
      }
      if (now <= arrival || now - arrival <= opts_.timeout_ns) break;
      pending_.pop_front();
      finish(s);
      ++stats_.expired;
      out.push_back(seq);
    }
    return out;
  }

  // Expires every open slot regardless of age (end of a run).
  std::vector<std::uint64_t> flush() { return expire(std::numeric_limits<TimeNs>::max()); }

 private:
  ReassemblySlot* slot_for(std::uint64_t seq, TimeNs now) {
    ReassemblySlot& s = slots_[seq % slots_.size()];
    if (s.state != ReassemblySlot::State::empty && s.seq == seq) return &s;
    if (s.state != ReassemblySlot::State::empty && seq < s.seq) {
      ++stats_.late;
      return nullptr;
    }
    if (s.state == ReassemblySlot::State::open) {
      finish(s);
      ++stats_.evicted;
    }
    s = ReassemblySlot{};
    s.state = ReassemblySlot::State::open;
    s.seq = seq;
    s.shares.assign(cfg_.params.t, std::nullopt);
    s.flags.assign(cfg_.params.t, 0);
    s.first_arrival = now;
    s.last_arrival = now;
    ++open_;
    pending_.emplace_back(now, seq);
    return &s;
  }

  void finish(ReassemblySlot& s) {
    if (s.state == ReassemblySlot::State::open) --open_;
    s.state = ReassemblySlot::State::done;
    s.writer.reset();
    s.shares.clear();
  }

  std::optional<Verdict> reconstruct(ReassemblySlot& s) {
    std::uint8_t flag = 0;
    for (auto f : s.flags) flag ^= f;
    if (flag == 0) {
      finish(s);
      ++stats_.dummies_discarded;
      return std::nullopt;
    }
    std::vector<TraversalShares> shares;
    shares.reserve(s.shares.size());
    for (auto& c : s.shares) shares.push_back({s.index, std::move(*c), 0});
    MergeResult merged = merge_shares(s.index, *s.writer, shares, cfg_.blinds, cfg_.params.t);
    Verdict v{s.seq, s.index, merged.kind, std::move(merged.packet)};
    finish(s);
    ++(v.kind == VerdictKind::forwarded ? stats_.forwarded : stats_.dropped);
    return v;
  }

  ClientConfig cfg_;
  ClientOptions opts_;
  std::vector<ReassemblySlot> slots_;
  std::deque<std::pair<TimeNs, std::uint64_t>> pending_;
  std::size_t open_ = 0;
  ClientStats stats_;
};

inline std::optional<Verdict> client_handle(ClientState& state, const WireMessage& msg, TimeNs now) {
  return state.handle(msg, now);
}

inline std::vector<std::uint64_t> client_expire(ClientState& state, TimeNs now) { return state.expire(now); }

}  // namespace splitbox
