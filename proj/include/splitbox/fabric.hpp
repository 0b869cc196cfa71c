#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "splitbox/protocol.hpp"
#include "splitbox/random.hpp"
#include "splitbox/roles.hpp"
#include "splitbox/wire.hpp"

// In-process carrier: a discrete-event simulation over a virtual nanosecond
// clock. Every message is really encoded, carried and decoded, and the real
// role handlers compute every output; only the time each step takes comes
// from a ServiceProfile.
namespace splitbox::fabric {

inline constexpr std::size_t kUnbounded = std::numeric_limits<std::size_t>::max();

struct LinkParams {
  double bandwidth_bps = 10e9;
  TimeNs propagation_ns = 2'000;
  std::size_t buffer_bytes = kUnbounded;  // tail-drop once this much is waiting to serialize
};

enum class LinkClass : std::uint8_t { entry_processor, entry_client, processor_client };

inline const char* to_string(LinkClass c) {
  switch (c) {
    case LinkClass::entry_processor: return "entry_processor";
    case LinkClass::entry_client: return "entry_client";
    case LinkClass::processor_client: return "processor_client";
  }
  return "?";
}

struct FaultRule {
  std::optional<LinkClass> scope;  // nullopt: every link
  double loss = 0.0;
  double duplicate = 0.0;
  TimeNs reorder_window_ns = 0;  // extra uniform delay in [0, window]
};

struct FaultPlan {
  std::vector<FaultRule> rules;
  std::uint64_t seed = 1;

  static FaultPlan none() { return {}; }
  static FaultPlan share_loss(double p, std::uint64_t seed) {
    return {{FaultRule{LinkClass::processor_client, p, 0.0, 0}}, seed};
  }
};

// Per-step costs in nanoseconds.
struct ServiceProfile {
  double entry_base_ns = 500;       // per emitted packet
  double entry_per_byte_ns = 0.25;  // per payload byte
  double processor_base_ns = 600;
  double processor_per_eval_ns = 450;
  double client_message_ns = 200;
  double client_per_byte_ns = 0.1;
  double client_merge_ns = 300;

  // Fixed constants of roughly commodity-CPU magnitude; runs that use them
  // are fully reproducible.
  static ServiceProfile reference() { return {}; }

  TimeNs entry(std::size_t payload) const { return to_ns(entry_base_ns + entry_per_byte_ns * payload); }
  TimeNs processor(std::size_t evaluations) const {
    return to_ns(processor_base_ns + processor_per_eval_ns * static_cast<double>(evaluations));
  }
  TimeNs client(std::size_t bytes, bool merged) const {
    return to_ns(client_message_ns + client_per_byte_ns * bytes + (merged ? client_merge_ns : 0.0));
  }

  static TimeNs to_ns(double v) { return static_cast<TimeNs>(std::max(1.0, std::round(v))); }

  friend bool operator==(const ServiceProfile&, const ServiceProfile&) = default;
};

// Poisson arrivals shaped by a token bucket. rate_pps == 0 offers the whole
// trace at time zero.
struct PacerParams {
  double rate_pps = 0.0;
  std::size_t bucket_bytes = 64 * 1024;
  std::uint64_t seed = 1;
};

inline std::vector<TimeNs> pace(std::span<const std::size_t> sizes, const PacerParams& p) {
  std::vector<TimeNs> out(sizes.size(), 0);
  if (p.rate_pps <= 0.0 || sizes.empty()) return out;
  double mean_bytes = 0;
  for (auto s : sizes) mean_bytes += static_cast<double>(s);
  mean_bytes = std::max(1.0, mean_bytes / static_cast<double>(sizes.size()));
  const double bytes_per_ns = p.rate_pps * mean_bytes / 1e9;
  const double mean_gap_ns = 1e9 / p.rate_pps;
  RandomSource rng = RandomSource::seeded(p.seed);
  double arrival = 0, release = 0, tokens = static_cast<double>(p.bucket_bytes), last = 0;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    arrival += rng.exponential(mean_gap_ns);
    double t = std::max(arrival, release);
    tokens = std::min(static_cast<double>(p.bucket_bytes), tokens + (t - last) * bytes_per_ns);
    last = t;
    const double need = static_cast<double>(sizes[k]);
    if (tokens < need) {
      t += (need - tokens) / bytes_per_ns;
      tokens = 0;
      last = t;
    } else {
      tokens -= need;
    }
    release = t;
    out[k] = static_cast<TimeNs>(std::llround(t));
  }
  return out;
}

struct Topology {
  std::uint32_t workers = 1;  // per processor
  std::size_t entry_queue = kUnbounded;
  std::size_t processor_queue = kUnbounded;
  std::size_t client_queue = kUnbounded;
  LinkParams entry_processor;
  LinkParams entry_client;
  LinkParams processor_client;
  ClientOptions client;
  ServiceProfile profile;
  PacerParams pacer;
  std::uint64_t entry_seed = 1;  // dummy generation and flag sharing
  bool keep_packets = true;      // store reconstructed packets in the report

  // Bounded queues mirroring NIC rings, used for loss-rate measurements.
  // Link buffers hold about one ring of full-size frames.
  static Topology bounded(std::size_t queue = 1024) {
    Topology t;
    t.entry_queue = t.processor_queue = t.client_queue = queue;
    t.entry_processor.buffer_bytes = t.entry_client.buffer_bytes = t.processor_client.buffer_bytes = queue * 2048;
    t.keep_packets = false;
    return t;
  }
};

enum class Outcome : std::uint8_t { forwarded, dropped, lost };

inline const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::forwarded: return "forwarded";
    case Outcome::dropped: return "dropped";
    case Outcome::lost: return "lost";
  }
  return "?";
}

struct PacketRecord {
  std::uint64_t seq = 0;  // 0 when refused at the entry queue
  Outcome outcome = Outcome::lost;
  TimeNs entry_ns = 0;
  TimeNs exit_ns = 0;
  std::optional<Packet> output;

  TimeNs delay_ns() const noexcept { return exit_ns >= entry_ns ? exit_ns - entry_ns : 0; }
  friend bool operator==(const PacketRecord&, const PacketRecord&) = default;
};

struct RunReport {
  std::vector<PacketRecord> packets;  // indexed like the input trace
  StatsSnapshot stats;
  TimeNs first_ns = 0;
  TimeNs last_ns = 0;

  std::uint64_t stat(const std::string& key) const {
    auto it = stats.find(key);
    return it == stats.end() ? 0 : it->second;
  }

  std::size_t count(Outcome o) const {
    return static_cast<std::size_t>(std::count_if(packets.begin(), packets.end(), [o](const auto& p) { return p.outcome == o; }));
  }

  // Every emitted sequence number is accounted for exactly once at the
  // client, or never reached it at all.
  bool conserved() const {
    const std::uint64_t finalized = stat("client.forwarded") + stat("client.dropped") + stat("client.dummies_discarded") +
                                    stat("client.expired") + stat("client.evicted") + stat("client.poisoned");
    return stat("entry.emitted") == finalized + stat("fabric.unseen") &&
           stat("entry.real") == count(Outcome::forwarded) + count(Outcome::dropped) + real_lost_after_entry();
  }

  std::size_t real_lost_after_entry() const {
    return static_cast<std::size_t>(std::count_if(packets.begin(), packets.end(),
                                                  [](const auto& p) { return p.outcome == Outcome::lost && p.seq != 0; }));
  }

  friend bool operator==(const RunReport&, const RunReport&) = default;
};

enum class Endpoint : std::uint8_t { entry, processor, client };

// Observes every message put on a link: sender, receiver, processor id (for
// processor endpoints) and the encoded bytes.
using MessageTap = std::function<void(Endpoint from, Endpoint to, ProcessorId processor, std::span<const std::uint8_t>)>;

namespace detail {

class Simulator {
 public:
  using Action = std::function<void()>;

  void at(TimeNs t, Action a) { events_.push({std::max(t, now_), tie_++, std::move(a)}); }
  TimeNs now() const noexcept { return now_; }

  void run() {
    while (!events_.empty()) {
      Event e = std::move(const_cast<Event&>(events_.top()));
      events_.pop();
      now_ = e.time;
      e.action();
    }
  }

 private:
  struct Event {
    TimeNs time;
    std::uint64_t tie;
    Action action;
    bool operator>(const Event& o) const { return time != o.time ? time > o.time : tie > o.tie; }
  };
  std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
  TimeNs now_ = 0;
  std::uint64_t tie_ = 0;
};

struct Link {
  LinkParams params;
  LinkClass cls;
  TimeNs free_at = 0;
};

// w identical workers in front of a bounded FIFO.
template <typename Job>
struct Station {
  Station(std::uint32_t w, std::size_t cap) : workers(w), capacity(cap) {}
  std::uint32_t workers = 1;
  std::size_t capacity = kUnbounded;
  std::uint32_t busy = 0;
  std::deque<Job> queue;
  std::uint64_t refused = 0;
};

}  // namespace detail

// Drives one full pipeline run over the packets. Deterministic given the
// topology seeds and the fault plan.
inline RunReport run_topology(const Topology& topo, const SetupBundle& bundle, std::span<const Packet> packets,
                              const FaultPlan& faults = {}, const MessageTap& tap = {}) {
  const ProtocolParams& params = bundle.entry.params;
  if (bundle.processors.size() != params.t || bundle.client.params != params) {
    throw ConfigError("role configurations disagree on parameters");
  }
  for (const auto& pc : bundle.processors) {
    if (pc.params != params) throw ConfigError("processor configuration disagrees on parameters");
  }
  const std::uint32_t t = params.t;

  detail::Simulator sim;
  EntryState entry(bundle.entry, RandomSource::seeded(topo.entry_seed));
  std::vector<std::unique_ptr<ProcessorState>> procs;
  for (const auto& pc : bundle.processors) procs.push_back(std::make_unique<ProcessorState>(pc));
  ClientState client(bundle.client, topo.client);
  RandomSource fault_rng = RandomSource::seeded(faults.seed);

  RunReport report;
  report.packets.resize(packets.size());
  std::unordered_map<std::uint64_t, std::size_t> seq_to_index;
  std::vector<std::uint8_t> seen_at_client;  // by seq-1
  std::uint64_t link_lost = 0, link_dup = 0, link_refused = 0;

  std::vector<detail::Link> to_proc(t, {topo.entry_processor, LinkClass::entry_processor});
  detail::Link to_client{topo.entry_client, LinkClass::entry_client};
  std::vector<detail::Link> proc_to_client(t, {topo.processor_client, LinkClass::processor_client});

  detail::Station<std::size_t> entry_st{1, topo.entry_queue};
  std::vector<detail::Station<std::vector<std::uint8_t>>> proc_st(t, detail::Station<std::vector<std::uint8_t>>(topo.workers, topo.processor_queue));
  detail::Station<std::vector<std::uint8_t>> client_st{1, topo.client_queue};

  auto fault_for = [&](LinkClass c) {
    FaultRule r;
    for (const auto& f : faults.rules) {
      if (!f.scope || *f.scope == c) {
        r.loss = 1.0 - (1.0 - r.loss) * (1.0 - f.loss);
        r.duplicate = std::max(r.duplicate, f.duplicate);
        r.reorder_window_ns = std::max(r.reorder_window_ns, f.reorder_window_ns);
      }
    }
    return r;
  };
  const FaultRule fault_ep = fault_for(LinkClass::entry_processor);
  const FaultRule fault_ec = fault_for(LinkClass::entry_client);
  const FaultRule fault_pc = fault_for(LinkClass::processor_client);

  std::function<void(std::size_t)> proc_try_start;
  std::function<void()> client_try_start;

  auto proc_arrive = [&](std::size_t j, std::vector<std::uint8_t> bytes) {
    auto& st = proc_st[j];
    if (st.queue.size() >= st.capacity) {
      ++st.refused;
      return;
    }
    st.queue.push_back(std::move(bytes));
    proc_try_start(j);
  };
  auto client_arrive = [&](std::vector<std::uint8_t> bytes) {
    if (client_st.queue.size() >= client_st.capacity) {
      ++client_st.refused;
      return;
    }
    client_st.queue.push_back(std::move(bytes));
    client_try_start();
  };

  auto send = [&](detail::Link& link, const FaultRule& fault, std::vector<std::uint8_t> bytes,
                  std::function<void(std::vector<std::uint8_t>)> deliver) {
    const TimeNs now = sim.now();
    const std::size_t copies = (fault.duplicate > 0 && fault_rng.bernoulli(fault.duplicate)) ? 2 : 1;
    if (copies == 2) ++link_dup;
    for (std::size_t c = 0; c < copies; ++c) {
      if (fault.loss > 0 && fault_rng.bernoulli(fault.loss)) {
        ++link_lost;
        continue;
      }
      const double bw = link.params.bandwidth_bps;
      if (link.params.buffer_bytes != kUnbounded && link.free_at > now) {
        const double backlog = static_cast<double>(link.free_at - now) * bw / 8e9;
        if (backlog > static_cast<double>(link.params.buffer_bytes)) {
          ++link_refused;
          continue;
        }
      }
      const auto ser = static_cast<TimeNs>(std::ceil(static_cast<double>(bytes.size()) * 8e9 / bw));
      link.free_at = std::max(link.free_at, now) + ser;
      TimeNs arrive = link.free_at + link.params.propagation_ns;
      if (fault.reorder_window_ns > 0) arrive += fault_rng.uniform(0, fault.reorder_window_ns);
      sim.at(arrive, [deliver, copy = bytes]() mutable { deliver(std::move(copy)); });
    }
  };

  std::function<void()> entry_try_start = [&] {
    while (entry_st.busy < entry_st.workers && !entry_st.queue.empty()) {
      const std::size_t idx = entry_st.queue.front();
      entry_st.queue.pop_front();
      ++entry_st.busy;
      IngestResult res = entry.ingest(packets[idx]);
      seq_to_index[res.real_seq] = idx;
      report.packets[idx].seq = res.real_seq;
      const TimeNs service = (res.dummies + 1) * topo.profile.entry(packets[idx].payload.size());
      sim.at(sim.now() + service, [&, msgs = std::move(res.messages)]() mutable {
        for (auto& om : msgs) {
          auto bytes = encode(om.msg);
          if (om.to.kind == Destination::Kind::processor) {
            const std::size_t j = om.to.processor - 1;
            if (tap) tap(Endpoint::entry, Endpoint::processor, om.to.processor, bytes);
            send(to_proc[j], fault_ep, std::move(bytes), [&, j](std::vector<std::uint8_t> b) { proc_arrive(j, std::move(b)); });
          } else {
            if (tap) tap(Endpoint::entry, Endpoint::client, 0, bytes);
            send(to_client, fault_ec, std::move(bytes), [&](std::vector<std::uint8_t> b) { client_arrive(std::move(b)); });
          }
        }
        --entry_st.busy;
        entry_try_start();
      });
    }
  };

  proc_try_start = [&](std::size_t j) {
    auto& st = proc_st[j];
    while (st.busy < st.workers && !st.queue.empty()) {
      auto bytes = std::move(st.queue.front());
      st.queue.pop_front();
      ++st.busy;
      std::size_t evals = 0;
      std::optional<WireMessage> out;
      try {
        out = procs[j]->handle(decode(bytes, params.n), evals);
      } catch (const DecodeError&) {
        out = procs[j]->handle(std::span<const std::uint8_t>(bytes));
      }
      sim.at(sim.now() + topo.profile.processor(evals), [&, j, out = std::move(out)]() mutable {
        if (out) {
          auto enc = encode(*out);
          if (tap) tap(Endpoint::processor, Endpoint::client, static_cast<ProcessorId>(j + 1), enc);
          send(proc_to_client[j], fault_pc, std::move(enc), [&](std::vector<std::uint8_t> b) { client_arrive(std::move(b)); });
        }
        --proc_st[j].busy;
        proc_try_start(j);
      });
    }
  };

  auto settle_lost = [&](std::uint64_t seq) {
    if (auto it = seq_to_index.find(seq); it != seq_to_index.end()) {
      auto& rec = report.packets[it->second];
      rec.outcome = Outcome::lost;
      rec.exit_ns = 0;
    }
  };

  client_try_start = [&] {
    while (client_st.busy < client_st.workers && !client_st.queue.empty()) {
      auto bytes = std::move(client_st.queue.front());
      client_st.queue.pop_front();
      ++client_st.busy;
      const TimeNs now = sim.now();
      for (auto seq : client.expire(now)) settle_lost(seq);
      if (bytes.size() >= kWireHeaderBytes) {
        std::uint64_t seq = 0;
        for (std::size_t k = 4; k < 12; ++k) seq = (seq << 8) | bytes[k];
        if (seq >= 1) {
          if (seen_at_client.size() < seq) seen_at_client.resize(seq, 0);
          seen_at_client[seq - 1] = 1;
        }
      }
      std::optional<Verdict> v = client.handle(std::span<const std::uint8_t>(bytes), now);
      const TimeNs done = now + topo.profile.client(bytes.size(), v.has_value());
      sim.at(done, [&, v = std::move(v), done]() mutable {
        if (v) {
          if (auto it = seq_to_index.find(v->seq); it != seq_to_index.end()) {
            auto& rec = report.packets[it->second];
            rec.outcome = v->kind == VerdictKind::forwarded ? Outcome::forwarded : Outcome::dropped;
            rec.exit_ns = done;
            if (topo.keep_packets) rec.output = std::move(v->packet);
          }
        }
        --client_st.busy;
        client_try_start();
      });
    }
  };

  std::vector<std::size_t> sizes;
  sizes.reserve(packets.size());
  for (const auto& p : packets) sizes.push_back(p.payload.size() + params.header_bytes());
  const std::vector<TimeNs> arrivals = pace(sizes, topo.pacer);
  for (std::size_t k = 0; k < packets.size(); ++k) {
    sim.at(arrivals[k], [&, k] {
      report.packets[k].entry_ns = sim.now();
      if (entry_st.queue.size() >= entry_st.capacity) {
        ++entry_st.refused;
        return;
      }
      entry_st.queue.push_back(k);
      entry_try_start();
    });
  }
  sim.run();
  for (auto seq : client.flush()) settle_lost(seq);

  const std::uint64_t emitted = entry.stats().emitted;
  std::uint64_t seen = 0;
  for (auto s : seen_at_client) seen += s;
  for (const auto& [k, v] : entry.stats().snapshot()) report.stats[k] = v;
  for (const auto& p : procs) {
    for (const auto& [k, v] : p->stats()) report.stats[k] = v;
  }
  for (const auto& [k, v] : client.stats().snapshot()) report.stats[k] = v;
  report.stats["fabric.unseen"] = emitted - seen;
  report.stats["fabric.link_lost"] = link_lost;
  report.stats["fabric.link_duplicated"] = link_dup;
  report.stats["fabric.link_refused"] = link_refused;
  report.stats["fabric.refused.entry"] = entry_st.refused;
  for (std::uint32_t j = 0; j < t; ++j) report.stats["fabric.refused.processor." + std::to_string(j + 1)] = proc_st[j].refused;
  report.stats["fabric.refused.client"] = client_st.refused;
  report.first_ns = arrivals.empty() ? 0 : arrivals.front();
  report.last_ns = sim.now();
  return report;
}

// ---------------------------------------------------------------------------
// Calibration

namespace detail {

template <typename F>
double median_ns_per_call(std::size_t calls, F&& f) {
  constexpr std::size_t batches = 15;
  const std::size_t per_batch = std::max<std::size_t>(1, calls / batches);
  std::vector<double> samples;
  for (std::size_t b = 0; b < batches; ++b) {
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t k = 0; k < per_batch; ++k) f(b * per_batch + k);
    const auto end = std::chrono::steady_clock::now();
    samples.push_back(std::chrono::duration<double, std::nano>(end - start).count() / static_cast<double>(per_batch));
  }
  std::nth_element(samples.begin(), samples.begin() + batches / 2, samples.end());
  return samples[batches / 2];
}

}  // namespace detail

// Measures the real handlers of this configuration on this machine. The
// per-evaluation cost is taken from compute_match over the digest table, so
// table size effects are included.
inline ServiceProfile calibrate_profile(const SetupBundle& bundle, std::span<const Packet> sample, std::size_t calls = 3000) {
  if (sample.empty()) throw ContractViolation("calibrate_profile needs sample packets");
  const ProtocolParams& params = bundle.entry.params;
  ServiceProfile prof;

  ProtocolParams p1 = params;
  p1.rho_num = p1.rho_den = 1;
  EntryState entry(EntryConfig{p1, bundle.entry.blinds}, RandomSource::seeded(7));
  std::vector<IngestResult> ingested;
  ingested.reserve(calls);
  std::size_t payload_total = 0;
  const double entry_ns = detail::median_ns_per_call(calls, [&](std::size_t k) {
    const Packet& p = sample[k % sample.size()];
    payload_total += p.payload.size();
    auto r = entry.ingest(p);
    for (auto& m : r.messages) (void)encode(m.msg);
    ingested.push_back(std::move(r));
  });
  const double mean_payload = static_cast<double>(payload_total) / static_cast<double>(std::max<std::size_t>(1, ingested.size()));
  // Split the cost between a fixed part and a per-byte part using a copy
  // microbenchmark for the latter.
  {
    std::vector<std::uint8_t> src(std::max<std::size_t>(1, static_cast<std::size_t>(mean_payload))), dst(src.size());
    const double copy_ns = detail::median_ns_per_call(calls, [&](std::size_t k) {
      src[k % src.size()] = static_cast<std::uint8_t>(k);
      std::copy(src.begin(), src.end(), dst.begin());
      asm volatile("" : : "r"(dst.data()) : "memory");
    });
    // x_w body and its encoded datagram each copy the payload once more.
    prof.entry_per_byte_ns = 3.0 * copy_ns / static_cast<double>(src.size());
    prof.entry_base_ns = std::max(1.0, entry_ns - prof.entry_per_byte_ns * mean_payload);
  }

  const ProcessorState proc(bundle.processors.front());
  const auto& cfg = proc.config();
  std::vector<WireMessage> to_proc;
  for (const auto& r : ingested) {
    for (const auto& m : r.messages) {
      if (m.to == Destination::to_processor(cfg.id)) to_proc.push_back(m.msg);
    }
  }
  std::size_t evals_total = 0, handled = 0;
  const double proc_ns = detail::median_ns_per_call(calls, [&](std::size_t k) {
    std::size_t e = 0;
    auto wire = encode(to_proc[k % to_proc.size()]);
    auto out = proc.handle(decode(wire, params.n), e);
    if (out) (void)encode(*out);
    evals_total += e;
    ++handled;
  });
  if (cfg.table.match_count() > 0) {
    const MatchHasher hasher(params.q);
    RandomSource rng = RandomSource::seeded(11);
    std::vector<std::pair<CounterIndex, MatchId>> cells;
    std::vector<BitString> readers;
    // Rows advance with the counter, as in the pipeline.
    for (std::size_t k = 0; k < 4096; ++k) {
      cells.emplace_back(CounterIndex{static_cast<std::uint32_t>(k % params.l + 1)},
                         static_cast<MatchId>(rng.uniform(0, cfg.table.match_count() - 1)));
      readers.push_back(rng.bits(params.n));
    }
    std::size_t sink = 0;
    prof.processor_per_eval_ns = detail::median_ns_per_call(calls * 4, [&](std::size_t k) {
      const auto& [i, j] = cells[k % cells.size()];
      sink += compute_match(readers[k % readers.size()], i, j, cfg.table, cfg.projections[j], hasher) ? 1 : 0;
    });
    asm volatile("" : : "r"(sink) : "memory");
  } else {
    prof.processor_per_eval_ns = 0;
  }
  const double mean_evals = static_cast<double>(evals_total) / static_cast<double>(std::max<std::size_t>(1, handled));
  prof.processor_base_ns = std::max(1.0, proc_ns - prof.processor_per_eval_ns * mean_evals);

  // Client: the t+1 messages of each packet, merged on the last one.
  std::vector<std::vector<std::vector<std::uint8_t>>> per_packet;
  std::vector<std::unique_ptr<ProcessorState>> procs;
  for (const auto& pc : bundle.processors) procs.push_back(std::make_unique<ProcessorState>(pc));
  for (std::size_t k = 0; k < std::min<std::size_t>(ingested.size(), 512); ++k) {
    std::vector<std::vector<std::uint8_t>> msgs;
    for (const auto& m : ingested[k].messages) {
      if (m.to.kind == Destination::Kind::client) {
        msgs.push_back(encode(m.msg));
      } else {
        msgs.push_back(encode(*procs[m.to.processor - 1]->handle(m.msg)));
      }
    }
    per_packet.push_back(std::move(msgs));
  }
  std::optional<ClientState> st;
  const double client_ns = detail::median_ns_per_call(calls, [&](std::size_t k) {
    const std::size_t at = k % per_packet.size();
    if (at == 0) st.emplace(bundle.client, ClientOptions{});
    for (const auto& m : per_packet[at]) (void)st->handle(std::span<const std::uint8_t>(m), 0);
  });
  // Whole per-packet cost spread evenly over its t+1 messages.
  prof.client_message_ns = std::max(1.0, client_ns / static_cast<double>(params.t + 1));
  prof.client_per_byte_ns = 0;
  prof.client_merge_ns = 0;
  return prof;
}

}  // namespace splitbox::fabric
