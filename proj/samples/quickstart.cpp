// A two-policy network function over 16-bit headers, evaluated privately by
// two processors and reassembled by the client.
#include <cstdio>
#include <deque>

#include "splitbox/splitbox.hpp"

using namespace splitbox;

int main() {
  auto T = [](const char* s) { return TriStateString::from_text(s); };
  // Headers starting 1111 are dropped; headers starting 0000 get their low
  // byte rewritten to 10101010. Everything else passes unchanged.
  const PolicyTree tree = build_chain({{T("1111************"), T("0000000000000000")},
                                       {T("0000************"), T("********10101010")}});

  ProtocolParams params;
  params.n = 16;
  params.l = 8;
  params.delta_min = 4;
  auto rng = RandomSource::seeded(42);
  const SetupBundle bundle = global_setup(params, tree, rng);

  EntryState entry(bundle.entry, RandomSource::seeded(1));
  std::deque<ProcessorState> processors;
  for (const auto& pc : bundle.processors) processors.emplace_back(pc);
  ClientState client(bundle.client);

  for (const char* h : {"1111000011110000", "0000110011001100", "0101010101010101"}) {
    const Packet in{BitString::from_text(h), {}, 0};
    for (const auto& om : entry.ingest(in).messages) {
      WireMessage msg = om.msg;
      if (om.to.kind == Destination::Kind::processor) msg = *processors[om.to.processor - 1].handle(msg);
      if (auto v = client.handle(msg, 0)) {
        const Packet want = traverse(tree, in);
        std::printf("%s -> %s %s (plaintext evaluation: %s)\n", h,
                    v->kind == VerdictKind::forwarded ? "forward" : "drop",
                    v->kind == VerdictKind::forwarded ? v->packet.header.to_string().c_str() : "",
                    want.header.is_zero() ? "drop" : want.header.to_string().c_str());
      }
    }
  }
}
