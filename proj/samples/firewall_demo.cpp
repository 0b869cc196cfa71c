// Compiles a firewall ruleset, runs a generated trace through the simulated
// deployment and checks every verdict against the plaintext filter.
#include <cstdio>
#include <string>

#include "splitbox/splitbox.hpp"

using namespace splitbox;

int main(int argc, char** argv) {
  const std::string rules_text = argc > 1 ? firewall::read_file_text(argv[1])
                                          : "drop src=172.16.0.0/12 proto=6\n"
                                            "allow dst=192.168.0.0/16 proto=6 dport=443\n"
                                            "drop dst=192.168.0.0/16 proto=6 dport=22\n"
                                            "drop dst=192.168.0.0/16 proto=17 dport=1024-2047\n";
  const auto rules = firewall::parse_rules(rules_text);
  std::printf("%s", firewall::format_rules(rules).c_str());

  auto rng = RandomSource::seeded(7);
  firewall::TraceSpec spec;
  spec.count = 5000;
  const auto trace = firewall::generate_trace(spec, rng);
  const auto packets = firewall::to_packets(trace);

  ProtocolParams params;
  params.t = 3;
  set_rho(params, 0.75);
  const SetupBundle bundle = global_setup(params, firewall::compile_rules(rules), rng);

  fabric::Topology topo;
  topo.pacer.rate_pps = 50'000;
  const auto report = fabric::run_topology(topo, bundle, packets);

  const auto reference = firewall::reference_filter(rules, trace);
  std::size_t agree = 0;
  for (std::size_t k = 0; k < packets.size(); ++k) {
    const bool allowed = reference[k].verdict == firewall::RuleAction::allow;
    if (allowed == (report.packets[k].outcome == fabric::Outcome::forwarded)) ++agree;
  }
  std::printf("\n%zu/%zu verdicts agree with the plaintext filter\n\n", agree, packets.size());
  std::printf("%s", format_stats(report.stats).c_str());
  return agree == packets.size() ? 0 : 1;
}
