#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "splitbox/bench.hpp"
#include "splitbox/bundle.hpp"
#include "splitbox/firewall.hpp"
#include "splitbox/udp.hpp"

using namespace splitbox;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

firewall::Trace load_trace(const std::string& source, std::uint64_t seed) {
  if (source.starts_with("gen:")) {
    auto rng = RandomSource::seeded(seed);
    return firewall::generate_trace(bench::parse_trace_spec(source), rng);
  }
  return firewall::decode_trace(firewall::read_file_bytes(source));
}

std::string verdict_line(const Verdict& v) {
  std::string line = std::to_string(v.seq) + "," + (v.kind == VerdictKind::forwarded ? "forwarded" : "dropped");
  if (v.kind == VerdictKind::forwarded) {
    const auto tuple = firewall::decode_header(v.packet.header);
    line += "," + firewall::format_ip(tuple.src) + "," + firewall::format_ip(tuple.dst) + "," +
            std::to_string(tuple.proto) + "," + std::to_string(tuple.sport) + "," + std::to_string(tuple.dport) + "," +
            std::to_string(v.packet.payload.size());
  } else {
    line += ",,,,,,";
  }
  return line;
}

struct BenchArgs {
  std::string mode;
  std::string rules;
  std::string trace;
  std::string out;
  std::uint32_t t = 2;
  std::vector<std::uint32_t> l;
  std::vector<double> rho;
  std::vector<std::size_t> rule_counts;
  std::vector<std::uint32_t> workers;
  std::vector<double> loads;
  std::size_t packets = 0;
  std::string carrier = "inproc";
  std::string profile = "reference";
  std::uint64_t seed = 1;
  bool no_nat = false;
};

int run_bench_command(const BenchArgs& a) {
  bench::BenchConfig cfg;
  cfg.mode = bench::parse_mode(a.mode);
  cfg.t = a.t;
  cfg.seed = a.seed;
  if (!a.l.empty()) cfg.l_values = a.l;
  if (!a.rho.empty()) cfg.rho_values = a.rho;
  if (!a.rule_counts.empty()) cfg.rule_counts = a.rule_counts;
  if (!a.workers.empty()) cfg.workers = a.workers;
  if (!a.loads.empty()) cfg.loads = a.loads;
  cfg.nat_variant = !a.no_nat;
  if (cfg.mode == bench::Mode::lsweep && a.l.empty()) cfg.l_values = {64, 256, 1024, 4096, 16384, 65536};
  if (cfg.mode == bench::Mode::dummyrate && a.rho.empty()) cfg.rho_values = {1.0, 0.75, 0.5, 0.25};
  if (cfg.mode == bench::Mode::latency && a.rule_counts.empty()) cfg.rule_counts = {1, 30, 60};
  if ((cfg.mode == bench::Mode::lsweep || cfg.mode == bench::Mode::dummyrate) && a.rule_counts.empty()) {
    cfg.rule_counts = {10};
  }
  if (a.carrier == "udp") {
    cfg.carrier = bench::Carrier::udp;
  } else if (a.carrier != "inproc") {
    throw ConfigError("carrier must be inproc or udp");
  }
  if (a.profile == "measured") {
    cfg.profile = bench::ProfileKind::measured;
  } else if (a.profile != "reference") {
    throw ConfigError("profile must be reference or measured");
  }
  if (!a.rules.empty()) cfg.rules = firewall::parse_rules(firewall::read_file_text(a.rules));
  if (!a.trace.empty()) {
    if (a.trace.starts_with("gen:")) {
      cfg.trace_spec = bench::parse_trace_spec(a.trace);
    } else {
      cfg.trace = firewall::decode_trace(firewall::read_file_bytes(a.trace));
    }
  }
  if (a.packets > 0) cfg.trace_spec.count = a.packets;

  const auto rep = bench::run_bench(cfg);
  const std::string csv = bench::to_csv(rep);
  if (a.out.empty()) {
    std::cout << csv;
  } else {
    std::ofstream(a.out) << csv;
  }
  std::cerr << bench::to_text(rep);
  return rep.ok() ? 0 : 1;
}

struct SetupArgs {
  std::string rules;
  std::string out_dir;
  std::uint32_t t = 2;
  std::uint32_t l = 1024;
  std::uint32_t q = 160;
  double rho = 1.0;
  std::uint64_t seed = 0;
  bool allow_weak = false;
};

int run_setup_command(const SetupArgs& a) {
  const auto rules = firewall::parse_rules(firewall::read_file_text(a.rules));
  const PolicyTree tree = firewall::compile_rules(rules);
  ProtocolParams p;
  p.t = a.t;
  p.l = a.l;
  p.q = a.q;
  set_rho(p, a.rho);
  auto rng = a.seed ? RandomSource::seeded(a.seed) : RandomSource::os();
  const SetupBundle b = global_setup(p, tree, rng, SetupOptions{a.allow_weak});

  const std::filesystem::path dir(a.out_dir);
  std::filesystem::create_directories(dir);
  firewall::write_file_bytes((dir / "entry.spbx").string(), encode_bundle(b.entry));
  for (const auto& pc : b.processors) {
    firewall::write_file_bytes((dir / ("processor-" + std::to_string(pc.id) + ".spbx")).string(), encode_bundle(pc));
  }
  firewall::write_file_bytes((dir / "client.spbx").string(), encode_bundle(b.client));
  std::cerr << "wrote " << (b.processors.size() + 2) << " bundles to " << dir.string() << "\n";
  return 0;
}

struct RunArgs {
  std::string role;
  std::string config;
  std::string listen = "127.0.0.1:0";
  std::vector<std::string> peers;
  std::string client;
  std::string trace;
  std::string out;
  double rate = 10'000;
  int idle_ms = 0;
  std::size_t expect = 0;
  double timeout_ms = 1000;
  std::uint64_t seed = 0;
};

int run_role_command(const RunArgs& a) {
  const auto bytes = firewall::read_file_bytes(a.config);
  udp::Socket sock(udp::Address::parse(a.listen));
  std::cerr << a.role << " listening on " << sock.local().to_string() << "\n";
  const udp::ServeOptions serve{a.idle_ms, &g_stop};

  if (a.role == "processor") {
    if (a.peers.size() != 1) throw ConfigError("a processor needs exactly one --peer (the client)");
    const ProcessorState proc(decode_processor_bundle(bytes));
    udp::serve_processor(proc, sock, udp::Address::parse(a.peers.front()), serve);
    std::cerr << format_stats(proc.stats());
    return 0;
  }
  if (a.role == "client") {
    ClientOptions opts;
    opts.timeout_ns = static_cast<TimeNs>(a.timeout_ms * 1e6);
    ClientState client(decode_client_bundle(bytes), opts);
    std::ofstream file;
    if (!a.out.empty()) file.open(a.out);
    std::ostream& out = a.out.empty() ? std::cout : file;
    out << "seq,verdict,src,dst,proto,sport,dport,payload_len\n";
    std::size_t seen = 0;
    udp::serve_client(
        client, sock,
        [&](const udp::ClientEvent& e) {
          out << verdict_line(e.verdict) << "\n";
          ++seen;
        },
        serve, [&] { return a.expect > 0 && seen >= a.expect; });
    std::cerr << format_stats(client.stats().snapshot());
    return 0;
  }
  if (a.role == "entry") {
    if (a.client.empty()) throw ConfigError("the entry needs --client");
    if (a.trace.empty()) throw ConfigError("the entry needs --trace");
    udp::EntryPeers peers;
    for (const auto& peer : a.peers) peers.processors.push_back(udp::Address::parse(peer));
    peers.client = udp::Address::parse(a.client);
    const auto packets = firewall::to_packets(load_trace(a.trace, a.seed ? a.seed : 1));
    EntryState entry(decode_entry_bundle(bytes), a.seed ? RandomSource::seeded(a.seed) : RandomSource::os());
    udp::serve_entry(entry, sock, peers, packets, a.rate);
    std::cerr << format_stats(entry.stats().snapshot());
    return 0;
  }
  throw ConfigError("role must be entry, processor or client");
}

struct TraceArgs {
  std::string spec = "gen:";
  std::string out;
  std::uint64_t seed = 1;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"splitbox: private network-function evaluation across split middleboxes"};
  app.require_subcommand(1);

  BenchArgs bench_args;
  auto* bench_cmd = app.add_subcommand("bench", "Run a benchmark mode and write CSV");
  bench_cmd->add_option("mode", bench_args.mode, "equivalence | throughput | latency | lsweep | dummyrate")->required();
  bench_cmd->add_option("--rules", bench_args.rules, "Ruleset file (default: generated per rule count)");
  bench_cmd->add_option("--trace", bench_args.trace, "Trace file or gen:key=value,...");
  bench_cmd->add_option("--t", bench_args.t, "Number of processors")->check(CLI::Range(2, 255));
  bench_cmd->add_option("--l", bench_args.l, "Counter range(s)")->delimiter(',');
  bench_cmd->add_option("--rho", bench_args.rho, "Real-packet probability(ies)")->delimiter(',');
  bench_cmd->add_option("--rule-counts", bench_args.rule_counts, "Rule counts for generated rulesets")->delimiter(',');
  bench_cmd->add_option("--workers", bench_args.workers, "Processor worker counts")->delimiter(',');
  bench_cmd->add_option("--loads", bench_args.loads, "Latency load fractions")->delimiter(',');
  bench_cmd->add_option("--packets", bench_args.packets, "Generated trace length");
  bench_cmd->add_option("--carrier", bench_args.carrier, "inproc | udp");
  bench_cmd->add_option("--profile", bench_args.profile, "reference | measured service costs");
  bench_cmd->add_option("--seed", bench_args.seed, "Base seed");
  bench_cmd->add_flag("--no-nat", bench_args.no_nat, "Equivalence: skip the rewrite-action variant");
  bench_cmd->add_option("--out", bench_args.out, "CSV output path (default: stdout)");

  SetupArgs setup_args;
  auto* setup_cmd = app.add_subcommand("setup", "Compile a ruleset and write role config bundles");
  setup_cmd->add_option("--rules", setup_args.rules, "Ruleset file")->required();
  setup_cmd->add_option("--out-dir", setup_args.out_dir, "Output directory")->required();
  setup_cmd->add_option("--t", setup_args.t, "Number of processors")->check(CLI::Range(2, 255));
  setup_cmd->add_option("--l", setup_args.l, "Counter range");
  setup_cmd->add_option("--q", setup_args.q, "Digest width, 160 or 256");
  setup_cmd->add_option("--rho", setup_args.rho, "Real-packet probability");
  setup_cmd->add_option("--seed", setup_args.seed, "Deterministic setup seed (default: OS entropy)");
  setup_cmd->add_flag("--allow-weak-matches", setup_args.allow_weak, "Accept matches with fewer than the minimum fixed bits");

  RunArgs run_args;
  auto* run_cmd = app.add_subcommand("run", "Serve one role over UDP");
  run_cmd->add_option("role", run_args.role, "entry | processor | client")->required();
  run_cmd->add_option("--config", run_args.config, "Role config bundle")->required();
  run_cmd->add_option("--listen", run_args.listen, "Local host:port");
  run_cmd->add_option("--peer", run_args.peers, "Processor: the client. Entry: processors in id order");
  run_cmd->add_option("--client", run_args.client, "Entry: client host:port");
  run_cmd->add_option("--trace", run_args.trace, "Entry: trace file or gen:key=value,...");
  run_cmd->add_option("--rate", run_args.rate, "Entry: packets per second (0: unpaced)");
  run_cmd->add_option("--out", run_args.out, "Client: verdict CSV path (default: stdout)");
  run_cmd->add_option("--expect", run_args.expect, "Client: stop after this many verdicts");
  run_cmd->add_option("--timeout-ms", run_args.timeout_ms, "Client: reassembly timeout");
  run_cmd->add_option("--idle-ms", run_args.idle_ms, "Stop after this long without traffic (0: never)");
  run_cmd->add_option("--seed", run_args.seed, "Entry: dummy and trace seed");

  TraceArgs trace_args;
  auto* trace_cmd = app.add_subcommand("trace", "Generate a trace file");
  trace_cmd->add_option("spec", trace_args.spec, "gen:key=value,...");
  trace_cmd->add_option("--out", trace_args.out, "Output path")->required();
  trace_cmd->add_option("--seed", trace_args.seed, "Generator seed");

  CLI11_PARSE(app, argc, argv);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  try {
    if (*bench_cmd) return run_bench_command(bench_args);
    if (*setup_cmd) return run_setup_command(setup_args);
    if (*run_cmd) return run_role_command(run_args);
    if (*trace_cmd) {
      auto rng = RandomSource::seeded(trace_args.seed);
      const auto trace = firewall::generate_trace(bench::parse_trace_spec(trace_args.spec), rng);
      firewall::write_file_bytes(trace_args.out, firewall::encode_trace(trace));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
