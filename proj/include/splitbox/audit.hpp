#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "splitbox/bundle.hpp"
#include "splitbox/fabric.hpp"
#include "splitbox/hash.hpp"
#include "splitbox/nfmodel.hpp"
#include "splitbox/protocol.hpp"
#include "splitbox/wire.hpp"

// Structural privacy audit of everything a processor can see: its decoded
// configuration bundle and every message it receives or sends. Each n-bit
// field is compared against the secrets it must never equal.
namespace splitbox::audit {

struct Finding {
  std::string where;   // e.g. "bundle processor 1 share 3 alpha"
  std::string secret;  // e.g. "match 4"
};

struct AuditReport {
  std::uint64_t fields_scanned = 0;
  std::uint64_t digests_scanned = 0;
  std::uint64_t messages_scanned = 0;
  std::uint64_t trivial_secrets = 0;  // all-zero values, not distinguishable from chance
  // Digest cells where the blind is zero on the match's fixed bits, so the
  // cell equals H(match). Happens with probability 2^-w per cell.
  std::uint64_t blind_coincidences = 0;
  double expected_coincidences = 0;
  std::vector<Finding> findings;

  bool clean() const noexcept { return findings.empty(); }
};

class ProcessorAudit {
 public:
  // Secrets are the tree's matches and actions, the blind table and the
  // plaintext headers of the traffic.
  ProcessorAudit(const PolicyTree& tree, const BlindTable& blinds, std::span<const Packet> traffic, std::uint32_t q)
      : n_(tree.bits()), hasher_(q) {
    const PolicyCatalog cat = PolicyCatalog::of(tree);
    for (std::size_t j = 0; j < cat.matches.size(); ++j) {
      add(cat.matches[j].value(), "match " + std::to_string(j));
      match_digests_.emplace(key(hasher_.hash(cat.matches[j].value())), j);
      projections_.push_back(cat.matches[j].care());
    }
    for (std::size_t a = 0; a < cat.actions.size(); ++a) {
      add(cat.actions[a].value(), "action " + std::to_string(a) + " value");
      add(projection(cat.actions[a]), "action " + std::to_string(a) + " projection");
    }
    for (std::size_t i = 0; i < blinds.size(); ++i) add(blinds.blinds()[i], "blind " + std::to_string(i + 1));
    blinds_ = blinds.blinds();
    for (std::size_t k = 0; k < traffic.size(); ++k) add(traffic[k].header, "header of packet " + std::to_string(k));
  }

  // Decodes a processor bundle from its bytes and scans the shares and the
  // digest table. Projections of matches are public to processors and are
  // not scanned.
  void scan_bundle(std::span<const std::uint8_t> bytes) {
    const ProcessorConfig cfg = decode_processor_bundle(bytes);
    const std::string at = "bundle processor " + std::to_string(cfg.id);
    for (const auto& sh : cfg.shares) {
      check(sh.alpha, at + " share " + std::to_string(sh.action) + " alpha");
      check(sh.beta, at + " share " + std::to_string(sh.action) + " beta");
    }
    const auto& table = cfg.table;
    for (std::uint32_t i = 1; i <= table.rows(); ++i) {
      for (MatchId j = 0; j < table.match_count(); ++j) {
        ++report_.digests_scanned;
        if (j < projections_.size()) report_.expected_coincidences += std::ldexp(1.0, -static_cast<int>(projections_[j].weight()));
        const auto d = table.digest(CounterIndex{i}, j);
        auto it = match_digests_.find(key(d));
        if (it == match_digests_.end()) continue;
        const std::size_t m = it->second;
        if (i <= blinds_.size() && mask(projections_[m], blinds_[i - 1]).is_zero()) {
          ++report_.blind_coincidences;
        } else {
          report_.findings.push_back({at + " digest [" + std::to_string(i) + "][" + std::to_string(j) + "]",
                                      "H(match " + std::to_string(m) + ")"});
        }
      }
    }
  }

  // MessageTap-compatible observer for processor traffic.
  void observe(fabric::Endpoint from, fabric::Endpoint to, ProcessorId proc, std::span<const std::uint8_t> bytes) {
    if (from != fabric::Endpoint::processor && to != fabric::Endpoint::processor) return;
    ++report_.messages_scanned;
    const WireMessage m = decode(bytes, n_);
    const std::string at = std::string(from == fabric::Endpoint::processor ? "sent by" : "received by") + " processor " +
                           std::to_string(proc) + " seq " + std::to_string(m.seq);
    const std::size_t nb = bytes_for_bits(n_);
    for (std::size_t off = 0; off + nb <= m.body.size(); off += nb) {
      check(BitString::from_bytes(std::span(m.body).subspan(off, nb), n_), at + " field " + std::to_string(off / nb));
    }
  }

  fabric::MessageTap tap() {
    return [this](fabric::Endpoint f, fabric::Endpoint t, ProcessorId p, std::span<const std::uint8_t> b) { observe(f, t, p, b); };
  }

  const AuditReport& report() const noexcept { return report_; }

 private:
  static std::string key(std::span<const std::uint8_t> b) { return {b.begin(), b.end()}; }

  void add(const BitString& value, std::string label) {
    if (value.is_zero()) {
      ++report_.trivial_secrets;
      return;
    }
    secrets_.emplace(key(value.bytes()), std::move(label));
  }

  void check(const BitString& field, const std::string& where) {
    ++report_.fields_scanned;
    if (auto it = secrets_.find(key(field.bytes())); it != secrets_.end()) report_.findings.push_back({where, it->second});
  }

  std::size_t n_;
  MatchHasher hasher_;
  std::unordered_map<std::string, std::string> secrets_;
  std::unordered_map<std::string, std::size_t> match_digests_;
  std::vector<BitString> projections_;
  std::vector<BitString> blinds_;
  AuditReport report_;
};

}  // namespace splitbox::audit
