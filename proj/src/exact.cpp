#include "qmln/exact.hpp"

#include <cstdlib>
#include <future>
#include <thread>
#include <vector>

#include "qmln/errors.hpp"
#include "qmln/numeric.hpp"

namespace qmln {

std::string method_name(Method m) {
  switch (m) {
    case Method::exact:
      return "exact";
    case Method::ais:
      return "ais";
    case Method::lifted:
      return "lifted";
    case Method::thermal:
      return "thermal";
  }
  return "unknown";
}

namespace {

int thread_count() {
  if (const char* env = std::getenv("QMLN_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void check_limit(const GroundNetwork& net, const ExactLimits& limits) {
  if (net.num_atoms() > limits.max_enumeration_atoms) {
    throw LimitError("network has " + std::to_string(net.num_atoms()) +
                     " atoms, exceeding the enumeration limit of " +
                     std::to_string(limits.max_enumeration_atoms));
  }
}

double clique_log_weight(const GroundNetwork& net, std::uint64_t world_bits) {
  double s = 0.0;
  for (const auto& c : net.cliques) {
    int idx = 0;
    for (std::size_t i = 0; i < c.support.size(); ++i) {
      idx |= static_cast<int>((world_bits >> c.support[i]) & 1) << i;
    }
    s += c.sat_table[idx] ? c.weight : 0.0;
  }
  return s;
}

// Per-block partials are combined in block order regardless of how the
// blocks were scheduled.
template <typename Fn>
double enumerate_log_sum(std::uint64_t num_worlds, Fn&& log_weight_of) {
  constexpr std::uint64_t kBlock = 1 << 14;
  const std::uint64_t blocks = (num_worlds + kBlock - 1) / kBlock;
  std::vector<LogSumExp> partials(blocks);
  auto run_block = [&](std::uint64_t b) {
    const std::uint64_t lo = b * kBlock;
    const std::uint64_t hi = std::min(num_worlds, lo + kBlock);
    LogSumExp acc;
    for (std::uint64_t w = lo; w < hi; ++w) acc.add(log_weight_of(w));
    partials[b] = acc;
  };
  const int workers = std::min<std::uint64_t>(thread_count(), blocks);
  if (workers <= 1 || blocks == 1) {
    for (std::uint64_t b = 0; b < blocks; ++b) run_block(b);
  } else {
    std::vector<std::future<void>> futures;
    for (int t = 0; t < workers; ++t) {
      futures.push_back(std::async(std::launch::async, [&, t] {
        for (std::uint64_t b = t; b < blocks; b += workers) run_block(b);
      }));
    }
    for (auto& f : futures) f.get();
  }
  LogSumExp total;
  for (const auto& p : partials) total.merge(p);
  return total.value();
}

}  // namespace

PartitionEstimate log_partition_exact(const GroundNetwork& net, const ExactLimits& limits) {
  check_limit(net, limits);
  const std::uint64_t num_worlds = std::uint64_t{1} << net.num_atoms();
  double log_z =
      enumerate_log_sum(num_worlds, [&](std::uint64_t w) { return clique_log_weight(net, w); });
  PartitionEstimate est;
  est.log_z = log_z + net.log_offset;
  est.method = Method::exact;
  est.diagnostics["worlds"] = std::to_string(num_worlds);
  return est;
}

double world_log_prob(const GroundNetwork& net, const World& world, const ExactLimits& limits) {
  if (world.size() != net.num_atoms()) throw ModelError("world length mismatch");
  check_limit(net, limits);
  const std::uint64_t num_worlds = std::uint64_t{1} << net.num_atoms();
  double log_z =
      enumerate_log_sum(num_worlds, [&](std::uint64_t w) { return clique_log_weight(net, w); });
  return net.log_weight(world) - log_z;
}

namespace {

struct EvidenceMask {
  std::uint64_t mask = 0;
  std::uint64_t value = 0;
};

EvidenceMask evidence_mask(const GroundNetwork& net, const Evidence& evidence) {
  EvidenceMask m;
  for (const auto& [atom, val] : evidence.assignments) {
    if (atom < 0 || atom >= net.num_atoms()) {
      throw ModelError("evidence atom index " + std::to_string(atom) + " out of range");
    }
    m.mask |= std::uint64_t{1} << atom;
    if (val) m.value |= std::uint64_t{1} << atom;
  }
  return m;
}

}  // namespace

double query_marginal_exact(const GroundNetwork& net, int query_atom, const Evidence& evidence,
                            const ExactLimits& limits) {
  check_limit(net, limits);
  if (query_atom < 0 || query_atom >= net.num_atoms()) {
    throw ModelError("query atom index out of range");
  }
  if (evidence.assignments.count(query_atom)) {
    throw ModelError("query atom is fixed by the evidence");
  }
  const EvidenceMask em = evidence_mask(net, evidence);
  const std::uint64_t num_worlds = std::uint64_t{1} << net.num_atoms();
  const std::uint64_t qbit = std::uint64_t{1} << query_atom;
  double log_true = enumerate_log_sum(num_worlds, [&](std::uint64_t w) {
    if ((w & em.mask) != em.value || !(w & qbit)) return kNegInf;
    return clique_log_weight(net, w);
  });
  double log_all = enumerate_log_sum(num_worlds, [&](std::uint64_t w) {
    if ((w & em.mask) != em.value) return kNegInf;
    return clique_log_weight(net, w);
  });
  return std::exp(log_true - log_all);
}

std::map<int, double> all_marginals_exact(const GroundNetwork& net, const Evidence& evidence,
                                          const ExactLimits& limits) {
  std::map<int, double> out;
  for (int a = 0; a < net.num_atoms(); ++a) {
    if (evidence.assignments.count(a)) continue;
    out[a] = query_marginal_exact(net, a, evidence, limits);
  }
  return out;
}

}  // namespace qmln
