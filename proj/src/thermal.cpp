#include "qmln/thermal.hpp"

#include <algorithm>
#include <cmath>

#include "qmln/errors.hpp"
#include "qmln/numeric.hpp"
#include "qmln/rng.hpp"

namespace qmln {

double LocalTerm::max_abs() const {
  double m = 0.0;
  for (double v : diagonal) m = std::max(m, std::abs(v));
  return m;
}

DiagonalHamiltonian build_hamiltonian(const GroundNetwork& net) {
  DiagonalHamiltonian h;
  h.n = net.num_atoms();
  double beta = 0.0;
  for (const auto& c : net.cliques) beta = std::max(beta, std::abs(c.weight));
  h.beta = beta > 0.0 ? beta : 1.0;
  for (const auto& c : net.cliques) {
    LocalTerm term;
    term.support = c.support;
    term.diagonal.resize(c.sat_table.size(), 0.0);
    for (std::size_t a = 0; a < c.sat_table.size(); ++a) {
      if (c.sat_table[a]) term.diagonal[a] = -c.weight / h.beta;
    }
    h.terms.push_back(std::move(term));
  }
  return h;
}

double energy_of_world(const DiagonalHamiltonian& h, const World& world) {
  if (world.size() != h.n) throw ModelError("world length mismatch");
  double e = 0.0;
  for (const auto& t : h.terms) {
    int idx = 0;
    for (std::size_t i = 0; i < t.support.size(); ++i) {
      idx |= (world.get(t.support[i]) ? 1 : 0) << i;
    }
    e += t.diagonal[idx];
  }
  return e;
}

namespace {

double energy_of_bits(const DiagonalHamiltonian& h, std::uint64_t bits) {
  double e = 0.0;
  for (const auto& t : h.terms) {
    int idx = 0;
    for (std::size_t i = 0; i < t.support.size(); ++i) {
      idx |= static_cast<int>((bits >> t.support[i]) & 1) << i;
    }
    e += t.diagonal[idx];
  }
  return e;
}

void check_limit(int n, const ExactLimits& limits) {
  if (n > limits.max_enumeration_atoms) {
    throw LimitError("thermal distribution over " + std::to_string(n) +
                     " atoms exceeds the enumeration limit of " +
                     std::to_string(limits.max_enumeration_atoms));
  }
}

}  // namespace

ThermalDistribution thermal_distribution(const DiagonalHamiltonian& h,
                                         const ExactLimits& limits) {
  check_limit(h.n, limits);
  const std::uint64_t num_worlds = std::uint64_t{1} << h.n;
  std::vector<double> log_weights(num_worlds);
  LogSumExp acc;
  for (std::uint64_t w = 0; w < num_worlds; ++w) {
    log_weights[w] = -h.beta * energy_of_bits(h, w);
    acc.add(log_weights[w]);
  }
  const double log_z = acc.value();
  ThermalDistribution dist;
  dist.probabilities.resize(num_worlds);
  for (std::uint64_t w = 0; w < num_worlds; ++w) {
    dist.probabilities[w] = std::exp(log_weights[w] - log_z);
  }
  dist.log_z.log_z = log_z;
  dist.log_z.method = Method::thermal;
  dist.log_z.diagnostics["beta"] = std::to_string(h.beta);
  return dist;
}

std::vector<World> sample_thermal(const DiagonalHamiltonian& h, long count, std::uint64_t seed,
                                  const ExactLimits& limits) {
  ThermalDistribution dist = thermal_distribution(h, limits);
  std::vector<double> cdf(dist.probabilities.size());
  double run = 0.0;
  for (std::size_t i = 0; i < dist.probabilities.size(); ++i) {
    run += dist.probabilities[i];
    cdf[i] = run;
  }
  cdf.back() = 1.0;
  SplitMix64 rng(seed);
  std::vector<World> out;
  out.reserve(count);
  for (long s = 0; s < count; ++s) {
    const double u = rng.uniform();
    const std::size_t idx =
        std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
    World w(h.n);
    for (int b = 0; b < h.n; ++b) w.set(b, (idx >> b) & 1);
    out.push_back(std::move(w));
  }
  return out;
}

DiagonalHamiltonian clamp_evidence(const DiagonalHamiltonian& h, const Evidence& evidence,
                                   double gamma) {
  if (gamma <= 0.0) throw ModelError("clamping strength must be positive");
  DiagonalHamiltonian out = h;
  for (const auto& [atom, value] : evidence.assignments) {
    if (atom < 0 || atom >= h.n) throw ModelError("evidence atom index out of range");
    LocalTerm term;
    term.support = {atom};
    term.diagonal = {0.0, 0.0};
    term.diagonal[value ? 0 : 1] = gamma;  // penalize the contradicting assignment
    out.terms.push_back(std::move(term));
  }
  return out;
}

GroundNetwork reduce_by_evidence(const GroundNetwork& net, const Evidence& evidence) {
  for (const auto& [atom, value] : evidence.assignments) {
    if (atom < 0 || atom >= net.num_atoms()) {
      throw ModelError("evidence atom index out of range");
    }
  }
  if (evidence.empty()) return net;

  // Position mapping for surviving atoms.
  std::vector<int> new_index(net.num_atoms(), -1);
  GroundNetwork out;
  out.log_offset = net.log_offset;
  out.formula_weights = net.formula_weights;
  for (int a = 0; a < net.num_atoms(); ++a) {
    if (evidence.assignments.count(a)) continue;
    new_index[a] = out.atom_table.size();
    const auto& e = net.atom_table.atoms[a];
    out.atom_table.index.emplace(ground_atom_name(e.predicate, e.args),
                                 static_cast<int>(out.atom_table.atoms.size()));
    out.atom_table.atoms.push_back(e);
  }

  for (const auto& c : net.cliques) {
    std::vector<int> kept_pos;       // positions within the old support
    std::vector<int> kept_atoms;     // new atom indices
    int fixed_bits = 0;
    for (std::size_t i = 0; i < c.support.size(); ++i) {
      auto ev = evidence.assignments.find(c.support[i]);
      if (ev == evidence.assignments.end()) {
        kept_pos.push_back(static_cast<int>(i));
        kept_atoms.push_back(new_index[c.support[i]]);
      } else if (ev->second) {
        fixed_bits |= 1 << i;
      }
    }
    Clique reduced;
    reduced.formula_id = c.formula_id;
    reduced.weight = c.weight;
    reduced.support = kept_atoms;
    const std::size_t entries = std::size_t{1} << kept_pos.size();
    reduced.sat_table.resize(entries);
    bool all_true = true, all_false = true;
    for (std::size_t a = 0; a < entries; ++a) {
      int full = fixed_bits;
      for (std::size_t i = 0; i < kept_pos.size(); ++i) {
        full |= static_cast<int>((a >> i) & 1) << kept_pos[i];
      }
      reduced.sat_table[a] = c.sat_table[full];
      (reduced.sat_table[a] ? all_false : all_true) = false;
    }
    if (all_true) {
      out.log_offset += c.weight;  // satisfied regardless of the free atoms
      continue;
    }
    if (all_false) {
      continue;  // unsatisfied groundings carry weight zero: factor one
    }
    out.cliques.push_back(std::move(reduced));
  }
  return out;
}

ComplexityReport complexity_bound(long n, int d, double beta, double log_z, double epsilon,
                                  double kappa) {
  if (epsilon <= 0.0 || epsilon >= 1.0) throw ModelError("epsilon must be in (0, 1)");
  if (d < 2) throw ModelError("local dimension must be at least 2");
  if (beta <= 0.0) throw ModelError("beta must be positive");
  ComplexityReport report;
  report.n = n;
  report.d = d;
  report.beta = beta;
  report.log_z = log_z;
  report.epsilon = epsilon;
  report.kappa = kappa;
  const double f = std::exp(0.5 * (n * std::log(static_cast<double>(d)) + std::log(beta) - log_z));
  report.bound_value = f * std::pow(std::max(1.0, std::log2(f / epsilon)), kappa);
  report.classical_reference =
      std::exp(n * std::log(static_cast<double>(d)) - 2.0 * std::log(epsilon));
  return report;
}

}  // namespace qmln
