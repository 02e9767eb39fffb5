#pragma once

#include <cstdint>
#include <vector>

#include "qmln/exact.hpp"
#include "qmln/ground.hpp"

namespace qmln {

// One diagonal term acting on the ground atoms in `support`. Entry a of
// `diagonal` is the energy contribution when the support atoms take the
// assignment with bit i of a equal to support position i.
struct LocalTerm {
  std::vector<int> support;
  std::vector<double> diagonal;

  double max_abs() const;
};

// H = sum_l h_l, diagonal in the truth-assignment basis. beta = max_j |w_j|
// (1 when all weights are zero). The energy of a world equals
// -sum_j w_j N(f_j, w) / beta, so exp(-beta H) reproduces the MLN measure.
struct DiagonalHamiltonian {
  int n = 0;
  double beta = 1.0;
  std::vector<LocalTerm> terms;
};

struct ComplexityReport {
  long n = 0;
  int d = 2;
  double beta = 1.0;
  double log_z = 0.0;
  double epsilon = 0.0;
  double kappa = 2.0;
  double bound_value = 0.0;
  double classical_reference = 0.0;  // d^n / epsilon^2, taking delta = 1/d^n
};

struct ThermalDistribution {
  std::vector<double> probabilities;  // 2^n entries, world index = atom bits
  PartitionEstimate log_z;            // method = thermal
};

// One term per clique: -w/beta on satisfying assignments, 0 elsewhere.
DiagonalHamiltonian build_hamiltonian(const GroundNetwork& net);

double energy_of_world(const DiagonalHamiltonian& h, const World& world);

// P(w) = exp(-beta E(w)) / Z. H is diagonal, so the trace is a plain sum.
ThermalDistribution thermal_distribution(const DiagonalHamiltonian& h,
                                         const ExactLimits& limits = {});

// Exact inverse-CDF samples from the thermal distribution.
std::vector<World> sample_thermal(const DiagonalHamiltonian& h, long count, std::uint64_t seed,
                                  const ExactLimits& limits = {});

// Adds one single-site penalty term per evidence atom: +gamma on the
// assignment contradicting the evidence. gamma must be positive. The clamp
// terms intentionally exceed the unit norm of the clique terms.
DiagonalHamiltonian clamp_evidence(const DiagonalHamiltonian& h, const Evidence& evidence,
                                   double gamma);

// Restricts every clique table by the evidence and drops the evidence atoms
// from the network. Cliques that become constant-true fold into log_offset;
// constant-false cliques contribute factor one and are dropped. The result's
// distribution over the remaining atoms is the conditional distribution.
GroundNetwork reduce_by_evidence(const GroundNetwork& net, const Evidence& evidence);

// Upper-bound shape sqrt(d^n beta / Z) * max(1, log2(.)/epsilon)^kappa and the
// 1/(delta epsilon^2) classical reference. Constants are a reporting
// convention, not a measured quantity.
ComplexityReport complexity_bound(long n, int d, double beta, double log_z, double epsilon,
                                  double kappa = 2.0);

}  // namespace qmln
