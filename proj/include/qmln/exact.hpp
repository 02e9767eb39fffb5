#pragma once

#include <map>
#include <optional>
#include <string>

#include "qmln/ground.hpp"

namespace qmln {

enum class Method { exact, ais, lifted, thermal };

std::string method_name(Method m);

struct PartitionEstimate {
  double log_z = 0.0;
  Method method = Method::exact;
  std::optional<double> std_error;           // present iff the method is stochastic
  std::map<std::string, std::string> diagnostics;
};

// Fixed truth values for a subset of ground atoms, keyed by atom index.
struct Evidence {
  std::map<int, bool> assignments;

  bool empty() const { return assignments.empty(); }
  int size() const { return static_cast<int>(assignments.size()); }
};

struct ExactLimits {
  int max_enumeration_atoms = 24;
};

// log Z = log sum_w exp(sum_j w_j N(f_j, w)) by streaming log-sum-exp over
// all 2^n worlds. Parallel over fixed world-index blocks; the reduction tree
// does not depend on the thread count, so results are deterministic.
PartitionEstimate log_partition_exact(const GroundNetwork& net, const ExactLimits& limits = {});

// sum_j w_j N(f_j, w) - log Z.
double world_log_prob(const GroundNetwork& net, const World& world,
                      const ExactLimits& limits = {});

// P(query = true | evidence), by enumeration over consistent worlds.
double query_marginal_exact(const GroundNetwork& net, int query_atom, const Evidence& evidence,
                            const ExactLimits& limits = {});

// Exact marginals for all non-evidence atoms.
std::map<int, double> all_marginals_exact(const GroundNetwork& net, const Evidence& evidence,
                                          const ExactLimits& limits = {});

}  // namespace qmln
