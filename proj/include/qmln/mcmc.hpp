#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "qmln/exact.hpp"
#include "qmln/ground.hpp"
#include "qmln/rng.hpp"

namespace qmln {

enum class LadderSchedule { linear, geometric };

struct SamplerConfig {
  std::uint64_t seed = 1;
  int burn_in = 100;      // sweeps discarded per chain
  int samples = 1000;     // samples collected per chain
  int thinning = 1;       // sweeps between collected samples
  int chains = 1;
  int ais_ladder = 32;    // intermediate inverse-temperature steps
  LadderSchedule schedule = LadderSchedule::linear;
  int ais_sweeps_per_step = 1;

  void validate() const;
};

struct ChainState {
  World world;
  SplitMix64 rng;
  long sweep_count = 0;

  ChainState(World w, SplitMix64 r) : world(std::move(w)), rng(r) {}
};

// Resamples atom_index from its exact conditional P(x_i | rest) = sigmoid of
// the weighted satisfaction difference over the cliques containing it. All
// other bits are unchanged; deterministic given the chain's rng state.
ChainState heat_bath_step(const GroundNetwork& net, const ChainState& state, int atom_index);

// The conditional probability used by the heat-bath update (exposed so the
// detailed-balance property is directly checkable).
double heat_bath_conditional(const GroundNetwork& net, const World& world, int atom_index,
                             double weight_scale = 1.0);

// Runs `chains` independent chains with one splitmix64 stream per chain.
// Evidence atoms are clamped and never resampled. A sweep updates every free
// atom once in atom order; samples are collected every `thinning` sweeps
// after `burn_in` sweeps and merged in chain order.
std::vector<World> run_chains(const GroundNetwork& net, const Evidence& evidence,
                              const SamplerConfig& config);

struct MarginalEstimate {
  std::map<int, double> mean;
  std::map<int, double> std_error;  // batch-means standard error
};

MarginalEstimate estimate_marginals(const std::vector<World>& samples,
                                    const std::vector<int>& query_atoms);

// Annealed importance sampling from the all-weights-zero network
// (log Z_0 = n log 2) to the full weights along a ladder of weight scales.
// Returns log-mean-exp of the per-chain importance weights plus a bootstrap
// standard error.
PartitionEstimate estimate_log_z_ais(const GroundNetwork& net, const SamplerConfig& config);

}  // namespace qmln
