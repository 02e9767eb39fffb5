#include "qmln/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <thread>

#include "qmln/errors.hpp"
#include "qmln/numeric.hpp"

namespace qmln {

void SamplerConfig::validate() const {
  if (burn_in < 0) throw ModelError("burn_in must be >= 0");
  if (samples < 1) throw ModelError("samples must be >= 1");
  if (thinning < 1) throw ModelError("thinning must be >= 1");
  if (chains < 1) throw ModelError("chains must be >= 1");
  if (ais_ladder < 1) throw ModelError("ais_ladder must be >= 1");
  if (ais_sweeps_per_step < 1) throw ModelError("ais_sweeps_per_step must be >= 1");
}

namespace {

// Cliques touching each atom, with the atom's position in the support.
struct Adjacency {
  std::vector<std::vector<std::pair<int, int>>> by_atom;

  explicit Adjacency(const GroundNetwork& net) : by_atom(net.num_atoms()) {
    for (std::size_t c = 0; c < net.cliques.size(); ++c) {
      const auto& support = net.cliques[c].support;
      for (std::size_t i = 0; i < support.size(); ++i) {
        by_atom[support[i]].push_back({static_cast<int>(c), static_cast<int>(i)});
      }
    }
  }
};

double conditional_from_adjacency(const GroundNetwork& net, const Adjacency& adj,
                                  const World& world, int atom, double weight_scale) {
  double delta = 0.0;
  for (const auto& [ci, pos] : adj.by_atom[atom]) {
    const Clique& c = net.cliques[ci];
    int idx = 0;
    for (std::size_t i = 0; i < c.support.size(); ++i) {
      idx |= (world.get(c.support[i]) ? 1 : 0) << i;
    }
    const int idx_true = idx | (1 << pos);
    const int idx_false = idx & ~(1 << pos);
    delta += c.weight * (c.sat_table[idx_true] - c.sat_table[idx_false]);
  }
  return sigmoid(weight_scale * delta);
}

int thread_count() {
  if (const char* env = std::getenv("QMLN_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

World random_world(const GroundNetwork& net, const Evidence& evidence, SplitMix64& rng) {
  World w(net.num_atoms());
  for (int a = 0; a < net.num_atoms(); ++a) w.set(a, rng.bernoulli(0.5));
  for (const auto& [atom, value] : evidence.assignments) w.set(atom, value);
  return w;
}

void sweep(const GroundNetwork& net, const Adjacency& adj, const Evidence& evidence, World& w,
           SplitMix64& rng, double weight_scale) {
  for (int a = 0; a < net.num_atoms(); ++a) {
    if (evidence.assignments.count(a)) continue;
    const double p = conditional_from_adjacency(net, adj, w, a, weight_scale);
    w.set(a, rng.bernoulli(p));
  }
}

}  // namespace

double heat_bath_conditional(const GroundNetwork& net, const World& world, int atom_index,
                             double weight_scale) {
  if (atom_index < 0 || atom_index >= net.num_atoms()) {
    throw ModelError("atom index out of range");
  }
  Adjacency adj(net);
  return conditional_from_adjacency(net, adj, world, atom_index, weight_scale);
}

ChainState heat_bath_step(const GroundNetwork& net, const ChainState& state, int atom_index) {
  if (atom_index < 0 || atom_index >= net.num_atoms()) {
    throw ModelError("atom index out of range");
  }
  if (state.world.size() != net.num_atoms()) throw ModelError("world length mismatch");
  ChainState next = state;
  const double p = heat_bath_conditional(net, state.world, atom_index);
  next.world.set(atom_index, next.rng.bernoulli(p));
  return next;
}

std::vector<World> run_chains(const GroundNetwork& net, const Evidence& evidence,
                              const SamplerConfig& config) {
  config.validate();
  for (const auto& [atom, value] : evidence.assignments) {
    if (atom < 0 || atom >= net.num_atoms()) {
      throw ModelError("evidence atom index out of range");
    }
  }
  const Adjacency adj(net);
  std::vector<std::vector<World>> per_chain(config.chains);
  auto run_chain = [&](int chain) {
    SplitMix64 rng = SplitMix64::stream(config.seed, chain);
    World w = random_world(net, evidence, rng);
    for (int s = 0; s < config.burn_in; ++s) sweep(net, adj, evidence, w, rng, 1.0);
    per_chain[chain].reserve(config.samples);
    for (int s = 0; s < config.samples; ++s) {
      for (int t = 0; t < config.thinning; ++t) sweep(net, adj, evidence, w, rng, 1.0);
      per_chain[chain].push_back(w);
    }
  };
  const int workers = std::min(thread_count(), config.chains);
  if (workers <= 1) {
    for (int c = 0; c < config.chains; ++c) run_chain(c);
  } else {
    std::vector<std::future<void>> futures;
    for (int t = 0; t < workers; ++t) {
      futures.push_back(std::async(std::launch::async, [&, t] {
        for (int c = t; c < config.chains; c += workers) run_chain(c);
      }));
    }
    for (auto& f : futures) f.get();
  }
  std::vector<World> merged;
  merged.reserve(static_cast<std::size_t>(config.chains) * config.samples);
  for (auto& chain : per_chain) {
    for (auto& w : chain) merged.push_back(std::move(w));
  }
  return merged;
}

MarginalEstimate estimate_marginals(const std::vector<World>& samples,
                                    const std::vector<int>& query_atoms) {
  if (samples.empty()) throw ModelError("cannot estimate marginals from zero samples");
  MarginalEstimate est;
  const long n = static_cast<long>(samples.size());
  const long batches = std::max(2L, std::min(n, static_cast<long>(std::sqrt(double(n)))));
  const long batch_size = n / batches;
  for (int atom : query_atoms) {
    long total = 0;
    for (const auto& w : samples) total += w.get(atom) ? 1 : 0;
    const double mean = static_cast<double>(total) / static_cast<double>(n);
    est.mean[atom] = mean;
    // batch means over equal-size prefixal batches
    double var_acc = 0.0;
    int used = 0;
    for (long b = 0; b < batches; ++b) {
      const long lo = b * batch_size;
      const long hi = (b == batches - 1) ? n : lo + batch_size;
      if (hi <= lo) continue;
      long c = 0;
      for (long i = lo; i < hi; ++i) c += samples[i].get(atom) ? 1 : 0;
      const double bm = static_cast<double>(c) / static_cast<double>(hi - lo);
      var_acc += (bm - mean) * (bm - mean);
      ++used;
    }
    est.std_error[atom] =
        used > 1 ? std::sqrt(var_acc / (used * (used - 1.0))) : 0.0;
  }
  return est;
}

PartitionEstimate estimate_log_z_ais(const GroundNetwork& net, const SamplerConfig& config) {
  config.validate();
  const Adjacency adj(net);
  const int n = net.num_atoms();
  const int K = config.ais_ladder;

  auto lambda_at = [&](int k) -> double {
    if (k <= 0) return 0.0;
    if (k >= K) return 1.0;
    if (config.schedule == LadderSchedule::linear) {
      return static_cast<double>(k) / static_cast<double>(K);
    }
    // geometric: lambda_1 = 1e-3 rising to 1
    const double lambda1 = 1e-3;
    return lambda1 * std::pow(1.0 / lambda1, static_cast<double>(k - 1) / (K - 1));
  };

  std::vector<double> chain_log_weights(config.chains);
  Evidence no_evidence;
  auto run_chain = [&](int chain) {
    SplitMix64 rng = SplitMix64::stream(config.seed, chain);
    World w = random_world(net, no_evidence, rng);
    double log_weight = 0.0;
    for (int k = 1; k <= K; ++k) {
      log_weight += (lambda_at(k) - lambda_at(k - 1)) * net.log_weight(w);
      for (int s = 0; s < config.ais_sweeps_per_step; ++s) {
        sweep(net, adj, no_evidence, w, rng, lambda_at(k));
      }
    }
    chain_log_weights[chain] = log_weight;
  };
  const int workers = std::min(thread_count(), config.chains);
  if (workers <= 1) {
    for (int c = 0; c < config.chains; ++c) run_chain(c);
  } else {
    std::vector<std::future<void>> futures;
    for (int t = 0; t < workers; ++t) {
      futures.push_back(std::async(std::launch::async, [&, t] {
        for (int c = t; c < config.chains; c += workers) run_chain(c);
      }));
    }
    for (auto& f : futures) f.get();
  }

  const double log_z0 = n * std::log(2.0);
  const double log_mean =
      log_sum_exp(std::span<const double>(chain_log_weights)) - std::log(double(config.chains));

  // Bootstrap over chains for the standard error of the log estimate.
  double se = 0.0;
  if (config.chains > 1) {
    constexpr int kBootstrap = 200;
    SplitMix64 boot(config.seed ^ 0xb007b007b007ULL);
    std::vector<double> resampled(config.chains);
    double mean_acc = 0.0, sq_acc = 0.0;
    for (int b = 0; b < kBootstrap; ++b) {
      for (int i = 0; i < config.chains; ++i) {
        resampled[i] = chain_log_weights[boot.next() % config.chains];
      }
      const double v = log_sum_exp(std::span<const double>(resampled)) -
                       std::log(double(config.chains));
      mean_acc += v;
      sq_acc += v * v;
    }
    const double m = mean_acc / kBootstrap;
    se = std::sqrt(std::max(0.0, sq_acc / kBootstrap - m * m));
  }

  PartitionEstimate est;
  est.log_z = log_z0 + log_mean;
  est.method = Method::ais;
  est.std_error = se;
  est.diagnostics["generator"] = "splitmix64, one stream per chain";
  est.diagnostics["ladder"] =
      config.schedule == LadderSchedule::linear ? "linear" : "geometric";
  est.diagnostics["ladder_steps"] = std::to_string(K);
  est.diagnostics["chains"] = std::to_string(config.chains);
  return est;
}

}  // namespace qmln
