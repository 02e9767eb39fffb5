#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qmln/exact.hpp"
#include "qmln/ground.hpp"
#include "qmln/logic.hpp"
#include "qmln/mcmc.hpp"

namespace qmln {

// Anything that can estimate log Z of a fully ground network. The lifted
// dispatcher only ever hands over networks within the sampler's limits.
class BaseSampler {
 public:
  virtual ~BaseSampler() = default;
  virtual PartitionEstimate log_partition(const GroundNetwork& net) = 0;
  virtual std::string name() const = 0;
};

class ExactBaseSampler : public BaseSampler {
 public:
  explicit ExactBaseSampler(ExactLimits limits = {}) : limits_(limits) {}
  PartitionEstimate log_partition(const GroundNetwork& net) override;
  std::string name() const override { return "exact"; }

 private:
  ExactLimits limits_;
};

class ThermalBaseSampler : public BaseSampler {
 public:
  explicit ThermalBaseSampler(ExactLimits limits = {}) : limits_(limits) {}
  PartitionEstimate log_partition(const GroundNetwork& net) override;
  std::string name() const override { return "thermal"; }

 private:
  ExactLimits limits_;
};

// AIS leaves draw per-call seeds from one stream so repeated runs with the
// same master seed reproduce identical results.
class AisBaseSampler : public BaseSampler {
 public:
  explicit AisBaseSampler(SamplerConfig config) : config_(config) {}
  PartitionEstimate log_partition(const GroundNetwork& net) override;
  std::string name() const override { return "ais"; }

 private:
  SamplerConfig config_;
  long calls_ = 0;
};

// ---------------------------------------------------------------------------
// Lifting rules
// ---------------------------------------------------------------------------

struct LiftConfig {
  bool enable_decomposer = true;
  bool enable_isolated = false;  // off by default; enable after oracle validation
  bool enable_binomial = true;
  // dispatch order of the structural rules
  std::vector<std::string> rule_order = {"decomposer", "isolated", "binomial"};
  long max_fallback_branches = 4096;
  int max_isolated_formulas = 6;
  bool memoize = true;
};

// A decomposer: one variable per formula, occupying one fixed position per
// predicate, all over a common domain. Substituting a single constant for the
// set splits the network into |domain| identical copies.
struct Decomposer {
  std::vector<std::string> formula_vars;          // per formula index
  std::map<std::string, int> predicate_position;  // predicate -> decomposer position
  std::string domain;
};

// Linear scan; `operations` (if given) counts atom-argument visits.
std::optional<Decomposer> find_decomposer(const KnowledgeBase& kb, long* operations = nullptr);

// Retypes the decomposer positions to a fresh one-constant domain.
// log Z(kb) = exponent * log Z(sub).
struct DecomposerApplication {
  KnowledgeBase sub;
  long exponent = 1;
};
DecomposerApplication apply_decomposer(const KnowledgeBase& kb, const Decomposer& dec);

struct LiftBranch {
  double log_multiplier = 0.0;
  KnowledgeBase sub;
  std::string note;
};

// Sums out a predicate with isolated argument positions in closed form,
// re-encoding the coupling to the rest of the network as reweighted formulas.
// log Z(kb) = log_multiplier + log Z(sub). Absent when no predicate
// qualifies or the rule is disabled.
struct IsolatedApplication {
  double log_multiplier = 0.0;
  KnowledgeBase sub;
  std::string note;
};
std::optional<IsolatedApplication> apply_isolated_variable(const KnowledgeBase& kb,
                                                           const LiftConfig& config = {});

// Branches on the number i of true groundings of a unary predicate that
// appears at most once per formula. Branch i carries
// log C(|D|, i) + (weights of formulas decided true) + p_i log 2.
// log Z(kb) = logsumexp_i(multiplier_i + log Z(sub_i)).
std::optional<std::vector<LiftBranch>> apply_generalized_binomial(const KnowledgeBase& kb);

// Conditions on all 2^g assignments to the groundings of the predicate with
// the fewest groundings (ties broken by name).
std::vector<LiftBranch> ground_fallback(const KnowledgeBase& kb, const LiftConfig& config = {});

// ---------------------------------------------------------------------------
// Trace and dispatcher
// ---------------------------------------------------------------------------

struct LiftStep {
  std::string rule;    // base | memo | free_atoms | decomposer | isolated | binomial | ground
  std::string target;
  double multiplier = 0.0;  // log-space (free_atoms, isolated)
  long exponent = 1;        // decomposer
  std::optional<PartitionEstimate> leaf;  // base
  std::vector<std::pair<double, std::shared_ptr<const LiftStep>>> branches;
};

struct LiftTrace {
  std::shared_ptr<const LiftStep> root;

  // Recombines the recorded multipliers with the leaf estimates; the
  // dispatcher computes its result this way, so replay is bit-identical.
  double replay_log_z() const;
  double replay_variance() const;
  // Flat preorder listing: rule, target, multiplier, branch count.
  struct FlatStep {
    std::string rule;
    std::string target;
    double multiplier;
    long branch_count;
  };
  std::vector<FlatStep> steps() const;
};

// Algorithm: hand fully ground networks to the base sampler; otherwise apply
// the structural rules in configured order and fall back to conditioning on
// one predicate's groundings. Memoizes sub-results on a canonical form that
// identifies KBs up to constant renaming.
std::pair<PartitionEstimate, LiftTrace> lifted_log_z(const KnowledgeBase& kb, BaseSampler& base,
                                                     const LiftConfig& config = {});

// Removes predicates that occur in no formula (each removed ground atom
// contributes a factor of two) and domains no predicate references.
struct StripResult {
  KnowledgeBase kb;
  long removed_ground_atoms = 0;
};
StripResult strip_unreferenced(const KnowledgeBase& kb);

// Canonical memoization key: equal for KBs that differ only by constant
// names. Domain and predicate names are kept, constants are reduced to
// cardinalities, and formula order and variable names are normalized.
std::string canonical_memo_key(const KnowledgeBase& kb);

}  // namespace qmln
