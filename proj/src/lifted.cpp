#include "qmln/lifted.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <set>
#include <unordered_map>

#include "qmln/errors.hpp"
#include "qmln/normalize.hpp"
#include "qmln/numeric.hpp"
#include "qmln/thermal.hpp"

namespace qmln {

PartitionEstimate ExactBaseSampler::log_partition(const GroundNetwork& net) {
  return log_partition_exact(net, limits_);
}

PartitionEstimate ThermalBaseSampler::log_partition(const GroundNetwork& net) {
  DiagonalHamiltonian h = build_hamiltonian(net);
  PartitionEstimate est = thermal_distribution(h, limits_).log_z;
  est.log_z += net.log_offset;
  return est;
}

PartitionEstimate AisBaseSampler::log_partition(const GroundNetwork& net) {
  SamplerConfig leaf_config = config_;
  leaf_config.seed = SplitMix64::stream(config_.seed, static_cast<std::uint64_t>(calls_)).next();
  ++calls_;
  PartitionEstimate est = estimate_log_z_ais(net, leaf_config);
  est.log_z += net.log_offset;
  return est;
}

// ---------------------------------------------------------------------------
// Helpers
// ---------------------------------------------------------------------------

namespace {

long domain_size(const KnowledgeBase& kb, const std::string& name) {
  const DomainDecl* d = kb.find_domain(name);
  if (!d) throw ModelError("unknown domain " + name);
  return static_cast<long>(d->constants.size());
}

long groundings_of_predicate(const KnowledgeBase& kb, const PredicateDecl& p) {
  long g = 1;
  for (const auto& dn : p.argument_domains) g *= domain_size(kb, dn);
  return g;
}

// Product of the domain sizes of a formula's free variables.
long binding_count(const KnowledgeBase& kb, const Formula& f) {
  long g = 1;
  for (const auto& [var, dom] : free_variables(kb, f)) g *= domain_size(kb, dom);
  return g;
}

}  // namespace

StripResult strip_unreferenced(const KnowledgeBase& kb) {
  std::set<std::string> used_preds;
  for (const auto& wf : kb.formulas) {
    for (const Atom& atom : collect_atoms(*wf.formula)) used_preds.insert(atom.predicate);
  }
  StripResult res;
  std::set<std::string> used_domains;
  for (const auto& p : kb.predicates) {
    if (used_preds.count(p.name)) {
      res.kb.predicates.push_back(p);
      for (const auto& d : p.argument_domains) used_domains.insert(d);
    } else {
      res.removed_ground_atoms += groundings_of_predicate(kb, p);
    }
  }
  for (const auto& d : kb.domains) {
    if (used_domains.count(d.name)) res.kb.domains.push_back(d);
  }
  res.kb.formulas = kb.formulas;
  return res;
}

std::string canonical_memo_key(const KnowledgeBase& kb) {
  std::string key;
  std::vector<const DomainDecl*> doms;
  for (const auto& d : kb.domains) doms.push_back(&d);
  std::sort(doms.begin(), doms.end(),
            [](const DomainDecl* a, const DomainDecl* b) { return a->name < b->name; });
  for (const auto* d : doms) {
    key += "d:" + d->name + "#" + std::to_string(d->constants.size()) + ";";
  }
  std::vector<const PredicateDecl*> preds;
  for (const auto& p : kb.predicates) preds.push_back(&p);
  std::sort(preds.begin(), preds.end(),
            [](const PredicateDecl* a, const PredicateDecl* b) { return a->name < b->name; });
  for (const auto* p : preds) {
    key += "p:" + p->name + "(";
    for (const auto& d : p->argument_domains) key += d + ",";
    key += ");";
  }
  std::vector<std::string> rendered;
  for (const auto& wf : kb.formulas) {
    // normalize variable names by first occurrence
    std::map<std::string, std::string> renaming;
    int next = 0;
    for (const Atom& atom : collect_atoms(*wf.formula)) {
      for (const Term& t : atom.args) {
        if (t.is_variable() && !renaming.count(t.name)) {
          renaming[t.name] = "v" + std::to_string(next++);
        }
      }
    }
    char wbuf[64];
    std::snprintf(wbuf, sizeof(wbuf), "%.17g", wf.weight);
    rendered.push_back(std::string(wbuf) + " " +
                       render(*rename_variables(wf.formula, renaming)));
  }
  std::sort(rendered.begin(), rendered.end());
  for (const auto& r : rendered) key += "f:" + r + ";";
  return key;
}

// ---------------------------------------------------------------------------
// Decomposer
// ---------------------------------------------------------------------------

std::optional<Decomposer> find_decomposer(const KnowledgeBase& kb, long* operations) {
  long ops = 0;
  const int F = static_cast<int>(kb.formulas.size());
  if (F == 0) {
    if (operations) *operations = ops;
    return std::nullopt;
  }

  std::vector<std::vector<Atom>> atoms(F);
  std::vector<std::map<std::string, std::string>> var_domain(F);
  std::map<std::string, std::vector<int>> formulas_of_pred;
  for (int f = 0; f < F; ++f) {
    atoms[f] = collect_atoms(*kb.formulas[f].formula);
    for (const auto& [v, d] : free_variables(kb, *kb.formulas[f].formula)) {
      var_domain[f][v] = d;
    }
    for (const auto& a : atoms[f]) {
      auto& lst = formulas_of_pred[a.predicate];
      if (lst.empty() || lst.back() != f) lst.push_back(f);
    }
  }

  // Propagates the choice of formula f0's representative variable across the
  // connected component; returns the per-formula choices on success.
  auto propagate = [&](int f0, const std::string& v0, std::vector<std::string>& chosen,
                       std::map<std::string, int>& pos) -> bool {
    std::deque<int> todo;
    auto assign = [&](int f, const std::string& v) -> bool {
      if (!chosen[f].empty()) return chosen[f] == v;
      chosen[f] = v;
      for (const Atom& a : atoms[f]) {
        int where = -1;
        for (int i = 0; i < static_cast<int>(a.args.size()); ++i) {
          ++ops;
          if (a.args[i].is_variable() && a.args[i].name == v) {
            if (where >= 0) return false;  // twice in one atom
            where = i;
          }
        }
        if (where < 0) return false;  // an atom without the representative
        auto [it, inserted] = pos.emplace(a.predicate, where);
        if (!inserted) {
          if (it->second != where) return false;
        } else {
          for (int g : formulas_of_pred[a.predicate]) todo.push_back(g);
        }
      }
      return true;
    };
    if (!assign(f0, v0)) return false;
    while (!todo.empty()) {
      int g = todo.front();
      todo.pop_front();
      if (!chosen[g].empty()) {
        // verify already-chosen formulas against any newly fixed positions
        for (const Atom& a : atoms[g]) {
          auto it = pos.find(a.predicate);
          if (it == pos.end()) continue;
          ++ops;
          const Term& t = a.args[it->second];
          if (!t.is_variable() || t.name != chosen[g]) return false;
        }
        continue;
      }
      // forced choice: the variable at a fixed position of some atom
      std::string forced;
      for (const Atom& a : atoms[g]) {
        auto it = pos.find(a.predicate);
        if (it == pos.end()) continue;
        ++ops;
        const Term& t = a.args[it->second];
        if (!t.is_variable()) return false;
        forced = t.name;
        break;
      }
      if (forced.empty()) continue;  // not actually constrained yet
      if (!assign(g, forced)) return false;
    }
    return true;
  };

  // Candidate variables of a formula: those contained in every atom.
  auto candidates = [&](int f) {
    std::vector<std::string> cand;
    for (const auto& [v, d] : var_domain[f]) {
      bool everywhere = true;
      for (const Atom& a : atoms[f]) {
        ++ops;
        bool found = false;
        for (const Term& t : a.args) {
          if (t.is_variable() && t.name == v) found = true;
        }
        if (!found) {
          everywhere = false;
          break;
        }
      }
      if (everywhere) cand.push_back(v);
    }
    return cand;
  };

  // Process connected components independently; a global decomposer needs one
  // common domain across all of them.
  std::vector<bool> done(F, false);

  // Option sets per component keyed by domain.
  std::vector<std::map<std::string, std::pair<std::vector<std::string>, std::map<std::string, int>>>>
      component_options;
  std::vector<std::vector<int>> component_formulas;
  for (int f0 = 0; f0 < F; ++f0) {
    if (done[f0]) continue;
    std::map<std::string, std::pair<std::vector<std::string>, std::map<std::string, int>>> options;
    std::vector<int> members;
    for (const std::string& v : candidates(f0)) {
      std::vector<std::string> chosen(F);
      std::map<std::string, int> pos;
      if (!propagate(f0, v, chosen, pos)) continue;
      if (members.empty()) {
        for (int f = 0; f < F; ++f) {
          if (!chosen[f].empty()) members.push_back(f);
        }
      }
      const std::string dom = var_domain[f0].at(v);
      options.emplace(dom, std::make_pair(std::move(chosen), std::move(pos)));
    }
    if (options.empty()) {
      if (operations) *operations = ops;
      return std::nullopt;
    }
    for (int f : members) done[f] = true;
    component_options.push_back(std::move(options));
    component_formulas.push_back(std::move(members));
  }

  // Intersect the domains available to every component.
  std::set<std::string> common;
  for (const auto& [dom, opt] : component_options[0]) common.insert(dom);
  for (std::size_t c = 1; c < component_options.size(); ++c) {
    std::set<std::string> next;
    for (const auto& [dom, opt] : component_options[c]) {
      if (common.count(dom)) next.insert(dom);
    }
    common.swap(next);
  }
  if (common.empty()) {
    if (operations) *operations = ops;
    return std::nullopt;
  }
  // Prefer the largest domain (most progress), ties by name.
  std::string best;
  long best_size = -1;
  for (const auto& dom : common) {
    long s = domain_size(kb, dom);
    if (s > best_size || (s == best_size && dom < best)) {
      best = dom;
      best_size = s;
    }
  }

  Decomposer dec;
  dec.domain = best;
  dec.formula_vars.assign(F, "");
  for (std::size_t c = 0; c < component_options.size(); ++c) {
    const auto& [chosen, pos] = component_options[c].at(best);
    for (int f : component_formulas[c]) dec.formula_vars[f] = chosen[f];
    for (const auto& [pred, p] : pos) dec.predicate_position[pred] = p;
  }
  if (operations) *operations = ops;
  return dec;
}

DecomposerApplication apply_decomposer(const KnowledgeBase& kb, const Decomposer& dec) {
  const DomainDecl* dom = kb.find_domain(dec.domain);
  if (!dom) throw ModelError("decomposer domain missing");

  std::set<std::string> taken;
  for (const auto& d : kb.domains) taken.insert(d.name);
  const std::string rep_name = unique_name(dec.domain + "_rep", taken);

  DecomposerApplication app;
  app.exponent = static_cast<long>(dom->constants.size());
  app.sub.domains = kb.domains;
  app.sub.domains.push_back(DomainDecl{rep_name, {dom->constants.front()}});
  for (const auto& p : kb.predicates) {
    PredicateDecl np = p;
    auto it = dec.predicate_position.find(p.name);
    if (it != dec.predicate_position.end()) {
      np.argument_domains[it->second] = rep_name;
    }
    app.sub.predicates.push_back(std::move(np));
  }
  app.sub.formulas = kb.formulas;
  return app;
}

// ---------------------------------------------------------------------------
// Conditioning helpers shared by the binomial and fallback rules
// ---------------------------------------------------------------------------

namespace {

struct ConditionOutcome {
  double log_multiplier = 0.0;  // true-formula weights plus orphan factors
  KnowledgeBase kb;             // simplified (conditioned predicates removed)
};

// Applies fixed truth values per predicate to every formula, extracting the
// weight contribution of formulas decided true, rescaling residual weights
// whose variables vanished, then removing the conditioned predicates and
// accounting removed orphan atoms.
ConditionOutcome condition_on_predicates(
    const KnowledgeBase& kb,
    const std::map<std::string, bool>& predicate_truth) {
  ConditionOutcome out;
  out.kb.domains = kb.domains;
  for (const auto& p : kb.predicates) {
    if (!predicate_truth.count(p.name)) out.kb.predicates.push_back(p);
  }
  for (const auto& wf : kb.formulas) {
    const long g_before = binding_count(kb, *wf.formula);
    PartialValue v = partial_evaluate(wf.formula, [&](const Atom& atom) -> std::optional<bool> {
      auto it = predicate_truth.find(atom.predicate);
      if (it == predicate_truth.end()) return std::nullopt;
      return it->second;
    });
    if (const bool* b = std::get_if<bool>(&v)) {
      if (*b) out.log_multiplier += wf.weight * static_cast<double>(g_before);
      continue;  // false: factor one per grounding
    }
    FormulaPtr residual = std::get<FormulaPtr>(v);
    const long g_after = binding_count(out.kb, *residual);
    const double scale = static_cast<double>(g_before) / static_cast<double>(g_after);
    out.kb.formulas.push_back(WeightedFormula{std::move(residual), wf.weight * scale});
  }
  StripResult stripped = strip_unreferenced(out.kb);
  out.log_multiplier += static_cast<double>(stripped.removed_ground_atoms) * std::log(2.0);
  out.kb = std::move(stripped.kb);
  return out;
}

// Splits `domain` into the given constant groups (empty groups skipped) and
// returns the shattered KB plus the variant names of `pred` per part.
struct SplitForConditioning {
  KnowledgeBase kb;
  std::map<std::string, std::string> part_of_variant;  // variant predicate -> part name
  std::vector<std::string> part_names;                 // in group order
};

}  // namespace

std::optional<std::vector<LiftBranch>> apply_generalized_binomial(const KnowledgeBase& kb) {
  for (const auto& r : kb.predicates) {
    if (r.arity() != 1) continue;
    bool applicable = false;
    bool blocked = false;
    for (const auto& wf : kb.formulas) {
      int count = 0;
      for (const Atom& a : collect_atoms(*wf.formula)) {
        if (a.predicate == r.name) ++count;
      }
      if (count > 1) blocked = true;
      if (count >= 1) applicable = true;
    }
    if (!applicable || blocked) continue;

    const DomainDecl* dom = kb.find_domain(r.argument_domains[0]);
    const long size = static_cast<long>(dom->constants.size());
    std::vector<LiftBranch> branches;
    for (long i = 0; i <= size; ++i) {
      // Split the domain into the first i constants (set true) and the rest.
      std::set<std::string> taken;
      for (const auto& d : kb.domains) taken.insert(d.name);
      DomainPartition partition;
      partition.domain = dom->name;
      std::vector<std::string> true_parts, false_parts;
      if (i > 0) {
        std::string name = unique_name(dom->name + "_t", taken);
        partition.parts.push_back(DomainDecl{
            name, {dom->constants.begin(), dom->constants.begin() + i}});
        true_parts.push_back(name);
      }
      if (i < size) {
        std::string name = unique_name(dom->name + "_f", taken);
        partition.parts.push_back(DomainDecl{
            name, {dom->constants.begin() + i, dom->constants.end()}});
        false_parts.push_back(name);
      }
      ShatterResult sh = shatter(kb, {partition});
      std::map<std::string, bool> truth;
      for (const auto& [combo, variant] : sh.predicate_variants.at(r.name)) {
        const bool is_true = std::find(true_parts.begin(), true_parts.end(), combo[0]) !=
                             true_parts.end();
        truth[variant] = is_true;
      }
      ConditionOutcome cond = condition_on_predicates(sh.kb, truth);
      LiftBranch branch;
      branch.log_multiplier = log_binomial(size, i) + cond.log_multiplier;
      branch.sub = std::move(cond.kb);
      branch.note = r.name + ": " + std::to_string(i) + " of " + std::to_string(size) +
                    " groundings true";
      branches.push_back(std::move(branch));
    }
    return branches;
  }
  return std::nullopt;
}

std::vector<LiftBranch> ground_fallback(const KnowledgeBase& kb, const LiftConfig& config) {
  // Atom choice: the predicate with the fewest groundings, ties by name.
  const PredicateDecl* best = nullptr;
  long best_groundings = 0;
  for (const auto& p : kb.predicates) {
    const long g = groundings_of_predicate(kb, p);
    if (!best || g < best_groundings || (g == best_groundings && p.name < best->name)) {
      best = &p;
      best_groundings = g;
    }
  }
  if (!best) throw ModelError("ground fallback on an empty knowledge base");
  if (best_groundings > 62 ||
      (std::int64_t{1} << best_groundings) > config.max_fallback_branches) {
    throw LimitError("ground fallback would create 2^" + std::to_string(best_groundings) +
                     " branches, exceeding the limit of " +
                     std::to_string(config.max_fallback_branches));
  }

  // Shatter every domain in the predicate's signature into singletons.
  std::set<std::string> split_domains(best->argument_domains.begin(),
                                      best->argument_domains.end());
  std::set<std::string> taken;
  for (const auto& d : kb.domains) taken.insert(d.name);
  std::vector<DomainPartition> partitions;
  for (const auto& dn : split_domains) {
    const DomainDecl* d = kb.find_domain(dn);
    if (d->constants.size() == 1) continue;
    DomainPartition part;
    part.domain = dn;
    for (const auto& c : d->constants) {
      part.parts.push_back(DomainDecl{unique_name(dn + "_s", taken), {c}});
    }
    partitions.push_back(std::move(part));
  }
  ShatterResult sh = shatter(kb, partitions);

  // Each variant of the chosen predicate now has exactly one grounding; the
  // bit position follows the variant order.
  const auto& variants = sh.predicate_variants.at(best->name);
  const int g = static_cast<int>(variants.size());

  std::vector<LiftBranch> branches;
  for (std::uint64_t assignment = 0; assignment < (std::uint64_t{1} << g); ++assignment) {
    std::map<std::string, bool> truth;
    for (int k = 0; k < g; ++k) {
      truth[variants[k].second] = (assignment >> k) & 1;
    }
    ConditionOutcome cond = condition_on_predicates(sh.kb, truth);
    LiftBranch branch;
    branch.log_multiplier = cond.log_multiplier;
    branch.sub = std::move(cond.kb);
    branch.note = best->name + " assignment " + std::to_string(assignment);
    branches.push_back(std::move(branch));
  }
  return branches;
}

// ---------------------------------------------------------------------------
// Isolated-variable rule
// ---------------------------------------------------------------------------

std::optional<IsolatedApplication> apply_isolated_variable(const KnowledgeBase& kb,
                                                           const LiftConfig& config) {
  if (!config.enable_isolated) return std::nullopt;

  for (const auto& r : kb.predicates) {
    // Gather the formulas containing r; each must contain exactly one r-atom
    // whose arguments are pairwise distinct variables covering all the
    // formula's variables.
    struct RFormula {
      int index;
      Atom atom;
    };
    std::vector<RFormula> r_formulas;
    bool ok = true;
    for (int f = 0; f < static_cast<int>(kb.formulas.size()) && ok; ++f) {
      std::vector<Atom> r_atoms;
      for (const Atom& a : collect_atoms(*kb.formulas[f].formula)) {
        if (a.predicate == r.name) r_atoms.push_back(a);
      }
      if (r_atoms.empty()) continue;
      if (r_atoms.size() > 1) {
        ok = false;
        break;
      }
      const Atom& atom = r_atoms[0];
      std::set<std::string> args;
      for (const Term& t : atom.args) {
        if (!t.is_variable() || !args.insert(t.name).second) {
          ok = false;
          break;
        }
      }
      if (!ok) break;
      for (const auto& [v, d] : free_variables(kb, *kb.formulas[f].formula)) {
        if (!args.count(v)) {
          ok = false;
          break;
        }
      }
      if (!ok) break;
      r_formulas.push_back({f, atom});
    }
    if (!ok || r_formulas.empty()) continue;
    if (static_cast<int>(r_formulas.size()) > config.max_isolated_formulas) continue;

    // A position is isolated when, in every formula containing r, its
    // variable occurs nowhere outside the r-atom.
    std::vector<bool> isolated(r.arity(), true);
    for (const auto& rf : r_formulas) {
      for (int m = 0; m < r.arity(); ++m) {
        const std::string& v = rf.atom.args[m].name;
        for (const Atom& a : collect_atoms(*kb.formulas[rf.index].formula)) {
          if (a == rf.atom) continue;
          for (const Term& t : a.args) {
            if (t.is_variable() && t.name == v) isolated[m] = false;
          }
        }
      }
    }
    std::vector<int> iso_positions, other_positions;
    for (int m = 0; m < r.arity(); ++m) {
      (isolated[m] ? iso_positions : other_positions).push_back(m);
    }
    if (iso_positions.empty()) continue;

    const double group_size = [&] {
      double g = 1;
      for (int m : iso_positions) g *= static_cast<double>(domain_size(kb, r.argument_domains[m]));
      return g;
    }();
    const long G = static_cast<long>(group_size);

    // Canonical variables for the non-isolated positions.
    std::map<int, std::string> canon;
    for (int m : other_positions) canon[m] = "y_" + std::to_string(m);

    // Residuals of each r-formula with the r-atom fixed true / false,
    // renamed to the canonical variables.
    struct Variant {
      int formula;
      bool fixed_value;     // true for the f_T variant
      FormulaPtr residual;  // non-constant residual
    };
    std::vector<Variant> bits;
    // constant satisfaction values when the residual is constant
    std::map<std::pair<int, bool>, int> constant_value;  // (formula, branch) -> 0/1
    for (const auto& rf : r_formulas) {
      std::map<std::string, std::string> renaming;
      for (int m : other_positions) renaming[rf.atom.args[m].name] = canon[m];
      for (bool branch : {true, false}) {
        PartialValue v = partial_evaluate(
            kb.formulas[rf.index].formula, [&](const Atom& a) -> std::optional<bool> {
              if (a.predicate == r.name) return branch;
              return std::nullopt;
            });
        if (const bool* b = std::get_if<bool>(&v)) {
          constant_value[{rf.index, branch}] = *b ? 1 : 0;
        } else {
          bits.push_back(
              {rf.index, branch, rename_variables(std::get<FormulaPtr>(v), renaming)});
        }
      }
    }

    const int m_bits = static_cast<int>(bits.size());
    if (m_bits > 16) continue;  // table would be too large; let other rules run

    // Group value L(s) = log sum_j C(G, j) exp(sum_f w_f (j sT_f + (G-j) sF_f)).
    auto group_log_value = [&](std::uint32_t mask) {
      LogSumExp acc;
      for (long j = 0; j <= G; ++j) {
        double expo = 0.0;
        for (const auto& rf : r_formulas) {
          const double w = kb.formulas[rf.index].weight;
          int s_true, s_false;
          auto ct = constant_value.find({rf.index, true});
          if (ct != constant_value.end()) {
            s_true = ct->second;
          } else {
            int bit = 0;
            for (int b = 0; b < m_bits; ++b) {
              if (bits[b].formula == rf.index && bits[b].fixed_value) bit = (mask >> b) & 1;
            }
            s_true = bit;
          }
          auto cf = constant_value.find({rf.index, false});
          if (cf != constant_value.end()) {
            s_false = cf->second;
          } else {
            int bit = 0;
            for (int b = 0; b < m_bits; ++b) {
              if (bits[b].formula == rf.index && !bits[b].fixed_value) bit = (mask >> b) & 1;
            }
            s_false = bit;
          }
          expo += w * (static_cast<double>(j) * s_true +
                       static_cast<double>(G - j) * s_false);
        }
        acc.add(log_binomial(G, j) + expo);
      }
      return acc.value();
    };

    // Moebius transform over the subset lattice gives the multilinear
    // coefficients of L.
    std::vector<double> coeff(std::size_t{1} << m_bits);
    for (std::uint32_t mask = 0; mask < coeff.size(); ++mask) {
      coeff[mask] = group_log_value(mask);
    }
    for (int b = 0; b < m_bits; ++b) {
      for (std::uint32_t mask = 0; mask < coeff.size(); ++mask) {
        if (mask & (1u << b)) coeff[mask] -= coeff[mask ^ (1u << b)];
      }
    }

    // Number of groups: product of the non-isolated position domain sizes.
    double groups = 1;
    std::map<std::string, long> canon_sizes;
    for (int m : other_positions) {
      const long s = domain_size(kb, r.argument_domains[m]);
      groups *= static_cast<double>(s);
      canon_sizes[canon[m]] = s;
    }

    IsolatedApplication app;
    app.log_multiplier = groups * coeff[0];
    app.sub.domains = kb.domains;
    for (const auto& p : kb.predicates) {
      if (p.name != r.name) app.sub.predicates.push_back(p);
    }
    bool contains_r_formula = false;
    for (int f = 0; f < static_cast<int>(kb.formulas.size()); ++f) {
      contains_r_formula = std::any_of(r_formulas.begin(), r_formulas.end(),
                                       [&](const RFormula& rf) { return rf.index == f; });
      if (!contains_r_formula) app.sub.formulas.push_back(kb.formulas[f]);
    }
    for (std::uint32_t mask = 1; mask < coeff.size(); ++mask) {
      if (coeff[mask] == 0.0) continue;
      FormulaPtr conj;
      for (int b = 0; b < m_bits; ++b) {
        if (!(mask & (1u << b))) continue;
        conj = conj ? Formula::make_binary(Connective::And, conj, bits[b].residual)
                    : bits[b].residual;
      }
      // Scale by the sizes of canonical variables the conjunction dropped.
      double weight = coeff[mask];
      std::set<std::string> present;
      for (const auto& [v, d] : free_variables(app.sub, *conj)) present.insert(v);
      for (const auto& [v, s] : canon_sizes) {
        if (!present.count(v)) weight *= static_cast<double>(s);
      }
      app.sub.formulas.push_back(WeightedFormula{std::move(conj), weight});
    }
    app.note = r.name + " summed out in closed form (" + std::to_string(G) +
               " groundings per group, " + std::to_string(static_cast<long>(groups)) +
               " groups)";
    return app;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Dispatcher
// ---------------------------------------------------------------------------

namespace {

bool fully_ground(const KnowledgeBase& kb) {
  for (const auto& d : kb.domains) {
    if (d.constants.size() != 1) return false;
  }
  return true;
}

double replay_step(const LiftStep& step) {
  if (step.rule == "base" || step.rule == "memo") return step.leaf->log_z;
  if (step.rule == "free_atoms" || step.rule == "isolated") {
    return step.multiplier + replay_step(*step.branches[0].second);
  }
  if (step.rule == "decomposer") {
    return static_cast<double>(step.exponent) * replay_step(*step.branches[0].second);
  }
  LogSumExp acc;
  for (const auto& [mult, child] : step.branches) {
    acc.add(mult + replay_step(*child));
  }
  return acc.value();
}

double variance_step(const LiftStep& step) {
  if (step.rule == "base" || step.rule == "memo") {
    const double se = step.leaf->std_error.value_or(0.0);
    return se * se;
  }
  if (step.rule == "free_atoms" || step.rule == "isolated") {
    return variance_step(*step.branches[0].second);
  }
  if (step.rule == "decomposer") {
    const double e = static_cast<double>(step.exponent);
    return e * e * variance_step(*step.branches[0].second);
  }
  // delta method through log-sum-exp, branches treated as independent
  const double total = replay_step(step);
  double var = 0.0;
  for (const auto& [mult, child] : step.branches) {
    const double p = std::exp(mult + replay_step(*child) - total);
    var += p * p * variance_step(*child);
  }
  return var;
}

struct Dispatcher {
  BaseSampler& base;
  const LiftConfig& config;
  std::unordered_map<std::string, std::shared_ptr<const LiftStep>> memo;

  std::shared_ptr<const LiftStep> recurse(const KnowledgeBase& input) {
    StripResult stripped = strip_unreferenced(input);
    if (stripped.removed_ground_atoms > 0) {
      auto node = std::make_shared<LiftStep>();
      node->rule = "free_atoms";
      node->target = std::to_string(stripped.removed_ground_atoms) + " unreferenced ground atoms";
      node->multiplier = static_cast<double>(stripped.removed_ground_atoms) * std::log(2.0);
      node->branches.push_back({0.0, recurse_stripped(stripped.kb)});
      return node;
    }
    return recurse_stripped(stripped.kb);
  }

  std::shared_ptr<const LiftStep> recurse_stripped(const KnowledgeBase& kb) {
    std::string key;
    if (config.memoize) {
      key = canonical_memo_key(kb);
      auto it = memo.find(key);
      if (it != memo.end()) return it->second;
    }
    std::shared_ptr<const LiftStep> node = dispatch(kb);
    if (config.memoize) memo.emplace(std::move(key), node);
    return node;
  }

  std::shared_ptr<const LiftStep> dispatch(const KnowledgeBase& kb) {
    if (fully_ground(kb)) {
      auto node = std::make_shared<LiftStep>();
      node->rule = "base";
      node->target = base.name() + " on " + std::to_string(kb.num_ground_atoms()) + " atoms";
      node->leaf = base.log_partition(ground(kb));
      return node;
    }
    for (const std::string& rule : config.rule_order) {
      if (rule == "decomposer" && config.enable_decomposer) {
        if (auto dec = find_decomposer(kb)) {
          if (domain_size(kb, dec->domain) >= 2) {
            DecomposerApplication app = apply_decomposer(kb, *dec);
            auto node = std::make_shared<LiftStep>();
            node->rule = "decomposer";
            std::set<std::string> vars(dec->formula_vars.begin(), dec->formula_vars.end());
            std::string vlist;
            for (const auto& v : vars) {
              if (!v.empty()) vlist += (vlist.empty() ? "" : ",") + v;
            }
            node->target = "{" + vlist + "} over " + dec->domain;
            node->exponent = app.exponent;
            node->branches.push_back({0.0, recurse(app.sub)});
            return node;
          }
        }
      } else if (rule == "isolated" && config.enable_isolated) {
        if (auto iso = apply_isolated_variable(kb, config)) {
          auto node = std::make_shared<LiftStep>();
          node->rule = "isolated";
          node->target = iso->note;
          node->multiplier = iso->log_multiplier;
          node->branches.push_back({0.0, recurse(iso->sub)});
          return node;
        }
      } else if (rule == "binomial" && config.enable_binomial) {
        if (auto branches = apply_generalized_binomial(kb)) {
          auto node = std::make_shared<LiftStep>();
          node->rule = "binomial";
          node->target = (*branches)[0].note.substr(0, (*branches)[0].note.find(':')) +
                         " over " + std::to_string(branches->size()) + " counts";
          for (auto& b : *branches) {
            node->branches.push_back({b.log_multiplier, recurse(b.sub)});
          }
          return node;
        }
      }
    }
    std::vector<LiftBranch> branches = ground_fallback(kb, config);
    auto node = std::make_shared<LiftStep>();
    node->rule = "ground";
    node->target = branches[0].note.substr(0, branches[0].note.find(' ')) + " over " +
                   std::to_string(branches.size()) + " assignments";
    for (auto& b : branches) {
      node->branches.push_back({b.log_multiplier, recurse(b.sub)});
    }
    return node;
  }
};

void flatten(const LiftStep& step, std::vector<LiftTrace::FlatStep>& out) {
  out.push_back({step.rule, step.target,
                 step.rule == "decomposer" ? static_cast<double>(step.exponent)
                                           : step.multiplier,
                 static_cast<long>(step.branches.size())});
  for (const auto& [mult, child] : step.branches) flatten(*child, out);
}

}  // namespace

double LiftTrace::replay_log_z() const { return replay_step(*root); }

double LiftTrace::replay_variance() const { return variance_step(*root); }

std::vector<LiftTrace::FlatStep> LiftTrace::steps() const {
  std::vector<FlatStep> out;
  flatten(*root, out);
  return out;
}

std::pair<PartitionEstimate, LiftTrace> lifted_log_z(const KnowledgeBase& kb, BaseSampler& base,
                                                     const LiftConfig& config) {
  Dispatcher dispatcher{base, config, {}};
  LiftTrace trace{dispatcher.recurse(kb)};
  PartitionEstimate est;
  est.log_z = trace.replay_log_z();
  est.method = Method::lifted;
  const double var = trace.replay_variance();
  if (var > 0.0) {
    est.std_error = std::sqrt(var);
    est.diagnostics["error_model"] = "delta method over the trace, leaves independent";
  }
  est.diagnostics["base_sampler"] = base.name();
  est.diagnostics["trace_steps"] = std::to_string(trace.steps().size());
  return {est, trace};
}

}  // namespace qmln
