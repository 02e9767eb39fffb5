#include "qmln/ground.hpp"

#include <algorithm>
#include <set>

#include "qmln/errors.hpp"

namespace qmln {

std::string ground_atom_name(const std::string& predicate,
                             const std::vector<std::string>& args) {
  std::string out = predicate;
  out += '(';
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i) out += ',';
    out += args[i];
  }
  out += ')';
  return out;
}

std::string GroundAtomTable::name(int i) const {
  return ground_atom_name(atoms[i].predicate, atoms[i].args);
}

int GroundAtomTable::find(const std::string& predicate,
                          const std::vector<std::string>& args) const {
  auto it = index.find(ground_atom_name(predicate, args));
  return it == index.end() ? -1 : it->second;
}

namespace {

// Odometer over per-position option counts, last position fastest.
bool next_combination(std::vector<int>& idx, const std::vector<int>& sizes) {
  for (int i = static_cast<int>(idx.size()) - 1; i >= 0; --i) {
    if (++idx[i] < sizes[i]) return true;
    idx[i] = 0;
  }
  return false;
}

}  // namespace

GroundAtomTable build_atom_table(const KnowledgeBase& kb, const GroundLimits& limits) {
  if (kb.num_ground_atoms() > limits.max_atoms) {
    throw LimitError("ground atom count " + std::to_string(kb.num_ground_atoms()) +
                     " exceeds limit " + std::to_string(limits.max_atoms));
  }
  std::vector<const PredicateDecl*> preds;
  preds.reserve(kb.predicates.size());
  for (const auto& p : kb.predicates) preds.push_back(&p);
  std::sort(preds.begin(), preds.end(),
            [](const PredicateDecl* a, const PredicateDecl* b) { return a->name < b->name; });

  GroundAtomTable table;
  for (const PredicateDecl* p : preds) {
    std::vector<const DomainDecl*> doms;
    std::vector<int> sizes;
    for (const auto& dn : p->argument_domains) {
      const DomainDecl* d = kb.find_domain(dn);
      if (!d) throw ModelError("predicate " + p->name + " references unknown domain " + dn);
      doms.push_back(d);
      sizes.push_back(static_cast<int>(d->constants.size()));
    }
    std::vector<int> idx(sizes.size(), 0);
    if (std::any_of(sizes.begin(), sizes.end(), [](int s) { return s == 0; })) continue;
    do {
      GroundAtomTable::Entry e;
      e.predicate = p->name;
      for (std::size_t i = 0; i < idx.size(); ++i) {
        e.args.push_back(doms[i]->constants[idx[i]]);
      }
      table.index.emplace(ground_atom_name(e.predicate, e.args),
                          static_cast<int>(table.atoms.size()));
      table.atoms.push_back(std::move(e));
    } while (next_combination(idx, sizes));
  }
  return table;
}

bool evaluate_ground_formula(const Formula& formula, const Binding& binding,
                             const World& world, const GroundAtomTable& table) {
  return evaluate_formula(formula, [&](const Atom& atom) -> bool {
    std::vector<std::string> args;
    args.reserve(atom.args.size());
    for (const auto& t : atom.args) {
      if (t.is_variable()) {
        auto it = binding.find(t.name);
        if (it == binding.end()) throw ModelError("unbound variable " + t.name);
        args.push_back(it->second);
      } else {
        args.push_back(t.name);
      }
    }
    int idx = table.find(atom.predicate, args);
    if (idx < 0) {
      throw ModelError("ground atom " + ground_atom_name(atom.predicate, args) +
                       " not in atom table");
    }
    return world.get(idx);
  });
}

namespace {

struct FormulaGrounding {
  std::vector<std::pair<std::string, const DomainDecl*>> vars;
  std::vector<int> sizes;
};

FormulaGrounding formula_grounding(const KnowledgeBase& kb, const Formula& f) {
  FormulaGrounding g;
  for (const auto& [var, dom] : free_variables(kb, f)) {
    const DomainDecl* d = kb.find_domain(dom);
    if (!d) throw ModelError("unknown domain " + dom);
    g.vars.emplace_back(var, d);
    g.sizes.push_back(static_cast<int>(d->constants.size()));
  }
  return g;
}

}  // namespace

GroundNetwork ground(const KnowledgeBase& kb, const GroundLimits& limits) {
  GroundNetwork net;
  net.atom_table = build_atom_table(kb, limits);
  for (const auto& wf : kb.formulas) net.formula_weights.push_back(wf.weight);

  for (std::size_t fid = 0; fid < kb.formulas.size(); ++fid) {
    const WeightedFormula& wf = kb.formulas[fid];
    FormulaGrounding g = formula_grounding(kb, *wf.formula);
    if (std::any_of(g.sizes.begin(), g.sizes.end(), [](int s) { return s == 0; })) continue;

    std::vector<int> idx(g.vars.size(), 0);
    do {
      Binding binding;
      for (std::size_t i = 0; i < g.vars.size(); ++i) {
        binding[g.vars[i].first] = g.vars[i].second->constants[idx[i]];
      }
      Clique clique;
      clique.formula_id = static_cast<int>(fid);
      clique.weight = wf.weight;
      // Collapse duplicate ground atoms; support sorted by atom index.
      std::set<int> support;
      for (const Atom& atom : collect_atoms(*wf.formula)) {
        std::vector<std::string> args;
        for (const auto& t : atom.args) {
          args.push_back(t.is_variable() ? binding.at(t.name) : t.name);
        }
        int ai = net.atom_table.find(atom.predicate, args);
        if (ai < 0) throw ModelError("grounding produced unknown atom");
        support.insert(ai);
      }
      clique.support.assign(support.begin(), support.end());
      if (clique.support.size() > 24) {
        throw LimitError("clique support too large for a truth table");
      }
      const std::size_t entries = std::size_t{1} << clique.support.size();
      clique.sat_table.resize(entries);
      World scratch(net.atom_table.size());
      for (std::size_t a = 0; a < entries; ++a) {
        for (std::size_t i = 0; i < clique.support.size(); ++i) {
          scratch.set(clique.support[i], (a >> i) & 1);
        }
        clique.sat_table[a] =
            evaluate_ground_formula(*wf.formula, binding, scratch, net.atom_table) ? 1 : 0;
      }
      net.cliques.push_back(std::move(clique));
    } while (next_combination(idx, g.sizes));
  }
  return net;
}

long count_true_groundings(const KnowledgeBase& kb, const GroundAtomTable& table,
                           int formula_id, const World& world) {
  if (formula_id < 0 || formula_id >= static_cast<int>(kb.formulas.size())) {
    throw ModelError("unknown formula id " + std::to_string(formula_id));
  }
  if (world.size() != table.size()) {
    throw ModelError("world length does not match atom table");
  }
  const WeightedFormula& wf = kb.formulas[formula_id];
  FormulaGrounding g = formula_grounding(kb, *wf.formula);
  if (std::any_of(g.sizes.begin(), g.sizes.end(), [](int s) { return s == 0; })) return 0;
  long count = 0;
  std::vector<int> idx(g.vars.size(), 0);
  do {
    Binding binding;
    for (std::size_t i = 0; i < g.vars.size(); ++i) {
      binding[g.vars[i].first] = g.vars[i].second->constants[idx[i]];
    }
    if (evaluate_ground_formula(*wf.formula, binding, world, table)) ++count;
  } while (next_combination(idx, g.sizes));
  return count;
}

NetworkStats network_stats(const GroundNetwork& net) {
  NetworkStats stats;
  stats.num_nodes = net.num_atoms();
  stats.num_cliques = static_cast<long>(net.cliques.size());
  std::vector<std::set<int>> neighbors(net.num_atoms());
  for (const auto& c : net.cliques) {
    stats.max_clique_size = std::max(stats.max_clique_size, static_cast<int>(c.support.size()));
    for (int a : c.support) {
      for (int b : c.support) {
        if (a != b) neighbors[a].insert(b);
      }
    }
  }
  for (const auto& ns : neighbors) {
    stats.max_degree = std::max(stats.max_degree, static_cast<int>(ns.size()));
  }
  return stats;
}

}  // namespace qmln
