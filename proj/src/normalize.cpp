#include "qmln/normalize.hpp"

#include <algorithm>
#include <functional>

#include "qmln/errors.hpp"

namespace qmln {

bool is_normal(const KnowledgeBase& kb) {
  // (i) no constants in formulas
  for (const auto& wf : kb.formulas) {
    for (const Atom& atom : collect_atoms(*wf.formula)) {
      for (const Term& t : atom.args) {
        if (!t.is_variable()) return false;
      }
    }
  }
  // (ii) shared argument positions carry one domain
  std::map<std::pair<std::string, int>, std::string> position_domain;
  for (const auto& wf : kb.formulas) {
    auto vars = free_variables(kb, *wf.formula);
    std::map<std::string, std::string> var_domain(vars.begin(), vars.end());
    for (const Atom& atom : collect_atoms(*wf.formula)) {
      for (std::size_t i = 0; i < atom.args.size(); ++i) {
        if (!atom.args[i].is_variable()) continue;
        const std::string& dom = var_domain.at(atom.args[i].name);
        auto key = std::make_pair(atom.predicate, static_cast<int>(i));
        auto [it, inserted] = position_domain.emplace(key, dom);
        if (!inserted && it->second != dom) return false;
      }
    }
  }
  return true;
}

std::string unique_name(const std::string& base, std::set<std::string>& taken) {
  std::string name = base;
  int suffix = 1;
  while (taken.count(name)) {
    name = base + "_" + std::to_string(suffix++);
  }
  taken.insert(name);
  return name;
}

ShatterResult shatter(const KnowledgeBase& kb,
                      const std::vector<DomainPartition>& partitions) {
  std::map<std::string, const DomainPartition*> split;
  for (const auto& p : partitions) split[p.domain] = &p;

  ShatterResult res;

  // Domains: split ones are replaced by their parts, in order.
  std::map<std::string, std::string> constant_part;  // "<domain>/<constant>" -> part name
  for (const auto& d : kb.domains) {
    auto it = split.find(d.name);
    if (it == split.end()) {
      res.kb.domains.push_back(d);
      continue;
    }
    std::size_t covered = 0;
    for (const auto& part : it->second->parts) {
      if (part.constants.empty()) throw ModelError("empty part in domain split");
      for (const auto& c : part.constants) {
        if (std::find(d.constants.begin(), d.constants.end(), c) == d.constants.end()) {
          throw ModelError("part constant " + c + " not in domain " + d.name);
        }
        constant_part[d.name + "/" + c] = part.name;
      }
      covered += part.constants.size();
      res.kb.domains.push_back(part);
      res.domain_parts[d.name].push_back(part.name);
    }
    if (covered != d.constants.size()) {
      throw ModelError("parts do not partition domain " + d.name);
    }
  }

  // Predicates: specialize over part combinations of split arguments.
  std::set<std::string> taken_preds;
  for (const auto& p : kb.predicates) taken_preds.insert(p.name);
  // variant lookup: original predicate + per-arg domain names -> variant name
  std::map<std::string, std::map<std::vector<std::string>, std::string>> variant_of;
  for (const auto& p : kb.predicates) {
    std::vector<std::vector<std::string>> options;  // per argument: part names
    bool any_split = false;
    for (const auto& dn : p.argument_domains) {
      auto it = split.find(dn);
      if (it == split.end()) {
        options.push_back({dn});
      } else {
        std::vector<std::string> parts;
        for (const auto& part : it->second->parts) parts.push_back(part.name);
        options.push_back(std::move(parts));
        any_split = true;
      }
    }
    if (!any_split) {
      res.kb.predicates.push_back(p);
      res.predicate_variants[p.name].push_back({p.argument_domains, p.name});
      variant_of[p.name][p.argument_domains] = p.name;
      continue;
    }
    std::vector<std::size_t> idx(options.size(), 0);
    int k = 1;
    while (true) {
      std::vector<std::string> combo;
      for (std::size_t i = 0; i < options.size(); ++i) combo.push_back(options[i][idx[i]]);
      std::string name = unique_name(p.name + "_" + std::to_string(k++), taken_preds);
      res.kb.predicates.push_back(PredicateDecl{name, combo});
      res.predicate_variants[p.name].push_back({combo, name});
      variant_of[p.name][combo] = name;
      // odometer, last argument fastest
      int pos = static_cast<int>(options.size()) - 1;
      while (pos >= 0) {
        if (++idx[pos] < options[pos].size()) break;
        idx[pos] = 0;
        --pos;
      }
      if (pos < 0) break;
    }
  }

  // Formulas: expand over part choices of variables whose domain was split;
  // constants resolve to their containing part and become fresh variables.
  for (const auto& wf : kb.formulas) {
    auto vars = free_variables(kb, *wf.formula);
    std::vector<std::string> split_vars;
    std::vector<std::vector<std::string>> split_var_parts;
    std::map<std::string, std::string> fixed_part;  // variable -> domain/part name
    for (const auto& [var, dom] : vars) {
      auto it = split.find(dom);
      if (it == split.end()) {
        fixed_part[var] = dom;
      } else {
        split_vars.push_back(var);
        std::vector<std::string> parts;
        for (const auto& part : it->second->parts) parts.push_back(part.name);
        split_var_parts.push_back(std::move(parts));
      }
    }

    std::vector<std::size_t> choice(split_vars.size(), 0);
    while (true) {
      std::map<std::string, std::string> var_part = fixed_part;
      for (std::size_t i = 0; i < split_vars.size(); ++i) {
        var_part[split_vars[i]] = split_var_parts[i][choice[i]];
      }

      // Fresh variable names for constants, per copy.
      std::set<std::string> used_vars;
      for (const auto& [var, dom] : vars) used_vars.insert(var);
      std::map<std::string, std::string> constant_var;  // "<part>/<constant>" -> variable
      int fresh = 1;

      std::function<FormulaPtr(const Formula&)> rebuild =
          [&](const Formula& f) -> FormulaPtr {
        if (f.kind != Connective::Atom) {
          if (f.kind == Connective::Not) return Formula::make_not(rebuild(*f.lhs));
          return Formula::make_binary(f.kind, rebuild(*f.lhs), rebuild(*f.rhs));
        }
        const PredicateDecl* pred = kb.find_predicate(f.atom.predicate);
        Atom atom;
        std::vector<std::string> combo;
        for (std::size_t i = 0; i < f.atom.args.size(); ++i) {
          const Term& t = f.atom.args[i];
          const std::string& dom = pred->argument_domains[i];
          if (t.is_variable()) {
            combo.push_back(var_part.at(t.name));
            atom.args.push_back(t);
          } else {
            auto cp = constant_part.find(dom + "/" + t.name);
            const std::string part = cp == constant_part.end() ? dom : cp->second;
            combo.push_back(part);
            const std::string key = part + "/" + t.name;
            auto cv = constant_var.find(key);
            if (cv == constant_var.end()) {
              std::string vname;
              do {
                vname = "x" + std::to_string(fresh++);
              } while (used_vars.count(vname));
              used_vars.insert(vname);
              cv = constant_var.emplace(key, vname).first;
            }
            atom.args.push_back(Term::variable(cv->second));
          }
        }
        auto vit = variant_of.find(f.atom.predicate);
        atom.predicate = vit == variant_of.end() ? f.atom.predicate : vit->second.at(combo);
        return Formula::make_atom(std::move(atom));
      };

      res.kb.formulas.push_back(WeightedFormula{rebuild(*wf.formula), wf.weight});
      ++res.formula_copies;

      int pos = static_cast<int>(choice.size()) - 1;
      while (pos >= 0) {
        if (++choice[pos] < split_var_parts[pos].size()) break;
        choice[pos] = 0;
        --pos;
      }
      if (pos < 0) break;
    }
  }

  return res;
}

std::pair<KnowledgeBase, NormalizationReport> to_normal_form(const KnowledgeBase& kb) {
  // Constants mentioned in formulas, grouped by the domain of the position
  // where they appear.
  std::map<std::string, std::set<std::string>> mentioned;
  for (const auto& wf : kb.formulas) {
    for (const Atom& atom : collect_atoms(*wf.formula)) {
      const PredicateDecl* pred = kb.find_predicate(atom.predicate);
      if (!pred) throw ModelError("unknown predicate " + atom.predicate);
      for (std::size_t i = 0; i < atom.args.size(); ++i) {
        if (!atom.args[i].is_variable()) {
          mentioned[pred->argument_domains[i]].insert(atom.args[i].name);
        }
      }
    }
  }
  if (mentioned.empty()) {
    return {kb, NormalizationReport{{}, {}, static_cast<int>(kb.formulas.size())}};
  }

  std::set<std::string> taken_domains;
  for (const auto& d : kb.domains) taken_domains.insert(d.name);

  std::vector<DomainPartition> partitions;
  for (const auto& d : kb.domains) {
    auto it = mentioned.find(d.name);
    if (it == mentioned.end()) continue;
    DomainPartition part;
    part.domain = d.name;
    int k = 1;
    std::vector<std::string> remainder;
    for (const auto& c : d.constants) {
      if (it->second.count(c)) {
        std::string name = unique_name(d.name + "_" + std::to_string(k++), taken_domains);
        part.parts.push_back(DomainDecl{name, {c}});
      } else {
        remainder.push_back(c);
      }
    }
    if (!remainder.empty()) {
      std::string name = unique_name(d.name + "_" + std::to_string(k++), taken_domains);
      part.parts.push_back(DomainDecl{name, std::move(remainder)});
    }
    partitions.push_back(std::move(part));
  }

  ShatterResult res = shatter(kb, partitions);
  NormalizationReport report;
  report.domain_splits = res.domain_parts;
  for (const auto& [pred, variants] : res.predicate_variants) {
    if (variants.size() == 1 && variants[0].second == pred) continue;
    std::vector<std::string> names;
    for (const auto& [combo, name] : variants) names.push_back(name);
    report.predicate_splits[pred] = std::move(names);
  }
  report.formula_expansion_count = res.formula_copies;
  return {std::move(res.kb), std::move(report)};
}

}  // namespace qmln
