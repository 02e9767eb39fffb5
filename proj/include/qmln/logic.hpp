#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "qmln/errors.hpp"

namespace qmln {

// ---------------------------------------------------------------------------
// First-order language: finite typed domains, function-free, universally
// quantified formulas with real weights.
// ---------------------------------------------------------------------------

struct DomainDecl {
  std::string name;
  std::vector<std::string> constants;

  bool operator==(const DomainDecl&) const = default;
};

struct PredicateDecl {
  std::string name;
  std::vector<std::string> argument_domains;

  int arity() const { return static_cast<int>(argument_domains.size()); }
  bool operator==(const PredicateDecl&) const = default;
};

struct Term {
  enum class Kind { Variable, Constant };
  Kind kind = Kind::Variable;
  std::string name;

  static Term variable(std::string n) { return Term{Kind::Variable, std::move(n)}; }
  static Term constant(std::string n) { return Term{Kind::Constant, std::move(n)}; }
  bool is_variable() const { return kind == Kind::Variable; }
  bool operator==(const Term&) const = default;
  auto operator<=>(const Term&) const = default;
};

struct Atom {
  std::string predicate;
  std::vector<Term> args;

  bool operator==(const Atom&) const = default;
  auto operator<=>(const Atom&) const = default;
};

enum class Connective { Atom, Not, And, Or, Implies, Iff };

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

// Immutable expression tree. Nodes are shared; copies are cheap.
struct Formula {
  Connective kind = Connective::Atom;
  Atom atom;           // kind == Atom
  FormulaPtr lhs;      // unary/binary
  FormulaPtr rhs;      // binary

  static FormulaPtr make_atom(Atom a);
  static FormulaPtr make_not(FormulaPtr f);
  static FormulaPtr make_binary(Connective op, FormulaPtr l, FormulaPtr r);
};

bool formulas_equal(const Formula& a, const Formula& b);

struct WeightedFormula {
  FormulaPtr formula;
  double weight = 0.0;
};

// A knowledge base / Markov logic network: (f_j, w_j) pairs over declared
// domains and predicates. Immutable by convention after construction.
struct KnowledgeBase {
  std::vector<DomainDecl> domains;
  std::vector<PredicateDecl> predicates;
  std::vector<WeightedFormula> formulas;

  const DomainDecl* find_domain(const std::string& name) const;
  const PredicateDecl* find_predicate(const std::string& name) const;

  // D: largest domain cardinality (0 for an empty KB).
  int max_domain_size() const;
  // c: largest number of distinct atoms in any formula.
  int max_atoms_per_formula() const;
  // Total number of ground atoms over all declared predicates.
  long num_ground_atoms() const;
};

bool kb_equal(const KnowledgeBase& a, const KnowledgeBase& b);

// ---------------------------------------------------------------------------
// Parsing and rendering
// ---------------------------------------------------------------------------

// Parses the KB text format. One statement per line:
//   domain <name> = { <c1>, <c2>, ... }
//   predicate <Name>(<domain>, ...)
//   <weight> <formula>
// Connectives: ! ^ v => <=>, parentheses. `//` comments. Throws ParseError.
KnowledgeBase parse_kb(const std::string& text);

// Inverse pretty-printer: parse_kb(render(kb)) is structurally equal to kb.
std::string render(const KnowledgeBase& kb);
std::string render(const Formula& formula);
std::string render(const Atom& atom);

// ---------------------------------------------------------------------------
// Formula operations
// ---------------------------------------------------------------------------

using Binding = std::map<std::string, std::string>;  // variable -> constant

// Replaces bound variables by constants; unbound variables are untouched.
FormulaPtr substitute(const FormulaPtr& formula, const Binding& binding);

// Distinct free variables with their inferred domains, in first-occurrence
// order. Throws ModelError if one variable is used at positions with
// different domains or with an unknown predicate.
std::vector<std::pair<std::string, std::string>> free_variables(const KnowledgeBase& kb,
                                                                const Formula& formula);

// Distinct atoms of a formula in first-occurrence order.
std::vector<Atom> collect_atoms(const Formula& formula);

// Standard Boolean semantics given truth values for every ground atom the
// bound formula mentions. `lookup` maps a ground atom to its value.
template <typename Lookup>
bool evaluate_formula(const Formula& f, const Lookup& lookup) {
  switch (f.kind) {
    case Connective::Atom:
      return lookup(f.atom);
    case Connective::Not:
      return !evaluate_formula(*f.lhs, lookup);
    case Connective::And:
      return evaluate_formula(*f.lhs, lookup) && evaluate_formula(*f.rhs, lookup);
    case Connective::Or:
      return evaluate_formula(*f.lhs, lookup) || evaluate_formula(*f.rhs, lookup);
    case Connective::Implies:
      return !evaluate_formula(*f.lhs, lookup) || evaluate_formula(*f.rhs, lookup);
    case Connective::Iff:
      return evaluate_formula(*f.lhs, lookup) == evaluate_formula(*f.rhs, lookup);
  }
  return false;
}

// Partial evaluation: fixes the truth value of every atom for which `value`
// returns a value, then simplifies. Returns either a constant or the residual
// formula.
using PartialValue = std::variant<bool, FormulaPtr>;
PartialValue partial_evaluate(
    const FormulaPtr& formula,
    const std::function<std::optional<bool>(const Atom&)>& value);

// Variable-to-variable renaming.
FormulaPtr rename_variables(const FormulaPtr& formula,
                            const std::map<std::string, std::string>& renaming);

bool contains_predicate(const Formula& formula, const std::string& predicate);

}  // namespace qmln
