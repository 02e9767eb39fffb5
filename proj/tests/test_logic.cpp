#include <doctest.h>

#include "qmln/logic.hpp"
#include "qmln/ground.hpp"
#include "test_util.hpp"

using namespace qmln;

TEST_CASE("parse_kb reads the single-predicate fixture") {
  KnowledgeBase kb = test::fix1();
  CHECK(kb.domains.size() == 1);
  CHECK(kb.predicates.size() == 1);
  CHECK(kb.formulas.size() == 1);
  CHECK(kb.domains[0].constants == std::vector<std::string>{"A", "B"});
}

TEST_CASE("parse_kb rejects undeclared predicates") {
  CHECK_THROWS_WITH_AS(parse_kb("domain person = { A, B }\n0.7 S(x)\n"),
                       doctest::Contains("unknown predicate S"), ParseError);
}

TEST_CASE("parse_kb on the friends-and-smokers fixture") {
  KnowledgeBase kb = test::fix2();
  CHECK(kb.predicates.size() == 2);
  CHECK(kb.formulas.size() == 2);
  CHECK(kb.max_atoms_per_formula() == 3);
  CHECK(kb.max_domain_size() == 2);
  // precedence: ^ binds tighter than =>
  const Formula& f1 = *kb.formulas[0].formula;
  CHECK(f1.kind == Connective::Implies);
  CHECK(f1.lhs->kind == Connective::And);
}

TEST_CASE("parser error cases") {
  CHECK_THROWS_AS(parse_kb("domain d = { A }\npredicate P(d)\n0.5 P(A, A)\n"), ParseError);
  CHECK_THROWS_WITH_AS(parse_kb("domain d = { A }\ndomain e = { B }\npredicate P(d)\n0.5 P(B)\n"),
                       doctest::Contains("not in domain"), ParseError);
  CHECK_THROWS_WITH_AS(parse_kb("domain d = { A }\npredicate P(d)\n0.5 EXIST x P(x)\n"),
                       doctest::Contains("existential"), ParseError);
  CHECK_THROWS_WITH_AS(parse_kb("domain d = { A }\npredicate P(d)\ninf P(x)\n"),
                       doctest::Contains("weight"), ParseError);
  CHECK_THROWS_AS(parse_kb("domain d = { A }\npredicate P(d)\n1e999 P(x)\n"), ParseError);
  // a variable cannot take two domains within one formula
  CHECK_THROWS_AS(
      parse_kb("domain d = { A }\ndomain e = { B }\npredicate P(d)\npredicate Q(e)\n"
               "0.5 P(x) ^ Q(x)\n"),
      ParseError);
}

TEST_CASE("reserved words cannot name domains or predicates") {
  CHECK_THROWS_WITH_AS(parse_kb("domain v = { A }\n"), doctest::Contains("reserved"),
                       ParseError);
  CHECK_THROWS_WITH_AS(parse_kb("domain d = { A }\npredicate v(d)\n"),
                       doctest::Contains("reserved"), ParseError);
  CHECK_THROWS_AS(parse_kb("domain d = { A }\npredicate predicate(d)\n"), ParseError);
}

TEST_CASE("free_variables rejects a variable spanning two domains") {
  KnowledgeBase kb = parse_kb(
      "domain d = { A }\ndomain e = { B }\npredicate P(d)\npredicate Q(e)\n0.1 P(x)\n");
  FormulaPtr bad = Formula::make_binary(
      Connective::And, Formula::make_atom(Atom{"P", {Term::variable("x")}}),
      Formula::make_atom(Atom{"Q", {Term::variable("x")}}));
  CHECK_THROWS_AS(free_variables(kb, *bad), ModelError);
}

TEST_CASE("comments and blank lines are permitted") {
  KnowledgeBase kb = parse_kb(
      "// header comment\n"
      "domain d = { A, B } // trailing\n"
      "\n"
      "predicate P(d)\n"
      "0.5 P(x)\n");
  CHECK(kb.formulas.size() == 1);
}

TEST_CASE("deleting any declaration from a valid KB breaks the parse") {
  const std::vector<std::string> lines = {
      "domain person = { A, B }",
      "predicate Smokes(person)",
      "predicate Friends(person, person)",
      "1.1 Friends(x,y) ^ Smokes(x) => Smokes(y)",
      "0.7 Smokes(x)",
  };
  for (std::size_t skip = 0; skip < 3; ++skip) {  // each declaration line
    std::string text;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (i != skip) text += lines[i] + "\n";
    }
    CHECK_THROWS_AS(parse_kb(text), ParseError);
  }
}

TEST_CASE("render round-trips fixtures and random KBs") {
  for (const KnowledgeBase& kb : {test::fix1(), test::fix2(), test::fix3()}) {
    CHECK(kb_equal(parse_kb(render(kb)), kb));
  }
  SplitMix64 rng(2024);
  for (int i = 0; i < 50; ++i) {
    KnowledgeBase kb = test::random_kb(rng);
    CHECK(kb_equal(parse_kb(render(kb)), kb));
  }
}

TEST_CASE("substitute replaces only bound variables") {
  KnowledgeBase kb = test::fix2();
  FormulaPtr friends = Formula::make_atom(
      Atom{"Friends", {Term::variable("x"), Term::variable("y")}});
  FormulaPtr partial = substitute(friends, {{"x", "A"}});
  CHECK(partial->atom.args[0] == Term::constant("A"));
  CHECK(partial->atom.args[1] == Term::variable("y"));

  FormulaPtr s = Formula::make_atom(Atom{"S", {Term::variable("x")}});
  CHECK(substitute(s, {{"x", "A"}})->atom.args[0] == Term::constant("A"));
  // empty binding: structurally equal result
  CHECK(formulas_equal(*substitute(kb.formulas[0].formula, {}), *kb.formulas[0].formula));
}

TEST_CASE("free_variables infers domains in first-occurrence order") {
  KnowledgeBase kb = test::fix2();
  auto vars = free_variables(kb, *kb.formulas[0].formula);
  REQUIRE(vars.size() == 2);
  CHECK(vars[0] == std::pair<std::string, std::string>{"x", "person"});
  CHECK(vars[1] == std::pair<std::string, std::string>{"y", "person"});

  KnowledgeBase kb1 = test::fix1();
  auto v1 = free_variables(kb1, *kb1.formulas[0].formula);
  REQUIRE(v1.size() == 1);
  CHECK(v1[0].second == "person");

  FormulaPtr ground_atom = Formula::make_atom(Atom{"S", {Term::constant("A")}});
  CHECK(free_variables(kb1, *ground_atom).empty());
}

TEST_CASE("evaluate_ground_formula on bound fixtures") {
  KnowledgeBase kb = test::fix2();
  GroundAtomTable table = build_atom_table(kb);
  World world(table.size());

  SUBCASE("single positive literal") {
    KnowledgeBase kb1 = test::fix1();
    GroundAtomTable t1 = build_atom_table(kb1);
    World w1(t1.size());
    w1.set(t1.find("S", {"A"}), true);
    CHECK(evaluate_ground_formula(*kb1.formulas[0].formula, {{"x", "A"}}, w1, t1));
  }
  SUBCASE("vacuous implication") {
    // x->B, y->A with Smokes(B)=false: false antecedent
    CHECK(evaluate_ground_formula(*kb.formulas[0].formula, {{"x", "B"}, {"y", "A"}}, world,
                                  table));
  }
  SUBCASE("failing implication") {
    world.set(table.find("Friends", {"A", "B"}), true);
    world.set(table.find("Smokes", {"A"}), true);
    CHECK_FALSE(evaluate_ground_formula(*kb.formulas[0].formula, {{"x", "A"}, {"y", "B"}},
                                        world, table));
  }
  SUBCASE("unbound variable") {
    CHECK_THROWS_AS(
        evaluate_ground_formula(*kb.formulas[0].formula, {{"x", "A"}}, world, table),
        ModelError);
  }
}

namespace {

// Truth-table oracle built bottom-up over a fixed atom order; a different
// evaluation route than the recursive evaluator.
std::vector<bool> table_of(const Formula& f, const std::vector<Atom>& atoms) {
  const std::size_t rows = std::size_t{1} << atoms.size();
  auto atom_column = [&](const Atom& a) {
    std::size_t pos = std::find(atoms.begin(), atoms.end(), a) - atoms.begin();
    std::vector<bool> col(rows);
    for (std::size_t r = 0; r < rows; ++r) col[r] = (r >> pos) & 1;
    return col;
  };
  switch (f.kind) {
    case Connective::Atom:
      return atom_column(f.atom);
    case Connective::Not: {
      auto t = table_of(*f.lhs, atoms);
      for (auto&& b : t) b = !b;
      return t;
    }
    default: {
      auto l = table_of(*f.lhs, atoms);
      auto r = table_of(*f.rhs, atoms);
      std::vector<bool> out(rows);
      for (std::size_t i = 0; i < rows; ++i) {
        switch (f.kind) {
          case Connective::And: out[i] = l[i] && r[i]; break;
          case Connective::Or: out[i] = l[i] || r[i]; break;
          case Connective::Implies: out[i] = !l[i] || r[i]; break;
          default: out[i] = l[i] == r[i]; break;
        }
      }
      return out;
    }
  }
}

}  // namespace

TEST_CASE("evaluator agrees with a truth-table oracle on random formulas") {
  SplitMix64 rng(77);
  int tested = 0;
  for (int i = 0; i < 120 && tested < 60; ++i) {
    KnowledgeBase kb = test::random_kb(rng);
    for (const auto& wf : kb.formulas) {
      std::vector<Atom> atoms = collect_atoms(*wf.formula);
      if (atoms.size() > 4) continue;
      ++tested;
      auto expected = table_of(*wf.formula, atoms);
      for (std::size_t row = 0; row < expected.size(); ++row) {
        auto lookup = [&](const Atom& a) {
          std::size_t pos = std::find(atoms.begin(), atoms.end(), a) - atoms.begin();
          return static_cast<bool>((row >> pos) & 1);
        };
        CHECK(evaluate_formula(*wf.formula, lookup) == expected[row]);
      }
    }
  }
  CHECK(tested >= 40);
}

TEST_CASE("partial evaluation simplifies to constants and residuals") {
  KnowledgeBase kb = test::fix2();
  FormulaPtr f = kb.formulas[0].formula;  // Friends(x,y) ^ Smokes(x) => Smokes(y)
  auto fix_smokes = [&](bool value) {
    return [value](const Atom& a) -> std::optional<bool> {
      if (a.predicate == "Smokes") return value;
      return std::nullopt;
    };
  };
  PartialValue t = partial_evaluate(f, fix_smokes(true));
  REQUIRE(std::holds_alternative<bool>(t));
  CHECK(std::get<bool>(t));  // consequent true
  PartialValue e = partial_evaluate(f, fix_smokes(false));
  REQUIRE(std::holds_alternative<bool>(e));
  CHECK(std::get<bool>(e));  // antecedent false

  // Fixing only Friends leaves a residual over Smokes.
  PartialValue r = partial_evaluate(f, [](const Atom& a) -> std::optional<bool> {
    if (a.predicate == "Friends") return true;
    return std::nullopt;
  });
  REQUIRE(std::holds_alternative<FormulaPtr>(r));
  CHECK(render(*std::get<FormulaPtr>(r)) == "Smokes(x) => Smokes(y)");
}
