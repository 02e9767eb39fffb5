#include <doctest.h>

#include <set>

#include "qmln/ground.hpp"
#include "test_util.hpp"

using namespace qmln;

TEST_CASE("grounding the single-predicate fixture") {
  GroundNetwork net = ground(test::fix1());
  CHECK(net.num_atoms() == 2);
  REQUIRE(net.cliques.size() == 2);
  for (const auto& c : net.cliques) {
    CHECK(c.support.size() == 1);
    CHECK(c.sat_table == std::vector<std::uint8_t>{0, 1});
    CHECK(c.weight == doctest::Approx(0.7));
  }
}

TEST_CASE("grounding the implication-pairs fixture") {
  GroundNetwork net = ground(test::fix3());
  CHECK(net.num_atoms() == 6);
  REQUIRE(net.cliques.size() == 3);
  for (const auto& c : net.cliques) {
    CHECK(c.support.size() == 2);
    int marked = 0;
    for (auto b : c.sat_table) marked += b;
    CHECK(marked == 3);  // implication truth table
  }
}

TEST_CASE("grounding friends-and-smokers collapses duplicate atoms") {
  GroundNetwork net = ground(test::fix2());
  CHECK(net.num_atoms() == 6);
  // One clique per binding: 4 from the implication, 2 from the unary formula.
  REQUIRE(net.cliques.size() == 6);
  std::multiset<std::size_t> sizes;
  for (const auto& c : net.cliques) {
    if (c.formula_id == 0) sizes.insert(c.support.size());
  }
  // x = y bindings collapse three atoms onto two
  CHECK(sizes == std::multiset<std::size_t>{2, 2, 3, 3});
}

TEST_CASE("atom table covers all groundings of all predicates") {
  SplitMix64 rng(99);
  for (int i = 0; i < 20; ++i) {
    KnowledgeBase kb = test::random_kb(rng);
    GroundAtomTable table = build_atom_table(kb);
    CHECK(table.size() == kb.num_ground_atoms());
    // n <= (#predicates) * D^c bound
    double bound = static_cast<double>(kb.predicates.size()) *
                   std::pow(kb.max_domain_size(),
                            std::max(kb.max_atoms_per_formula(), 2));
    CHECK(static_cast<double>(table.size()) <= bound + 1e-9);
  }
}

TEST_CASE("ground-atom limit guards against blow-up") {
  KnowledgeBase kb = test::fix2();
  CHECK_THROWS_AS(ground(kb, GroundLimits{4}), LimitError);
}

TEST_CASE("count_true_groundings on the fixtures") {
  KnowledgeBase kb1 = test::fix1();
  GroundAtomTable t1 = build_atom_table(kb1);
  World w1(t1.size());
  w1.set(t1.find("S", {"A"}), true);
  CHECK(count_true_groundings(kb1, t1, 0, w1) == 1);

  KnowledgeBase kb2 = test::fix2();
  GroundAtomTable t2 = build_atom_table(kb2);
  World w2(t2.size());
  for (const auto& pair : {std::pair{"A", "A"}, {"A", "B"}, {"B", "A"}, {"B", "B"}}) {
    w2.set(t2.find("Friends", {pair.first, pair.second}), true);
  }
  w2.set(t2.find("Smokes", {"A"}), true);
  CHECK(count_true_groundings(kb2, t2, 0, w2) == 3);
  CHECK(count_true_groundings(kb2, t2, 1, w2) == 1);

  CHECK_THROWS_AS(count_true_groundings(kb2, t2, 7, w2), ModelError);
}

TEST_CASE("count is bounded by the number of bindings") {
  SplitMix64 rng(123);
  for (int i = 0; i < 10; ++i) {
    KnowledgeBase kb = test::random_kb(rng);
    GroundAtomTable table = build_atom_table(kb);
    SplitMix64 wrng(i);
    World w(table.size());
    for (int a = 0; a < table.size(); ++a) w.set(a, wrng.bernoulli(0.5));
    for (std::size_t f = 0; f < kb.formulas.size(); ++f) {
      long bindings = 1;
      for (const auto& [var, dom] : free_variables(kb, *kb.formulas[f].formula)) {
        bindings *= static_cast<long>(kb.find_domain(dom)->constants.size());
      }
      const long count = count_true_groundings(kb, table, static_cast<int>(f), w);
      CHECK(count >= 0);
      CHECK(count <= bindings);
    }
  }
}

TEST_CASE("network statistics match the fixtures") {
  NetworkStats s1 = network_stats(ground(test::fix1()));
  CHECK(s1.num_nodes == 2);
  CHECK(s1.max_clique_size == 1);
  CHECK(s1.max_degree == 0);

  NetworkStats s2 = network_stats(ground(test::fix2()));
  CHECK(s2.num_nodes == 6);
  CHECK(s2.max_clique_size == 3);
  CHECK(s2.max_degree == 4);  // Smokes(A): Friends(A,A), Friends(A,B), Friends(B,A), Smokes(B)

  NetworkStats s3 = network_stats(ground(test::fix3()));
  CHECK(s3.num_nodes == 6);
  CHECK(s3.max_clique_size == 2);
  CHECK(s3.max_degree == 1);
}

TEST_CASE("clique sum equals the weighted true-grounding count on every world") {
  SplitMix64 rng(321);
  int networks = 0;
  while (networks < 12) {
    test::GeneratorOptions opt;
    opt.max_ground_atoms = 12;
    KnowledgeBase kb = test::random_kb(rng, opt);
    GroundNetwork net = ground(kb);
    if (net.num_atoms() > 12) continue;
    ++networks;
    for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << net.num_atoms()); ++bits) {
      World w(net.num_atoms());
      for (int a = 0; a < net.num_atoms(); ++a) w.set(a, (bits >> a) & 1);
      double via_counts = 0.0;
      for (std::size_t f = 0; f < kb.formulas.size(); ++f) {
        via_counts += kb.formulas[f].weight *
                      static_cast<double>(count_true_groundings(kb, net.atom_table,
                                                                static_cast<int>(f), w));
      }
      CHECK(net.log_weight(w) == doctest::Approx(via_counts).epsilon(1e-12));
    }
  }
}

TEST_CASE("every formula contributes its binding count in cliques") {
  SplitMix64 rng(555);
  for (int i = 0; i < 15; ++i) {
    KnowledgeBase kb = test::random_kb(rng);
    GroundNetwork net = ground(kb);
    std::map<int, long> per_formula;
    for (const auto& c : net.cliques) per_formula[c.formula_id]++;
    for (std::size_t f = 0; f < kb.formulas.size(); ++f) {
      long bindings = 1;
      for (const auto& [var, dom] : free_variables(kb, *kb.formulas[f].formula)) {
        bindings *= static_cast<long>(kb.find_domain(dom)->constants.size());
      }
      CHECK(per_formula[static_cast<int>(f)] == bindings);
    }
  }
}
