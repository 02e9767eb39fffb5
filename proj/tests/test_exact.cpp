#include <doctest.h>

#include <cmath>

#include "qmln/exact.hpp"
#include "qmln/thermal.hpp"
#include "test_util.hpp"

using namespace qmln;

TEST_CASE("exact log Z of the fixtures") {
  PartitionEstimate e1 = log_partition_exact(ground(test::fix1()));
  CHECK(e1.log_z == doctest::Approx(test::kFix1LogZ).epsilon(1e-14));
  CHECK(std::exp(e1.log_z) == doctest::Approx(test::kFix1Z).epsilon(1e-13));
  CHECK(e1.method == Method::exact);
  CHECK_FALSE(e1.std_error.has_value());

  PartitionEstimate e3 = log_partition_exact(ground(test::fix3()));
  CHECK(std::exp(e3.log_z) == doctest::Approx(343.0).epsilon(1e-12));

  PartitionEstimate e2 = log_partition_exact(ground(test::fix2()));
  CHECK(e2.log_z == doctest::Approx(test::kFix2LogZ).epsilon(1e-14));
}

TEST_CASE("all-zero weights give the uniform measure") {
  KnowledgeBase kb = parse_kb(
      "domain d = { A, B, C }\n"
      "predicate P(d)\n"
      "0 P(x)\n");
  GroundNetwork net = ground(kb);
  PartitionEstimate est = log_partition_exact(net);
  CHECK(est.log_z == doctest::Approx(3 * std::log(2.0)).epsilon(1e-15));
  World w(3);
  CHECK(world_log_prob(net, w) == doctest::Approx(-3 * std::log(2.0)).epsilon(1e-15));
  CHECK(query_marginal_exact(net, 0, {}) == doctest::Approx(0.5).epsilon(1e-12));
  Evidence other;
  other.assignments[1] = true;
  CHECK(query_marginal_exact(net, 0, other) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("exact engine agrees with the independent oracle") {
  SplitMix64 rng(808);
  for (int i = 0; i < 20; ++i) {
    KnowledgeBase kb = test::random_kb(rng);
    GroundNetwork net = ground(kb);
    CHECK(log_partition_exact(net).log_z ==
          doctest::Approx(test::oracle_log_z(kb)).epsilon(1e-12));
  }
}

TEST_CASE("world probabilities") {
  KnowledgeBase kb = test::fix1();
  GroundNetwork net = ground(kb);
  World w(2);
  w.set(net.atom_table.find("S", {"A"}), true);
  const double lp = world_log_prob(net, w);
  CHECK(std::exp(lp) == doctest::Approx(std::exp(0.7) / test::kFix1Z).epsilon(1e-13));
  CHECK(std::exp(lp) == doctest::Approx(0.22171287).epsilon(1e-6));
}

TEST_CASE("probabilities over all worlds sum to one") {
  for (const KnowledgeBase& kb : {test::fix1(), test::fix2(), test::fix3()}) {
    GroundNetwork net = ground(kb);
    double total = 0.0;
    for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << net.num_atoms()); ++bits) {
      World w(net.num_atoms());
      for (int a = 0; a < net.num_atoms(); ++a) w.set(a, (bits >> a) & 1);
      total += std::exp(world_log_prob(net, w));
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("exact marginals on the first fixture") {
  GroundNetwork net = ground(test::fix1());
  const int sa = net.atom_table.find("S", {"A"});
  CHECK(query_marginal_exact(net, sa, {}) ==
        doctest::Approx(test::kFix1MarginalSA).epsilon(1e-13));
}

TEST_CASE("query on an evidence atom is a contract violation") {
  GroundNetwork net = ground(test::fix1());
  Evidence ev;
  ev.assignments[0] = true;
  CHECK_THROWS_AS(query_marginal_exact(net, 0, ev), ModelError);
  Evidence bad;
  bad.assignments[17] = true;
  CHECK_THROWS_AS(query_marginal_exact(net, 1, bad), ModelError);
}

TEST_CASE("enumeration limit is enforced") {
  KnowledgeBase kb = test::fix2();
  GroundNetwork net = ground(kb);
  CHECK_THROWS_AS(log_partition_exact(net, ExactLimits{4}), LimitError);
  World w(net.num_atoms());
  CHECK_THROWS_AS(world_log_prob(net, w, ExactLimits{4}), LimitError);
}

TEST_CASE("conditional marginal equals a ratio of reduced partition functions") {
  SplitMix64 rng(4242);
  int checked = 0;
  while (checked < 10) {
    KnowledgeBase kb = test::random_kb(rng);
    GroundNetwork net = ground(kb);
    if (net.num_atoms() < 3) continue;
    ++checked;
    Evidence ev;
    ev.assignments[0] = (rng.next() & 1) != 0;
    const int query = 1;
    const double direct = query_marginal_exact(net, query, ev);

    Evidence ev_and_query = ev;
    ev_and_query.assignments[query] = true;
    // log_partition_exact folds in the reduced network's log_offset
    const double num = log_partition_exact(reduce_by_evidence(net, ev_and_query)).log_z;
    const double den = log_partition_exact(reduce_by_evidence(net, ev)).log_z;
    CHECK(std::exp(num - den) == doctest::Approx(direct).epsilon(1e-10));
  }
}

TEST_CASE("scaling weights concentrates mass on maximum-satisfaction worlds") {
  KnowledgeBase kb = test::fix2();
  KnowledgeBase scaled = kb;
  for (auto& wf : scaled.formulas) wf.weight *= 50.0;
  GroundNetwork base_net = ground(kb);
  GroundNetwork scaled_net = ground(scaled);

  // worlds maximizing sum_j w_j N(f_j, w) at the base weights
  double best = -1e300;
  std::vector<std::uint64_t> argmax;
  for (std::uint64_t bits = 0; bits < 64; ++bits) {
    World w(6);
    for (int a = 0; a < 6; ++a) w.set(a, (bits >> a) & 1);
    const double score = base_net.log_weight(w);
    if (score > best + 1e-9) {
      best = score;
      argmax.clear();
    }
    if (score > best - 1e-9) argmax.push_back(bits);
  }
  double mass = 0.0;
  for (std::uint64_t bits : argmax) {
    World w(6);
    for (int a = 0; a < 6; ++a) w.set(a, (bits >> a) & 1);
    mass += std::exp(world_log_prob(scaled_net, w));
  }
  CHECK(mass >= 1.0 - 1e-6);
}
