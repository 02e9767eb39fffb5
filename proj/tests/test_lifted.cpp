#include <doctest.h>

#include <cmath>

#include "qmln/lifted.hpp"
#include "qmln/normalize.hpp"
#include "test_util.hpp"

using namespace qmln;

namespace {

double lifted_exact(const KnowledgeBase& kb, const LiftConfig& config = {}) {
  ExactBaseSampler base;
  return lifted_log_z(kb, base, config).first.log_z;
}

}  // namespace

TEST_CASE("find_decomposer on the fixtures") {
  auto d3 = find_decomposer(test::fix3());
  REQUIRE(d3.has_value());
  CHECK(d3->domain == "item");
  CHECK(d3->predicate_position.at("S") == 0);
  CHECK(d3->predicate_position.at("C") == 0);

  CHECK_FALSE(find_decomposer(test::fix2()).has_value());

  auto d1 = find_decomposer(test::fix1());
  REQUIRE(d1.has_value());
  CHECK(d1->formula_vars[0] == "x");
}

TEST_CASE("decomposer detection work grows linearly with the formula count") {
  auto kb_with_copies = [](int copies) {
    std::string text = "domain d = { A, B, C }\npredicate P(d)\npredicate Q(d, d)\n";
    for (int i = 0; i < copies; ++i) text += "0.3 P(x) v Q(x, y)\n";
    return parse_kb(text);
  };
  long ops_small = 0, ops_large = 0;
  find_decomposer(kb_with_copies(10), &ops_small);
  find_decomposer(kb_with_copies(40), &ops_large);
  CHECK(ops_small > 0);
  // 4x the atoms should cost about 4x the visits, not 16x
  CHECK(static_cast<double>(ops_large) <= 6.0 * static_cast<double>(ops_small));
}

TEST_CASE("apply_decomposer splits the implication fixture into three copies") {
  KnowledgeBase kb = test::fix3();
  auto dec = find_decomposer(kb);
  REQUIRE(dec.has_value());
  DecomposerApplication app = apply_decomposer(kb, *dec);
  CHECK(app.exponent == 3);
  const double sub_log_z = log_partition_exact(ground(app.sub)).log_z;
  CHECK(std::exp(sub_log_z) == doctest::Approx(7.0).epsilon(1e-12));
  CHECK(3.0 * sub_log_z == doctest::Approx(test::kFix3LogZ).epsilon(1e-12));

  // one-constant domain: exponent one, same value
  KnowledgeBase small = parse_kb(
      "domain item = { A }\npredicate S(item)\npredicate C(item)\n0.5 S(x) => C(x)\n");
  auto dsmall = find_decomposer(small);
  REQUIRE(dsmall.has_value());
  DecomposerApplication app1 = apply_decomposer(small, *dsmall);
  CHECK(app1.exponent == 1);
}

TEST_CASE("decomposer closed form reproduces the unary fixture") {
  KnowledgeBase kb = test::fix1();
  auto dec = find_decomposer(kb);
  REQUIRE(dec.has_value());
  DecomposerApplication app = apply_decomposer(kb, *dec);
  CHECK(app.exponent == 2);
  const double sub = log_partition_exact(ground(app.sub)).log_z;
  CHECK(sub == doctest::Approx(std::log1p(std::exp(0.7))).epsilon(1e-13));
  CHECK(2.0 * sub == doctest::Approx(test::kFix1LogZ).epsilon(1e-13));
}

TEST_CASE("decomposer with a shared non-decomposer position") {
  // x decomposes; y rides along in the second position of Q
  KnowledgeBase kb = parse_kb(
      "domain d = { A, B }\n"
      "predicate Q(d, d)\n"
      "predicate P(d)\n"
      "0.4 Q(x, y) ^ P(x)\n");
  auto dec = find_decomposer(kb);
  REQUIRE(dec.has_value());
  CHECK(dec->predicate_position.at("Q") == 0);
  CHECK(dec->predicate_position.at("P") == 0);
  DecomposerApplication app = apply_decomposer(kb, *dec);
  CHECK(app.exponent == 2);
  const double via_rule = 2.0 * log_partition_exact(ground(app.sub)).log_z;
  CHECK(via_rule == doctest::Approx(test::oracle_log_z(kb)).epsilon(1e-11));
}

TEST_CASE("generalized binomial rule on the unary fixture") {
  auto branches = apply_generalized_binomial(test::fix1());
  REQUIRE(branches.has_value());
  REQUIRE(branches->size() == 3);
  LogSumExp acc;
  for (const auto& b : *branches) {
    CHECK(b.sub.formulas.empty());  // each sub-MLN is fully decided
    acc.add(b.log_multiplier + lifted_exact(b.sub));
  }
  CHECK(std::exp(acc.value()) == doctest::Approx(test::kFix1Z).epsilon(1e-12));
}

TEST_CASE("binomial closed form (1+e^w)^D for single-predicate KBs") {
  for (int d = 2; d <= 6; ++d) {
    std::string text = "domain dd = { ";
    for (int c = 0; c < d; ++c) text += (c ? ", C" : "C") + std::to_string(c);
    text += " }\npredicate P(dd)\n0.9 P(x)\n";
    KnowledgeBase kb = parse_kb(text);
    auto branches = apply_generalized_binomial(kb);
    REQUIRE(branches.has_value());
    CHECK(branches->size() == static_cast<std::size_t>(d + 1));
    LogSumExp acc;
    for (const auto& b : *branches) acc.add(b.log_multiplier + lifted_exact(b.sub));
    const double closed = d * std::log1p(std::exp(0.9));
    CHECK(acc.value() == doctest::Approx(closed).epsilon(1e-12));
    CHECK(acc.value() == doctest::Approx(test::oracle_log_z(kb)).epsilon(1e-11));
  }
}

TEST_CASE("binomial rule skips atoms repeated within one formula") {
  KnowledgeBase kb = parse_kb(
      "domain d = { A, B }\n"
      "predicate S(d)\n"
      "0.4 S(x) v S(y)\n");
  CHECK_FALSE(apply_generalized_binomial(kb).has_value());
}

TEST_CASE("binomial rule conditions residual formulas correctly") {
  // S is singleton; conditioning leaves a residual over Q
  KnowledgeBase kb = parse_kb(
      "domain d = { A, B }\n"
      "predicate S(d)\n"
      "predicate Q(d, d)\n"
      "0.8 S(x) v Q(x, y)\n");
  auto branches = apply_generalized_binomial(kb);
  REQUIRE(branches.has_value());
  LogSumExp acc;
  for (const auto& b : *branches) acc.add(b.log_multiplier + lifted_exact(b.sub));
  CHECK(acc.value() == doctest::Approx(test::oracle_log_z(kb)).epsilon(1e-10));
}

TEST_CASE("ground fallback enumerates the smallest predicate") {
  KnowledgeBase kb = test::fix2();
  std::vector<LiftBranch> branches = ground_fallback(kb);
  CHECK(branches.size() == 4);  // Smokes has two groundings
  LogSumExp acc;
  for (const auto& b : branches) acc.add(b.log_multiplier + lifted_exact(b.sub));
  CHECK(acc.value() == doctest::Approx(test::kFix2LogZ).epsilon(1e-11));
}

TEST_CASE("ground fallback on the unary fixture sums to the closed form") {
  std::vector<LiftBranch> branches = ground_fallback(test::fix1());
  CHECK(branches.size() == 4);
  LogSumExp acc;
  for (const auto& b : branches) acc.add(b.log_multiplier + lifted_exact(b.sub));
  CHECK(std::exp(acc.value()) == doctest::Approx(test::kFix1Z).epsilon(1e-11));
}

TEST_CASE("fallback branch limit") {
  KnowledgeBase kb = test::fix2();
  LiftConfig config;
  config.max_fallback_branches = 2;
  CHECK_THROWS_AS(ground_fallback(kb, config), LimitError);
}

TEST_CASE("isolated-variable rule sums out a two-domain predicate") {
  KnowledgeBase kb = parse_kb(
      "domain p = { A, B }\n"
      "domain q = { C, D }\n"
      "predicate R(p, q)\n"
      "predicate S(q)\n"
      "0.5 R(x, y) v S(y)\n");
  LiftConfig config;
  SUBCASE("disabled by default") {
    CHECK_FALSE(apply_isolated_variable(kb, config).has_value());
    // the dispatcher still reproduces the oracle through other rules
    CHECK(lifted_exact(kb, config) ==
          doctest::Approx(test::oracle_log_z(kb)).epsilon(1e-9));
  }
  SUBCASE("enabled") {
    config.enable_isolated = true;
    auto iso = apply_isolated_variable(kb, config);
    REQUIRE(iso.has_value());
    const double via_rule = iso->log_multiplier + lifted_exact(iso->sub, config);
    CHECK(via_rule == doctest::Approx(test::oracle_log_z(kb)).epsilon(1e-9));
    CHECK(via_rule == doctest::Approx(5.768355415705321).epsilon(1e-12));
  }
}

TEST_CASE("isolated rule is not applicable on the friends fixture") {
  LiftConfig config;
  config.enable_isolated = true;
  CHECK_FALSE(apply_isolated_variable(test::fix2(), config).has_value());
}

TEST_CASE("isolated rule handles pure closed-form predicates") {
  KnowledgeBase kb = parse_kb(
      "domain d = { A, B, C }\n"
      "predicate R(d)\n"
      "0.7 R(x)\n");
  LiftConfig config;
  config.enable_isolated = true;
  auto iso = apply_isolated_variable(kb, config);
  REQUIRE(iso.has_value());
  CHECK(iso->sub.formulas.empty());
  CHECK(iso->log_multiplier == doctest::Approx(3 * std::log1p(std::exp(0.7))).epsilon(1e-12));
}

TEST_CASE("isolated rule with several coupled formulas") {
  KnowledgeBase kb = parse_kb(
      "domain p = { A, B, C }\n"
      "domain q = { D, E }\n"
      "predicate R(p, q)\n"
      "predicate S(q)\n"
      "predicate T(q)\n"
      "0.5 R(x, y) v S(y)\n"
      "-0.4 R(u, w) ^ T(w)\n"
      "0.3 S(z) => T(z)\n");
  LiftConfig config;
  config.enable_isolated = true;
  auto iso = apply_isolated_variable(kb, config);
  REQUIRE(iso.has_value());
  const double via_rule = iso->log_multiplier + lifted_exact(iso->sub, config);
  CHECK(via_rule == doctest::Approx(test::oracle_log_z(kb)).epsilon(1e-9));
}

TEST_CASE("dispatcher on the fixtures with the exact base") {
  CHECK(lifted_exact(test::fix1()) == doctest::Approx(test::kFix1LogZ).epsilon(1e-12));
  CHECK(lifted_exact(test::fix2()) == doctest::Approx(test::kFix2LogZ).epsilon(1e-11));
  CHECK(lifted_exact(test::fix3()) == doctest::Approx(test::kFix3LogZ).epsilon(1e-12));
}

TEST_CASE("dispatcher trace on the implication fixture uses the decomposer") {
  ExactBaseSampler base;
  auto [est, trace] = lifted_log_z(test::fix3(), base);
  auto steps = trace.steps();
  REQUIRE(!steps.empty());
  CHECK(steps[0].rule == "decomposer");
  CHECK(est.log_z == doctest::Approx(3.0 * std::log(7.0)).epsilon(1e-12));
  CHECK(trace.replay_log_z() == est.log_z);  // bit-identical replay
}

TEST_CASE("free predicates contribute factors of two through the trace") {
  KnowledgeBase kb = parse_kb(
      "domain d = { A, B, C }\n"
      "predicate P(d)\n"
      "predicate Unused(d, d)\n"
      "0.7 P(x)\n");
  ExactBaseSampler base;
  auto [est, trace] = lifted_log_z(kb, base);
  CHECK(est.log_z == doctest::Approx(test::oracle_log_z(kb)).epsilon(1e-11));
  CHECK(trace.steps()[0].rule == "free_atoms");
}

TEST_CASE("lifted with thermal base matches lifted with exact base") {
  ThermalBaseSampler thermal;
  ExactBaseSampler exact;
  for (const KnowledgeBase& kb : {test::fix1(), test::fix2(), test::fix3()}) {
    auto [t, t_trace] = lifted_log_z(kb, thermal);
    auto [e, e_trace] = lifted_log_z(kb, exact);
    CHECK(std::abs(t.log_z - e.log_z) < 1e-9);
  }
}

TEST_CASE("lifted with AIS base lands within three propagated errors") {
  SamplerConfig ais;
  ais.seed = 31;
  ais.chains = 64;
  ais.ais_ladder = 32;
  AisBaseSampler base(ais);
  auto [est, trace] = lifted_log_z(test::fix2(), base);
  REQUIRE(est.std_error.has_value());
  CHECK(std::abs(est.log_z - test::kFix2LogZ) <= 3.0 * std::max(*est.std_error, 1e-9));
}

TEST_CASE("oracle equivalence on a randomized suite of normal MLNs") {
  SplitMix64 rng(90210);
  LiftConfig config;
  config.max_fallback_branches = 1 << 17;
  int checked = 0;
  while (checked < 50) {
    KnowledgeBase kb = test::random_kb(rng);
    if (!is_normal(kb) || kb.num_ground_atoms() > 16) continue;
    ++checked;
    const double expected = log_partition_exact(ground(kb)).log_z;
    CAPTURE(render(kb));
    CHECK(std::abs(lifted_exact(kb, config) - expected) < 1e-9);
  }
}

TEST_CASE("oracle equivalence with the isolated rule enabled") {
  SplitMix64 rng(60601);
  LiftConfig config;
  config.max_fallback_branches = 1 << 17;
  config.enable_isolated = true;
  int checked = 0;
  while (checked < 30) {
    KnowledgeBase kb = test::random_kb(rng);
    if (!is_normal(kb) || kb.num_ground_atoms() > 16) continue;
    ++checked;
    const double expected = log_partition_exact(ground(kb)).log_z;
    CAPTURE(render(kb));
    CHECK(std::abs(lifted_exact(kb, config) - expected) < 1e-9);
  }
}

TEST_CASE("rule-order permutation leaves the result unchanged") {
  SplitMix64 rng(11911);
  LiftConfig forward;
  forward.max_fallback_branches = 1 << 17;
  LiftConfig swapped = forward;
  swapped.rule_order = {"binomial", "isolated", "decomposer"};
  int checked = 0;
  while (checked < 20) {
    KnowledgeBase kb = test::random_kb(rng);
    if (!is_normal(kb) || kb.num_ground_atoms() > 14) continue;
    ++checked;
    CHECK(std::abs(lifted_exact(kb, forward) - lifted_exact(kb, swapped)) < 1e-9);
  }
}

TEST_CASE("trace replay reproduces the returned value exactly") {
  SplitMix64 rng(31337);
  ExactBaseSampler base;
  for (int i = 0; i < 10; ++i) {
    KnowledgeBase kb = test::random_kb(rng);
    if (!is_normal(kb)) continue;
    LiftConfig config;
    config.max_fallback_branches = 1 << 17;
    auto [est, trace] = lifted_log_z(kb, base, config);
    CHECK(trace.replay_log_z() == est.log_z);
  }
}

TEST_CASE("memoization shares isomorphic sub-networks") {
  // the fallback on Smokes produces sibling branches with shared shapes
  KnowledgeBase kb = test::fix2();
  ExactBaseSampler base;
  LiftConfig with;
  with.memoize = true;
  LiftConfig without;
  without.memoize = false;
  auto [a, ta] = lifted_log_z(kb, base, with);
  auto [b, tb] = lifted_log_z(kb, base, without);
  CHECK(a.log_z == doctest::Approx(b.log_z).epsilon(1e-14));
}

TEST_CASE("canonical memo key ignores constant names but not structure") {
  KnowledgeBase a = parse_kb("domain d = { A, B }\npredicate P(d)\n0.5 P(x)\n");
  KnowledgeBase b = parse_kb("domain d = { X, Y }\npredicate P(d)\n0.5 P(x)\n");
  KnowledgeBase c = parse_kb("domain d = { A, B, C }\npredicate P(d)\n0.5 P(x)\n");
  CHECK(canonical_memo_key(a) == canonical_memo_key(b));
  CHECK(canonical_memo_key(a) != canonical_memo_key(c));
  // variable naming is normalized
  KnowledgeBase v1 = parse_kb("domain d = { A }\npredicate Q(d, d)\n0.5 Q(x, y)\n");
  KnowledgeBase v2 = parse_kb("domain d = { A }\npredicate Q(d, d)\n0.5 Q(u, w)\n");
  CHECK(canonical_memo_key(v1) == canonical_memo_key(v2));
}

TEST_CASE("empty and fully ground knowledge bases hit the base case") {
  ExactBaseSampler base;
  KnowledgeBase tiny = parse_kb("domain d = { A }\npredicate P(d)\n0.7 P(x)\n");
  auto [est, trace] = lifted_log_z(tiny, base);
  CHECK(trace.steps()[0].rule == "base");
  CHECK(est.log_z == doctest::Approx(std::log1p(std::exp(0.7))).epsilon(1e-13));
}
