#include <gtest/gtest.h>

#include <cmath>

#include "onion_anon/distributions.hpp"
#include "onion_anon/montecarlo.hpp"
#include "test_support.hpp"

using namespace onion_anon;
namespace t = onion_anon::testing;

TEST(MonteCarlo, ExtremesOfBAreExact) {
  const Scenario s0 = t::random_scenario(4, 3, 0.0, 1);
  const Scenario s1 = t::random_scenario(4, 3, 1.0, 1);
  const McOptions opts{5000, 7, 1};
  const auto e0 = estimate_expected_posterior(s0, {0, 2}, opts);
  EXPECT_NEAR(e0.mean, s0.prob(0, 2), 1e-12);
  EXPECT_EQ(e0.std_error, 0.0);
  const auto e1 = estimate_expected_posterior(s1, {0, 2}, opts);
  EXPECT_EQ(e1.mean, 1.0);
  EXPECT_EQ(e1.std_error, 0.0);
  EXPECT_EQ(e1.samples, 5000u);
  EXPECT_EQ(e1.seed, 7u);
}

TEST(MonteCarlo, GenericAgreesWithFormula) {
  const Scenario s = t::random_scenario(4, 2, 0.5, 2);
  const double exact = expected_posterior_formula(s, {0, 0});
  const auto est = estimate_expected_posterior(s, {0, 0}, {100000, 99, 4});
  EXPECT_LE(std::fabs(est.mean - exact), 4 * est.std_error);
  EXPECT_GT(est.std_error, 0.0);
}

TEST(MonteCarlo, ReproducibleAcrossThreads) {
  const Scenario s = t::random_scenario(5, 3, 0.3, 3);
  const auto a = estimate_expected_posterior(s, {1, 1}, {20000, 5, 1});
  for (unsigned threads : {2u, 3u, 8u}) {
    const auto b = estimate_expected_posterior(s, {1, 1}, {20000, 5, threads});
    EXPECT_EQ(a.mean, b.mean);
    EXPECT_EQ(a.std_error, b.std_error);
  }
  const WorstCasePopulation pop{1000, 0.3, 0.2, 0.3, 0.1};
  EXPECT_EQ(estimate_worst_case(pop, {30000, 1, 1}).mean, estimate_worst_case(pop, {30000, 1, 6}).mean);
  const CommonPopulation com{500, 0.2, {0.5, 0.5}, 0};
  EXPECT_EQ(estimate_common(com, {30000, 1, 1}).mean, estimate_common(com, {30000, 1, 5}).mean);
  EXPECT_NE(estimate_common(com, {30000, 1, 1}).mean, estimate_common(com, {30000, 2, 1}).mean);
}

TEST(MonteCarlo, Coverage) {
  const Scenario s = t::random_scenario(4, 2, 0.4, 4);
  const double exact = expected_posterior_formula(s, {0, 0});
  int within2 = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto est = estimate_expected_posterior(s, {0, 0}, {2000, 1000 + seed, 2});
    within2 += std::fabs(est.mean - exact) <= 2 * est.std_error;
  }
  EXPECT_GE(within2, 90);
}

TEST(MonteCarlo, WorstCaseModeMatchesGeneric) {
  const std::vector<double> u{0.3, 0.7};
  const std::size_t n = 10;
  const double alpha = 0.4, b = 0.3;
  const auto pop = worst_case_population(n, alpha, b, u);
  const Scenario s = build_worst_case_scenario(n, alpha, b, u);
  const auto a = estimate_worst_case(pop, {200000, 11, 4});
  const auto g = estimate_expected_posterior(s, {0, 0}, {50000, 12, 4});
  EXPECT_LE(std::fabs(a.mean - g.mean), 4 * std::hypot(a.std_error, g.std_error));
  EXPECT_NEAR(a.mean, worst_case_expected_exact(pop), 4 * a.std_error);
}

TEST(MonteCarlo, CommonModeMatchesExact) {
  const auto zipf = make_distribution(DistributionSpec::zipf(20, 1.0));
  for (std::size_t n : {1u, 7u, 150u}) {
    const CommonPopulation pop{n, 0.3, zipf, 2};
    const auto est = estimate_common(pop, {100000, 13, 4});
    EXPECT_NEAR(est.mean, common_expected_exact(pop), 4 * est.std_error + 1e-12) << "n=" << n;
  }
}

TEST(MonteCarlo, Errors) {
  const Scenario s = validate_scenario(0.5, {{1.0, 0.0}, {0.5, 0.5}});
  EXPECT_THROW(estimate_expected_posterior(s, {0, 1}, {100, 1, 1}), ModelError);
  EXPECT_THROW(estimate_expected_posterior(s, {0, 0}, {1, 1, 1}), ModelError);
  EXPECT_THROW(estimate_expected_posterior(t::random_scenario(41, 2, 0.5, 1), {0, 0}, {100, 1, 1}),
               SizeLimitError);
  EXPECT_THROW(estimate_worst_case({5, 0.5, 0.3, 0.0, 0.1}, {100, 1, 1}), ModelError);
}
