#include <gtest/gtest.h>

#include "gbpandas/capacity.hpp"
#include "support/instances.hpp"
#include "support/oracles.hpp"

using namespace gbp;

namespace {

LocalityTable two_server_table() { return LocalityTable(ClusterTopology({2}), {TaskType({0})}); }

}  // namespace

TEST(Capacity, ZeroRateIsFeasible) {
  const auto table = LocalityTable::all_types(ClusterTopology({2, 3}), 2);
  const std::vector<double> mu{1, 2, 4};
  RateVector zero{std::vector<double>(table.type_count(), 0.0)};
  const auto r = capacity_membership(table, mu, zero);
  EXPECT_EQ(r.rho_star, 0.0);
  EXPECT_TRUE(r.feasible);
  EXPECT_TRUE(std::isinf(r.delta));
}

TEST(Capacity, TwoServerSplit) {
  const auto table = two_server_table();
  const std::vector<double> mu{1, 2};
  const auto r = capacity_membership(table, mu, RateVector{{1.4}});
  EXPECT_NEAR(r.rho_star, 14.0 / 15.0, 1e-12);
  EXPECT_TRUE(r.feasible);
  EXPECT_NEAR(r.delta, 15.0 / 14.0 - 1.0, 1e-12);
  EXPECT_NEAR(r.witness.at(0, 0), 14.0 / 15.0, 1e-12);
  // Test-side grid search over the split at step 1e-4.
  EXPECT_NEAR(oracle::two_server_split_rho(1.4, 1, 2, 1e-4), 14.0 / 15.0, 2e-4);
}

TEST(Capacity, TwoServerSplitInfeasible) {
  const auto r = capacity_membership(two_server_table(), std::vector<double>{1, 2}, RateVector{{1.6}});
  EXPECT_NEAR(r.rho_star, 16.0 / 15.0, 1e-12);
  EXPECT_FALSE(r.feasible);
}

TEST(Capacity, SymmetricThreeWaySplit) {
  // Every server holds the data, so only the level-1 mean matters.
  const LocalityTable table(ClusterTopology({3}), {TaskType({0, 1, 2})});
  const auto r = capacity_membership(table, std::vector<double>{1, 5}, RateVector{{2.4}});
  EXPECT_NEAR(r.rho_star, 0.8, 1e-12);
  for (ServerIndex m = 0; m < 3; ++m) EXPECT_NEAR(r.witness.at(0, m), 0.8, 1e-12);
}

TEST(Capacity, BoundaryIsInfeasible) {
  const LocalityTable table(ClusterTopology({3}), {TaskType({0, 1, 2})});
  EXPECT_FALSE(capacity_membership(table, std::vector<double>{1, 5}, RateVector{{3.0}}).feasible);
}

TEST(Capacity, WitnessLoadsWithinRho) {
  Rng rng(2024);
  for (int i = 0; i < 50; ++i) {
    const auto inst = fixtures::small_lp(rng);
    const auto r = capacity_membership(inst.table, inst.means, inst.lambda);
    EXPECT_TRUE(is_valid_decomposition(inst.lambda, r.witness));
    for (double load : server_loads(inst.table, inst.means, r.witness)) EXPECT_LE(load, r.rho_star + 1e-9);
  }
}

TEST(Capacity, Homogeneous) {
  const auto table = LocalityTable::all_types(ClusterTopology({2, 2}), 2);
  const std::vector<double> mu{1, 1.5, 3};
  Rng rng(5);
  RateVector lambda;
  for (std::size_t l = 0; l < table.type_count(); ++l) lambda.rates.push_back(rng.uniform());
  RateVector scaled = lambda;
  for (double& x : scaled.rates) x *= 3.5;
  EXPECT_NEAR(capacity_membership(table, mu, scaled).rho_star, 3.5 * capacity_membership(table, mu, lambda).rho_star,
              1e-9);
}

TEST(Capacity, ServerPermutationSymmetry) {
  // Swapping the two racks of [2,3] is an automorphism: rack r server k <-> rack 1-r server k.
  const ClusterTopology topo({2, 3});
  const auto table = LocalityTable::all_types(topo, 2);
  const std::vector<double> mu{1, 2, 4};
  Rng rng(17);
  RateVector lambda;
  for (std::size_t l = 0; l < table.type_count(); ++l) lambda.rates.push_back(rng.uniform());
  RateVector swapped{std::vector<double>(table.type_count(), 0.0)};
  for (TypeIndex l = 0; l < table.type_count(); ++l) {
    std::vector<ServerIndex> image;
    for (ServerIndex s : table.type(l).locals()) image.push_back((s + 3) % 6);
    std::sort(image.begin(), image.end());
    const TaskType t(image);
    for (TypeIndex k = 0; k < table.type_count(); ++k) {
      if (table.type(k) == t) swapped.rates[k] = lambda.rates[l];
    }
  }
  EXPECT_NEAR(capacity_membership(table, mu, lambda).rho_star, capacity_membership(table, mu, swapped).rho_star, 1e-9);
}

TEST(Capacity, RejectsBadInput) {
  const auto table = two_server_table();
  EXPECT_THROW(capacity_membership(table, std::vector<double>{1, 2}, RateVector{{-1.0}}), std::domain_error);
  EXPECT_THROW(capacity_membership(table, std::vector<double>{1, 2}, RateVector{{1.0, 1.0}}), std::invalid_argument);
  EXPECT_THROW(capacity_membership(table, std::vector<double>{1}, RateVector{{1.0}}), std::invalid_argument);
}

TEST(Capacity, DeskLpSolves) {
  const auto table = LocalityTable::all_types(ClusterTopology({2, 2, 3}), 3);
  ServiceModel service(ServiceFamily::lognormal, {1.0, 10.0 / 9.0, 5.0 / 3.0, 4.0});
  const auto pop = Popularity::uniform(table.type_count());
  RateVector lambda{std::vector<double>(pop.probabilities().begin(), pop.probabilities().end())};
  const auto r = capacity_membership(table, service.effective_means(), lambda);
  // Uniform popularity over all 3-subsets: every server can serve its share
  // locally, so rho* = alpha_1 / M per unit of total rate.
  EXPECT_NEAR(r.rho_star, service.effective_means()[0] / 12.0, 1e-9);
  EXPECT_TRUE(is_valid_decomposition(lambda, r.witness));
}

TEST(BruteForce, ZeroRate) {
  const auto r = brute_force_membership(two_server_table(), std::vector<double>{1, 2}, RateVector{{0.0}}, 0.01);
  EXPECT_EQ(r.rho_star, 0.0);
}

TEST(BruteForce, RefusesLargeInstances) {
  const auto table = LocalityTable::all_types(ClusterTopology({2, 2}), 2);
  RateVector lambda{std::vector<double>(table.type_count(), 1.0)};
  EXPECT_THROW(brute_force_membership(table, std::vector<double>{1, 2, 3}, lambda, 0.1), std::domain_error);
}

TEST(BruteForce, TwoServerSplitWithinBound) {
  const auto r = brute_force_membership(two_server_table(), std::vector<double>{1, 2}, RateVector{{1.4}}, 1e-4);
  EXPECT_LE(std::abs(r.rho_star - 14.0 / 15.0), r.error_bound);
  EXPECT_GE(r.rho_star, 14.0 / 15.0 - 1e-12);
}

TEST(BruteForce, AgreesWithLp) {
  Rng rng(99);
  for (int i = 0; i < 20; ++i) {
    const auto inst = fixtures::small_lp(rng);
    const auto lp = capacity_membership(inst.table, inst.means, inst.lambda);
    const auto grid = brute_force_membership(inst.table, inst.means, inst.lambda, inst.grid_step);
    EXPECT_GE(grid.rho_star, lp.rho_star - 1e-9);
    EXPECT_LE(grid.rho_star, lp.rho_star + grid.error_bound + 1e-12);
    // The grid witness's loads never exceed the reported rho.
    for (double load : server_loads(inst.table, inst.means, grid.witness)) EXPECT_LE(load, grid.rho_star + 1e-12);
  }
}

TEST(Refine, EvenSplit) {
  const auto table = LocalityTable(ClusterTopology({3}), {TaskType({0, 1, 2})});
  Decomposition dec(1, 3);
  dec.at(0, 1) = 0.9;
  const auto refined = refine_decomposition(table, dec);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(refined.at(0, j, 1), 0.3, 1e-15);
}

TEST(Refine, RoundTripIsExact) {
  Rng rng(7);
  const auto table = LocalityTable::all_types(ClusterTopology({2, 2, 3}), 3);
  const std::vector<double> mu{1, 10.0 / 9.0, 5.0 / 3.0, 4.0};
  Decomposition dec(table.type_count(), table.servers());
  for (double& x : dec.rate) x = rng.uniform() < 0.3 ? rng.uniform() / 7.0 : 0.0;
  const auto refined = refine_decomposition(table, dec);
  const auto back = coarsen_decomposition(refined);
  EXPECT_EQ(back.rate, dec.rate);
  EXPECT_EQ(server_loads(table, mu, refined), server_loads(table, mu, dec));
}

TEST(Refine, RejectsMismatchedShape) {
  EXPECT_THROW(refine_decomposition(two_server_table(), Decomposition(2, 2)), std::invalid_argument);
}
