#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "neco/causal_discovery.hpp"
#include "neco/sem_model.hpp"
#include "neco/simulation.hpp"

using namespace neco;

namespace {

Matrix cov_to_corr(const Matrix& cov) {
  const Vector inv_sd = cov.diagonal().array().sqrt().inverse();
  return inv_sd.asDiagonal() * cov * inv_sd.asDiagonal();
}

Matrix population_corr(const Matrix& B) {
  const Matrix inv = contagion_inverse(B);
  return cov_to_corr(inv * inv.transpose());
}

Matrix gaussian_sample(const Matrix& B, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> norm;
  const Matrix inv = contagion_inverse(B);
  Matrix eps(n, B.rows());
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = norm(rng);
  return eps * inv.transpose();
}

Matrix coefficients_on(const CausalGraph& g, double value) {
  Matrix B = Matrix::Zero(g.p, g.p);
  for (const auto& [from, to] : g.directed) B(to, from) = value;
  return B;
}

// Every orientation of the CPDAG's undirected edges that yields a DAG whose
// CPDAG is the input; as parent assignments.
std::set<std::vector<std::vector<int>>> brute_force_class(const CausalGraph& cpdag) {
  std::vector<NodePair> und(cpdag.undirected.begin(), cpdag.undirected.end());
  std::set<std::vector<std::vector<int>>> out;
  for (std::size_t mask = 0; mask < (std::size_t{1} << und.size()); ++mask) {
    CausalGraph d;
    d.p = cpdag.p;
    d.directed = cpdag.directed;
    for (std::size_t k = 0; k < und.size(); ++k) {
      const auto [a, b] = und[k];
      d.directed.insert(mask & (std::size_t{1} << k) ? NodePair{a, b} : NodePair{b, a});
    }
    if (!d.directed_acyclic()) continue;
    const auto c = cpdag_of_dag(d);
    if (c.directed != cpdag.directed || c.undirected != cpdag.undirected) continue;
    std::vector<std::vector<int>> pa(static_cast<std::size_t>(d.p));
    for (int i = 0; i < d.p; ++i) {
      pa[static_cast<std::size_t>(i)] = d.parents(i);
      std::sort(pa[static_cast<std::size_t>(i)].begin(), pa[static_cast<std::size_t>(i)].end());
    }
    out.insert(pa);
  }
  return out;
}

}  // namespace

TEST(FisherZ, StatisticExample) {
  Matrix corr(2, 2);
  corr << 1.0, 0.5, 0.5, 1.0;
  const auto res = fisher_z_ci_test(corr, 0, 1, {}, 103, 0.01);
  EXPECT_NEAR(res.statistic, 5.493061443340547, 1e-12);
  EXPECT_FALSE(res.independent);
  EXPECT_NEAR(standard_normal_quantile(1.0 - 0.005), 2.5758293035489004, 1e-9);
  EXPECT_LT(res.pvalue, 1e-6);
}

TEST(FisherZ, TooFewObservations) {
  const Matrix corr = Matrix::Identity(3, 3);
  EXPECT_THROW(fisher_z_ci_test(corr, 0, 1, {2}, 4, 0.01), InsufficientData);
  EXPECT_NO_THROW(fisher_z_ci_test(corr, 0, 1, {2}, 5, 0.01));
}

TEST(FisherZ, InvalidAlpha) {
  const Matrix corr = Matrix::Identity(3, 3);
  EXPECT_THROW(pc_stable_skeleton(corr, 100, CITestConfig{0.0, {}}), DomainError);
  EXPECT_THROW(pc_stable_skeleton(corr, 100, CITestConfig{1.0, {}}), DomainError);
}

// Partial correlation equals the correlation of OLS residuals on the conditioning set.
TEST(PartialCorrelation, MatchesResidualOracle) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> norm;
  const int n = 400, p = 6;
  Matrix mix(p, p);
  for (Eigen::Index i = 0; i < mix.size(); ++i) mix.data()[i] = norm(rng);
  Matrix x(n, p);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = norm(rng);
  x = x * mix;
  const Matrix corr = correlation_matrix(x);
  const std::vector<std::vector<int>> sets{{}, {2}, {2, 3}, {2, 3, 4, 5}};
  for (const auto& s : sets) {
    Matrix Z(n, static_cast<Eigen::Index>(s.size()) + 1);
    Z.col(0).setOnes();
    for (std::size_t k = 0; k < s.size(); ++k) Z.col(static_cast<Eigen::Index>(k) + 1) = x.col(s[k]);
    auto resid = [&](int c) -> Vector {
      const Vector y = x.col(c);
      return y - Z * Z.colPivHouseholderQr().solve(y);
    };
    const Vector r0 = resid(0), r1 = resid(1);
    const double oracle = r0.dot(r1) / (r0.norm() * r1.norm());
    EXPECT_NEAR(partial_correlation(corr, 0, 1, s), oracle, 1e-10);
  }
}

TEST(PartialCorrelation, SingularConditioningSet) {
  Matrix corr = Matrix::Ones(3, 3);
  corr(0, 1) = corr(1, 0) = 0.5;
  EXPECT_THROW(partial_correlation(corr, 0, 1, {2}), NumericalError);
}

TEST(PcStable, IndependentSeriesGiveFewEdges) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> norm;
  Matrix x(2000, 5);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = norm(rng);
  const auto skel = pc_stable_skeleton(correlation_matrix(x), 2000, CITestConfig{});
  EXPECT_LE(skel.edges.size(), 1u);
}

TEST(PcStable, ChainStaysUndirected) {
  const auto g = directed_graph(3, {{0, 1}, {1, 2}});
  const auto est = orient_cpdag(pc_stable_skeleton(population_corr(coefficients_on(g, 0.8)), 100000, CITestConfig{}));
  EXPECT_TRUE(est.directed.empty());
  EXPECT_EQ(est.undirected, (std::set<NodePair>{{0, 1}, {1, 2}}));
  EXPECT_EQ(est.sepsets.at({0, 2}), std::vector<int>{1});
}

TEST(PcStable, ColliderIsOriented) {
  const auto g = directed_graph(3, {{0, 2}, {1, 2}});
  const auto est = orient_cpdag(pc_stable_skeleton(population_corr(coefficients_on(g, 0.8)), 100000, CITestConfig{}));
  EXPECT_EQ(est.directed, (std::set<NodePair>{{0, 2}, {1, 2}}));
  EXPECT_TRUE(est.undirected.empty());
}

TEST(PcStable, ReferenceNetworkFromPopulationCorrelation) {
  const auto g = reference_network();
  const auto est = orient_cpdag(pc_stable_skeleton(population_corr(coefficients_on(g, 0.5)), 100000, CITestConfig{}));
  EXPECT_EQ(est.skeleton(), g.skeleton());
  EXPECT_EQ(est.directed.size(), 6u);
  EXPECT_EQ(est.undirected, (std::set<NodePair>{{1, 2}}));
  const auto truth = cpdag_of_dag(g);
  EXPECT_EQ(est.directed, truth.directed);
  EXPECT_EQ(est.undirected, truth.undirected);
}

TEST(PcStable, MaxConditioningSizeLimitsSearch) {
  const auto g = directed_graph(3, {{0, 1}, {1, 2}});
  const auto skel = pc_stable_skeleton(population_corr(coefficients_on(g, 0.8)), 100000, CITestConfig{0.01, 0});
  EXPECT_EQ(skel.edges.size(), 3u);
}

TEST(PcStable, SkeletonInvariantToColumnOrder) {
  const auto g = reference_network();
  const Matrix x = gaussian_sample(coefficients_on(g, 0.5), 600, 5);
  const auto base = pc_stable_skeleton(correlation_matrix(x), 600, CITestConfig{});
  std::mt19937_64 rng(17);
  std::vector<int> perm(5);
  for (int rep = 0; rep < 20; ++rep) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix xp(x.rows(), 5);
    for (int j = 0; j < 5; ++j) xp.col(j) = x.col(perm[static_cast<std::size_t>(j)]);
    const auto sk = pc_stable_skeleton(correlation_matrix(xp), 600, CITestConfig{});
    std::set<NodePair> mapped;
    for (const auto& [a, b] : sk.edges) mapped.insert(unordered_pair(perm[static_cast<std::size_t>(a)], perm[static_cast<std::size_t>(b)]));
    EXPECT_EQ(mapped, base.edges) << "permutation " << rep;
  }
}

TEST(PcStable, DiscoveredGraphsAreAcyclic) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    std::mt19937_64 rng(seed);
    const auto g = random_dag(7, 0.5, rng);
    const Matrix B = draw_contagion_coefficients(g, rng);
    const Matrix x = gaussian_sample(B, 300, seed + 100);
    const auto est = orient_cpdag(pc_stable_skeleton(correlation_matrix(x), 300, CITestConfig{}));
    EXPECT_TRUE(est.directed_acyclic()) << "seed " << seed;
    const auto ext = dag_extension(est);
    EXPECT_TRUE(ext.directed_acyclic());
    EXPECT_TRUE(ext.undirected.empty());
    EXPECT_EQ(ext.skeleton(), est.skeleton());
  }
}

TEST(Discover, RejectsShortPanels) {
  LatentPanel lp;
  lp.values = Matrix::Random(8, 5);
  lp.instruments = {"a", "b", "c", "d", "e"};
  EXPECT_THROW(pc_stable_skeleton(lp, CITestConfig{}), InsufficientData);
}

TEST(ParentSets, UndirectedChain) {
  CausalGraph g;
  g.p = 3;
  g.undirected = {{0, 1}, {1, 2}};
  const auto sets = enumerate_parent_sets(g, 1);
  EXPECT_EQ(sets, (std::vector<std::vector<int>>{{}, {0}, {2}}));
  EXPECT_EQ(enumerate_parent_sets(g, 0), (std::vector<std::vector<int>>{{}, {1}}));
}

TEST(ParentSets, CompleteUndirectedTriangle) {
  CausalGraph g;
  g.p = 3;
  g.undirected = {{0, 1}, {0, 2}, {1, 2}};
  EXPECT_EQ(enumerate_parent_sets(g, 0).size(), 4u);
}

TEST(ParentSets, FixedParentExcludesNonAdjacentNeighbour) {
  CausalGraph g;
  g.p = 3;
  g.directed = {{0, 1}};
  g.undirected = {{1, 2}};
  EXPECT_EQ(enumerate_parent_sets(g, 1), (std::vector<std::vector<int>>{{0}}));
}

TEST(CpdagOfDag, ReferenceNetwork) {
  const auto c = cpdag_of_dag(reference_network());
  EXPECT_EQ(c.directed.size(), 6u);
  EXPECT_EQ(c.undirected, (std::set<NodePair>{{1, 2}}));
  const auto again = cpdag_of_dag(dag_extension(c));
  EXPECT_EQ(again.directed, c.directed);
  EXPECT_EQ(again.undirected, c.undirected);
}

// The ensemble's parent assignments match a brute-force enumeration of the
// Markov equivalence class whenever the class is small enough to enumerate.
TEST(Ensemble, MatchesEquivalenceClass) {
  int checked = 0;
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    std::mt19937_64 rng(seed);
    const auto dag = random_dag(5, 0.5, rng);
    const auto cpdag = cpdag_of_dag(dag);
    const auto truth = brute_force_class(cpdag);
    ASSERT_FALSE(truth.empty());
    if (truth.size() > kMaxEnsembleModels) continue;
    const auto got = ensemble_assignments(cpdag);
    std::set<std::vector<std::vector<int>>> got_set;
    for (auto pa : got) {
      for (auto& s : pa) std::sort(s.begin(), s.end());
      got_set.insert(pa);
    }
    EXPECT_EQ(got_set.size(), got.size());
    EXPECT_EQ(got_set, truth) << "seed " << seed;
    ++checked;
  }
  EXPECT_GT(checked, 150);
}
