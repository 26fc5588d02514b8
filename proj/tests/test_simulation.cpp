#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "neco/simulation.hpp"
#include "neco/studies.hpp"

using namespace neco;

namespace {

double sample_skewness(const Vector& x) {
  const double m = x.mean();
  const double m2 = (x.array() - m).square().mean();
  const double m3 = (x.array() - m).cube().mean();
  return m3 / std::pow(m2, 1.5);
}

}  // namespace

TEST(RandomDag, DensityEndpoints) {
  std::mt19937_64 rng(1);
  EXPECT_EQ(random_dag(5, 0.0, rng).edge_count(), 0u);
  const auto full = random_dag(5, 1.0, rng);
  EXPECT_EQ(full.edge_count(), 10u);
  EXPECT_TRUE(full.directed_acyclic());
  EXPECT_DOUBLE_EQ(graph_density(full), 1.0);
}

TEST(RandomDag, ExactEdgeCount) {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    const auto g = random_dag_with_edges(5, 7, rng);
    EXPECT_EQ(g.edge_count(), 7u);
    EXPECT_DOUBLE_EQ(graph_density(g), 0.7);
    EXPECT_TRUE(g.directed_acyclic());
  }
  EXPECT_THROW(random_dag_with_edges(5, 11, rng), DomainError);
  EXPECT_DOUBLE_EQ(graph_density(reference_network()), 0.7);
}

TEST(RandomDag, AverageDensityMatchesProbability) {
  double acc = 0.0;
  for (std::uint64_t s = 0; s < 400; ++s) acc += graph_density(random_dag(10, 0.3, s));
  EXPECT_NEAR(acc / 400, 0.3, 0.02);
}

TEST(Coefficients, MagnitudeRange) {
  std::mt19937_64 rng(3);
  const auto g = random_dag(8, 0.6, rng);
  const Matrix B = draw_contagion_coefficients(g, rng);
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      if (g.has_directed(j, i)) {
        EXPECT_GE(std::fabs(B(i, j)), 0.3);
        EXPECT_LE(std::fabs(B(i, j)), 0.9);
      } else {
        EXPECT_EQ(B(i, j), 0.0);
      }
    }
  }
  EXPECT_TRUE(support_acyclic(B));
}

TEST(Calibration, ZeroTarget) {
  std::mt19937_64 rng(4);
  const auto g = reference_network();
  const auto m = calibrate_contagion(g, draw_contagion_coefficients(g, rng), 0.0, 1.0);
  EXPECT_EQ(m.B, Matrix::Zero(5, 5));
}

TEST(Calibration, ReferenceNetworkHitsTarget) {
  for (std::uint64_t s = 1; s <= 20; ++s) {
    std::mt19937_64 rng(s);
    const auto g = reference_network();
    const auto m = calibrate_contagion(g, draw_contagion_coefficients(g, rng), 0.47, 0.01);
    EXPECT_NEAR(necof(m).market, 0.47, 1e-4);
  }
}

TEST(Calibration, SweepTargetsOnTenNodes) {
  for (std::uint64_t s = 1; s <= 10; ++s) {
    std::mt19937_64 rng(s);
    const auto g = random_dag(10, sparse_density(10), rng);
    const Matrix base = draw_contagion_coefficients(g, rng);
    for (double target : {0.0, 0.19, 0.47, 0.73, 0.83}) {
      EXPECT_NEAR(necof(calibrate_contagion(g, base, target, 1.0)).market, target, 1e-4) << "seed " << s;
    }
  }
}

TEST(Calibration, UnreachableTarget) {
  const auto g = directed_graph(4, {});
  try {
    calibrate_contagion(g, Matrix::Zero(4, 4), 0.3, 1.0);
    FAIL() << "expected CalibrationError";
  } catch (const CalibrationError& e) {
    EXPECT_EQ(e.achieved_supremum(), 0.0);
  }
  EXPECT_THROW(calibrate_scale(Matrix::Zero(2, 2), Vector::Ones(2), 1.0), DomainError);
}

TEST(Calibration, NecofMonotoneInScale) {
  std::mt19937_64 rng(5);
  const auto g = random_dag(6, 0.6, rng);
  const Matrix base = draw_contagion_coefficients(g, rng);
  double prev = -1.0;
  for (double c = 0.0; c < 5.0; c += 0.05) {
    const double v = necof(Matrix(c * base), Vector::Ones(6)).market;
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(SimConfig, Validation) {
  SimConfig c;
  c.density = 1.5;
  EXPECT_THROW(c.validate(), DomainError);
  c = SimConfig{};
  c.target_necof = 1.0;
  EXPECT_THROW(c.validate(), DomainError);
  c = SimConfig{};
  c.sigma = 0.0;
  EXPECT_THROW(c.validate(), DomainError);
  c = SimConfig{};
  c.shock_period = 0;
  EXPECT_THROW(c.validate(), DomainError);
  c = SimConfig{};
  c.edges = 11;
  EXPECT_THROW(c.validate(), DomainError);
  EXPECT_THROW(parse_noise("cauchy"), DomainError);
}

TEST(SimulateSem, GaussianMoments) {
  const auto g = directed_graph(3, {});
  SimConfig c;
  c.p = 3;
  c.sigma = 0.5;
  c.N = 20000;
  c.seed = 6;
  const auto panel = simulate_sem(build_sim_model(c, g), c);
  const double N = c.N;
  for (int j = 0; j < 3; ++j) {
    const Vector x = panel.values.col(j);
    const double m = x.mean();
    const double s2 = (x.array() - m).square().sum() / (N - 1);
    EXPECT_LT(std::fabs(m), 5 * 0.5 / std::sqrt(N));
    EXPECT_LT(std::fabs(s2 / 0.25 - 1.0), 5 * std::sqrt(2.0 / N));
  }
}

TEST(SimulateSem, ExponentialSkewness) {
  const auto g = directed_graph(1, {});
  SimConfig c;
  c.p = 1;
  c.noise = NoiseKind::exponential;
  c.N = 100000;
  c.seed = 7;
  const auto panel = simulate_sem(build_sim_model(c, g), c);
  EXPECT_NEAR(sample_skewness(panel.values.col(0)), 2.0, 0.2);
}

TEST(SimulateSem, ShockedRows) {
  SimConfig c;
  c.target_necof = 0.47;
  c.N = 1000;
  c.shock_period = 100;
  c.noise = NoiseKind::exponential;
  c.seed = 8;
  const auto model = build_sim_model(c, reference_network());
  const auto shocked = simulate_sem_path(model, c, true);
  const auto plain = simulate_sem_path(model, c, false);
  ASSERT_EQ(shocked.shocked_rows.size(), 10u);
  EXPECT_TRUE(plain.shocked_rows.empty());
  for (int r : shocked.shocked_rows) {
    EXPECT_EQ((r + 1) % 100, 0);
    for (int j = 0; j < 5; ++j) EXPECT_LT(shocked.panel.values(r, j), plain.panel.values(r, j));
  }
  // Rows before the first shock are untouched.
  EXPECT_EQ(shocked.panel.values.topRows(99), plain.panel.values.topRows(99));
}

TEST(SimulateSem, BitIdenticalReruns) {
  SimConfig c;
  c.p = 8;
  c.density = 0.4;
  c.target_necof = 0.6;
  c.L = 2;
  c.ar_coef = 0.3;
  c.noise = NoiseKind::exponential;
  c.shock_period = 50;
  c.seed = 9;
  const auto a = simulate_sem(build_sim_model(c), c);
  const auto b = simulate_sem(build_sim_model(c), c);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.times, b.times);
  c.seed = 10;
  EXPECT_NE(simulate_sem(build_sim_model(c), c).values, a.values);
}

TEST(SimulateSem, SampleNecofNearTarget) {
  double acc = 0.0;
  for (std::uint64_t s = 1; s <= 20; ++s) {
    SimConfig c;
    c.target_necof = 0.47;
    c.N = 5000;
    c.seed = s;
    const auto truth = build_sim_model(c, reference_network());
    const auto panel = simulate_sem(truth, c);
    acc += necof(fit_sem(panel.values, truth.labels, reference_network(), 0).primary()).market;
  }
  EXPECT_NEAR(acc / 20.0, 0.47, 0.05);
}

// The recursion and a direct draw from the implied joint normal agree in
// their first two moments.
TEST(SimulateSem, RecursionMatchesJointNormalDraw) {
  SimConfig c;
  c.target_necof = 0.47;
  c.N = 50000;
  c.seed = 12;
  const auto model = build_sim_model(c, reference_network());
  const Matrix a = simulate_sem(model, c).values;
  const Matrix L = implied_covariance(model).llt().matrixL();
  std::mt19937_64 rng(13);
  std::normal_distribution<double> z;
  Matrix e(c.N, 5);
  for (Eigen::Index i = 0; i < e.size(); ++i) e.data()[i] = z(rng);
  const Matrix b = e * L.transpose();
  const double N = c.N;
  for (int i = 0; i < 5; ++i) {
    const Vector ai = a.col(i), bi = b.col(i);
    const double sd = std::sqrt(implied_covariance(model)(i, i));
    EXPECT_LT(std::fabs(ai.mean() - bi.mean()), 5 * sd * std::sqrt(2.0 / N));
    for (int j = 0; j <= i; ++j) {
      const Vector aj = a.col(j), bj = b.col(j);
      const double ca = ((ai.array() - ai.mean()) * (aj.array() - aj.mean())).sum() / (N - 1);
      const double cb = ((bi.array() - bi.mean()) * (bj.array() - bj.mean())).sum() / (N - 1);
      const double scale = std::sqrt(implied_covariance(model)(i, i) * implied_covariance(model)(j, j));
      EXPECT_LT(std::fabs(ca - cb), 5 * scale * std::sqrt(4.0 / N));
    }
  }
}

TEST(BuildSimModel, UsesEdgesOrDensity) {
  SimConfig c;
  c.p = 6;
  c.edges = 9;
  c.seed = 3;
  EXPECT_EQ(build_sim_model(c).graph.edge_count(), 9u);
  c.edges.reset();
  c.density = 0.0;
  EXPECT_EQ(build_sim_model(c).graph.edge_count(), 0u);
  c.density = 1.0;
  c.target_necof.reset();
  const auto raw = build_sim_model(c);
  EXPECT_EQ(raw.graph.edge_count(), 15u);
  EXPECT_GE(raw.B.cwiseAbs().maxCoeff(), 0.3);
}

TEST(StudyScenario, Levels) {
  StudySettings s;
  s.train = 250;
  s.test = 100;
  const auto base = study_scenario(StudyKind::baseline, 0.0, s, 0);
  EXPECT_EQ(base.sim.p, 5);
  EXPECT_EQ(base.model.graph.directed, reference_network().directed);
  EXPECT_NEAR(necof(base.model).market, 0.47, 1e-4);
  EXPECT_EQ(study_scenario(StudyKind::window, 150, s, 0).sim.N, 250);
  const auto size = study_scenario(StudyKind::size, 20, s, 1);
  EXPECT_EQ(size.model.p(), 20);
  const auto cont = study_scenario(StudyKind::contagion, 0.73, s, 2);
  EXPECT_EQ(cont.model.p(), 10);
  EXPECT_NEAR(necof(cont.model).market, 0.73, 1e-4);
  EXPECT_EQ(study_scenario(StudyKind::volatility, 2.0, s, 0).model.sigma2(0), 4.0);
  // Fresh coefficients per replication.
  EXPECT_NE(study_scenario(StudyKind::baseline, 0.0, s, 0).model.B, study_scenario(StudyKind::baseline, 0.0, s, 1).model.B);
}

TEST(StudyNames, RoundTrip) {
  for (auto k : {StudyKind::baseline, StudyKind::window, StudyKind::size, StudyKind::contagion, StudyKind::volatility}) {
    EXPECT_EQ(parse_study(study_name(k)), k);
    EXPECT_FALSE(default_study_levels(k).empty());
  }
  EXPECT_THROW(parse_study("nonsense"), DomainError);
  EXPECT_EQ(default_study_methods(StudyKind::baseline).size(), 5u);
}

TEST(RunStudy, SmallVolatilitySweep) {
  StudySettings s;
  s.levels = std::vector<double>{0.05, 1.0};
  s.reps = 2;
  s.engine.boot_reps = 100;
  const auto res = run_study(StudyKind::volatility, s);
  EXPECT_EQ(res.table.size(), 2u);
  EXPECT_EQ(res.trace.size(), 2u * 2u * 5u);
  ASSERT_NE(res.find(1.0, 0.05, Method::neco), nullptr);
  EXPECT_EQ(res.find(1.0, 0.05, Method::neco)->cells, 10);
  s.jobs = 2;
  const auto again = run_study(StudyKind::volatility, s);
  for (std::size_t k = 0; k < res.trace.size(); ++k) EXPECT_EQ(res.trace[k].alpha_hat, again.trace[k].alpha_hat);
}

TEST(Timing, RowsPerSizeAndGrowth) {
  const auto rows = timing_study({5, 20, 50}, 2);
  ASSERT_EQ(rows.size(), 3u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.reps, 2);
    EXPECT_GT(r.mean_ms, 0.0);
    EXPECT_LT(r.mean_ms, 60000.0);
  }
  EXPECT_LE(rows[0].mean_ms, rows[2].mean_ms);
}

TEST(GraphScore, PerfectAndEmpty) {
  const auto truth = reference_network();
  const auto s = score_graph(cpdag_of_dag(truth), truth);
  EXPECT_DOUBLE_EQ(s.f1, 1.0);
  EXPECT_DOUBLE_EQ(s.orientation_accuracy, 1.0);
  EXPECT_EQ(s.compelled_true, 6);
  CausalGraph empty;
  empty.p = 5;
  const auto e = score_graph(empty, truth);
  EXPECT_EQ(e.recall, 0.0);
  EXPECT_EQ(e.f1, 0.0);
}
