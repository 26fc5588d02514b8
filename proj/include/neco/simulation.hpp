#ifndef NECO_SIMULATION_HPP
#define NECO_SIMULATION_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "neco/causal_discovery.hpp"
#include "neco/errors.hpp"
#include "neco/panel_io.hpp"
#include "neco/seeding.hpp"
#include "neco/sem_model.hpp"

namespace neco {

enum class NoiseKind { gaussian, exponential };

inline std::string noise_name(NoiseKind k) { return k == NoiseKind::gaussian ? "gaussian" : "exponential"; }

inline NoiseKind parse_noise(const std::string& s) {
  if (s == "gaussian") return NoiseKind::gaussian;
  if (s == "exponential") return NoiseKind::exponential;
  throw DomainError("unknown noise kind '" + s + "'");
}

struct SimConfig {
  int p = 5;
  double density = 0.7;
  std::optional<int> edges;  // exact edge count; overrides density when set
  std::optional<double> target_necof;
  int L = 0;
  double ar_coef = 0.0;  // own-lag coefficients are drawn uniformly in [-ar_coef, ar_coef]
  NoiseKind noise = NoiseKind::gaussian;
  double sigma = 1.0;
  std::optional<int> shock_period;
  double shock_scale = 5.0;
  int N = 350;
  int burn_in = 100;
  std::uint64_t seed = 1;

  void validate() const {
    if (p < 1) throw DomainError("p must be positive");
    if (!(density >= 0.0 && density <= 1.0)) throw DomainError("density must lie in [0,1]");
    if (edges && (*edges < 0 || *edges > p * (p - 1) / 2)) throw DomainError("edge count must lie in [0, p(p-1)/2]");
    if (target_necof && !(*target_necof >= 0.0 && *target_necof < 1.0)) throw DomainError("target NECOF must lie in [0,1)");
    if (!(sigma > 0.0)) throw DomainError("sigma must be positive");
    if (shock_period && *shock_period < 1) throw DomainError("shock period must be at least 1");
    if (L < 0 || N < 1 || burn_in < 0) throw DomainError("invalid simulation length or lag order");
  }
};

inline CausalGraph directed_graph(int p, const std::vector<NodePair>& edges) {
  CausalGraph g;
  g.p = p;
  for (int i = 0; i < p; ++i) g.labels.push_back("X" + std::to_string(i + 1));
  for (const auto& e : edges) g.directed.insert(e);
  return g;
}

// Five-instrument contagion network with seven links (0-based indices):
// X1->X4, X2->X3, X2->X4, X2->X5, X3->X4, X3->X5, X4->X5.
inline CausalGraph reference_network() {
  return directed_graph(5, {{0, 3}, {1, 2}, {1, 3}, {1, 4}, {2, 3}, {2, 4}, {3, 4}});
}

inline double graph_density(const CausalGraph& g) {
  const double pairs = g.p * (g.p - 1) / 2.0;
  return pairs > 0 ? static_cast<double>(g.edge_count()) / pairs : 0.0;
}

// Uniform random topological order; each forward pair is an edge with
// probability `density`.
inline CausalGraph random_dag(int p, double density, std::mt19937_64& rng) {
  std::vector<int> order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::bernoulli_distribution coin(density);
  std::vector<NodePair> edges;
  for (int a = 0; a < p; ++a)
    for (int b = a + 1; b < p; ++b)
      if (coin(rng)) edges.push_back({order[static_cast<std::size_t>(a)], order[static_cast<std::size_t>(b)]});
  return directed_graph(p, edges);
}

inline CausalGraph random_dag(int p, double density, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return random_dag(p, density, rng);
}

// Uniform random topological order with exactly `edges` forward pairs.
inline CausalGraph random_dag_with_edges(int p, int edges, std::mt19937_64& rng) {
  std::vector<int> order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<NodePair> pairs;
  for (int a = 0; a < p; ++a)
    for (int b = a + 1; b < p; ++b) pairs.push_back({order[static_cast<std::size_t>(a)], order[static_cast<std::size_t>(b)]});
  if (edges < 0 || edges > static_cast<int>(pairs.size())) throw DomainError("edge count out of range");
  std::shuffle(pairs.begin(), pairs.end(), rng);
  pairs.resize(static_cast<std::size_t>(edges));
  return directed_graph(p, pairs);
}

// Edge coefficients uniform in +-[0.3, 0.9] with random sign.
inline Matrix draw_contagion_coefficients(const CausalGraph& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> mag(0.3, 0.9);
  std::bernoulli_distribution sign(0.5);
  Matrix B = Matrix::Zero(g.p, g.p);
  for (const auto& [from, to] : g.directed) B(to, from) = (sign(rng) ? 1.0 : -1.0) * mag(rng);
  return B;
}

struct Calibration {
  double scale = 0.0;
  double achieved = 0.0;
};

// Common factor c with market NECOF(c * base) = target, found by bisection.
inline Calibration calibrate_scale(const Matrix& base, const Vector& sigma2, double target, double tol = 1e-6) {
  if (!(target >= 0.0 && target < 1.0)) throw DomainError("target NECOF must lie in [0,1)");
  if (target == 0.0) return {0.0, 0.0};
  auto market = [&](double c) { return necof(Matrix(c * base), sigma2).market; };
  double hi = 1.0;
  double at_hi = market(hi);
  while (at_hi < target) {
    hi *= 2.0;
    if (hi > 1e6) throw CalibrationError("market NECOF target unreachable", at_hi);
    at_hi = market(hi);
  }
  double lo = 0.0;
  double mid = hi, at_mid = at_hi;
  for (int it = 0; it < 200; ++it) {
    mid = 0.5 * (lo + hi);
    at_mid = market(mid);
    if (std::fabs(at_mid - target) < tol) break;
    (at_mid < target ? lo : hi) = mid;
  }
  return {mid, at_mid};
}

// SEM on `graph` with coefficients scaled to reach the target market NECOF,
// zero intercepts and common noise variance sigma^2.
inline SemModel calibrate_contagion(const CausalGraph& graph, const Matrix& base_coeffs, double target_necof,
                                    double sigma, int L = 0, const Matrix& A = Matrix()) {
  SemModel m;
  m.labels = graph.labels;
  m.L = L;
  m.alpha0 = Vector::Zero(graph.p);
  m.A = A.size() ? A : Matrix(Matrix::Zero(graph.p, L));
  m.sigma2 = Vector::Constant(graph.p, sigma * sigma);
  const auto cal = calibrate_scale(base_coeffs, m.sigma2, target_necof);
  m.B = cal.scale * base_coeffs;
  m.graph = graph;
  return m;
}

struct SimulatedPath {
  ReturnPanel panel;
  std::vector<int> shocked_rows;
};

// Iterates X_t = alpha0 + A . X_{t-1:t-L} + B X_t + eps_t in topological order.
// Gaussian noise is sigma_i * N(0,1); exponential noise is sigma_i * (E - 1)
// with E ~ Exp(1). On every shock_period-th retained row every eps_i is
// lowered by shock_scale * sigma_i. The first burn_in steps are discarded.
inline SimulatedPath simulate_sem_path(const SemModel& model, const SimConfig& cfg, bool apply_shocks = true) {
  cfg.validate();
  const int p = model.p();
  const auto order = topological_order(model.B);
  const Vector sd = model.sigma2.cwiseSqrt();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal;
  std::exponential_distribution<double> expo(1.0);

  const int total = cfg.burn_in + cfg.N;
  const int lags = model.L;
  Matrix x = Matrix::Zero(total + lags, p);  // leading `lags` rows are the zero initial history
  SimulatedPath out;
  Vector eps(p);
  for (int step = 0; step < total; ++step) {
    for (int i = 0; i < p; ++i) {
      eps(i) = cfg.noise == NoiseKind::gaussian ? sd(i) * normal(rng) : sd(i) * (expo(rng) - 1.0);
    }
    const int kept = step - cfg.burn_in + 1;  // 1-based retained row
    if (apply_shocks && cfg.shock_period && kept >= 1 && kept % *cfg.shock_period == 0) {
      eps -= cfg.shock_scale * sd;
      out.shocked_rows.push_back(kept - 1);
    }
    const int r = step + lags;
    for (int i : order) {
      double v = model.alpha0(i) + eps(i);
      for (int l = 1; l <= lags; ++l) v += model.A(i, l - 1) * x(r - l, i);
      for (int j = 0; j < p; ++j)
        if (model.B(i, j) != 0.0) v += model.B(i, j) * x(r, j);
      x(r, i) = v;
    }
  }
  out.panel.instruments = model.labels;
  if (static_cast<int>(out.panel.instruments.size()) != p) {
    out.panel.instruments.clear();
    for (int i = 0; i < p; ++i) out.panel.instruments.push_back("X" + std::to_string(i + 1));
  }
  out.panel.values = x.bottomRows(cfg.N);
  for (int t = 0; t < cfg.N; ++t) out.panel.times.push_back(synthetic_date(t));
  return out;
}

inline ReturnPanel simulate_sem(const SemModel& model, const SimConfig& cfg) { return simulate_sem_path(model, cfg).panel; }

// Draws a graph (random unless one is supplied), coefficients and own-lag terms
// per the config, and calibrates to the target NECOF when one is set.
inline SemModel build_sim_model(const SimConfig& cfg, std::optional<CausalGraph> graph = std::nullopt) {
  cfg.validate();
  std::mt19937_64 rng(derive_seed(cfg.seed, 0x6d6f64656cULL));
  const CausalGraph g = graph ? *graph
                              : cfg.edges ? random_dag_with_edges(cfg.p, *cfg.edges, rng)
                                          : random_dag(cfg.p, cfg.density, rng);
  const Matrix base = draw_contagion_coefficients(g, rng);
  Matrix A = Matrix::Zero(g.p, cfg.L);
  if (cfg.ar_coef > 0.0) {
    std::uniform_real_distribution<double> u(-cfg.ar_coef, cfg.ar_coef);
    for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = u(rng);
  }
  if (cfg.target_necof) return calibrate_contagion(g, base, *cfg.target_necof, cfg.sigma, cfg.L, A);
  SemModel m = calibrate_contagion(g, base, 0.0, cfg.sigma, cfg.L, A);
  m.B = base;
  return m;
}

}  // namespace neco

#endif  // NECO_SIMULATION_HPP
