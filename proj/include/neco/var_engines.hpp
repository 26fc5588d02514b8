#ifndef NECO_VAR_ENGINES_HPP
#define NECO_VAR_ENGINES_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "neco/copula.hpp"
#include "neco/errors.hpp"
#include "neco/garch.hpp"
#include "neco/normal.hpp"
#include "neco/panel_io.hpp"
#include "neco/seeding.hpp"
#include "neco/sem_model.hpp"

namespace neco {

// One-step-ahead VaR per instrument, expressed as a (typically negative)
// return quantile: a violation is x <= VaR.
struct VaRForecast {
  double alpha = 0.05;
  Vector values;
  std::string method;
  int time_index = -1;
  // Per-instrument min/max across ensemble members; equal to `values` for
  // single-model engines.
  Vector range_low;
  Vector range_high;
};

inline void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0,1)");
}

// Type-7 (linear interpolation) sample quantile of sorted data.
inline double sorted_quantile(std::span<const double> sorted, double prob) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double empirical_quantile(std::vector<double> v, double prob) {
  std::sort(v.begin(), v.end());
  return sorted_quantile(v, prob);
}

// Type-7 quantile of the pooled bootstrap sample formed by `reps` resamples of
// size n from `values` (with replacement). Only the multiplicities of each
// original observation matter, so the pool is never materialised.
inline double bootstrap_quantile(std::span<const double> values, double prob, int reps, std::uint64_t seed) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

  std::vector<std::uint64_t> counts(n, 0);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  const std::uint64_t total = static_cast<std::uint64_t>(reps) * n;
  for (std::uint64_t k = 0; k < total; ++k) ++counts[pick(rng)];

  const double h = (static_cast<double>(total) - 1.0) * prob;
  const auto lo = static_cast<std::uint64_t>(std::floor(h));
  const double frac = h - static_cast<double>(lo);
  auto value_at = [&](std::uint64_t rank) {
    std::uint64_t cum = 0;
    for (std::size_t i : order) {
      cum += counts[i];
      if (rank < cum) return values[i];
    }
    return values[order.back()];
  };
  const double a = value_at(lo);
  const double b = lo + 1 < total ? value_at(lo + 1) : a;
  return a + frac * (b - a);
}

// Gaussian NECO VaR: mean_i - z_alpha sqrt(cov_ii) under the conditional law
// of X_t given its last L rows.
inline VaRForecast neco_var_gaussian(const SemModel& model, const Eigen::Ref<const Matrix>& history, double alpha,
                                     NoiseMode mode = NoiseMode::estimated) {
  check_alpha(alpha);
  const auto cd = conditional_distribution(model, history, mode);
  VaRForecast f;
  f.alpha = alpha;
  f.method = "neco-gauss";
  f.values = cd.mean - z_alpha(alpha) * cd.cov.diagonal().cwiseSqrt();
  f.range_low = f.range_high = f.values;
  return f;
}

// Copula NECO VaR: the latent conditional alpha-quantile is mapped back through
// each instrument's empirical marginal. Across ensemble members the smallest
// (most conservative) value is reported, with the full range attached.
inline VaRForecast neco_var_general(const ModelEnsemble& ensemble, const std::vector<EmpiricalMarginal>& marginals,
                                    const Eigen::Ref<const Matrix>& latent_history, double alpha,
                                    NoiseMode mode = NoiseMode::estimated) {
  check_alpha(alpha);
  if (ensemble.models.empty()) throw DomainError("empty model ensemble");
  const int p = ensemble.models.front().p();
  if (static_cast<int>(marginals.size()) != p) throw DomainError("one marginal per instrument required");
  const double z = z_alpha(alpha);
  VaRForecast f;
  f.alpha = alpha;
  f.method = "neco";
  f.range_low = Vector::Constant(p, std::numeric_limits<double>::infinity());
  f.range_high = Vector::Constant(p, -std::numeric_limits<double>::infinity());
  constexpr double tiny = std::numeric_limits<double>::min();
  for (const auto& m : ensemble.models) {
    const auto cd = conditional_distribution(m, latent_history, mode);
    for (int i = 0; i < p; ++i) {
      const double qz = cd.mean(i) - z * std::sqrt(cd.cov(i, i));
      const double u = std::clamp(standard_normal_cdf(qz), tiny, 1.0 - 1e-16);
      const double v = marginals[static_cast<std::size_t>(i)].quantile(u);
      f.range_low(i) = std::min(f.range_low(i), v);
      f.range_high(i) = std::max(f.range_high(i), v);
    }
  }
  f.values = f.range_low;
  return f;
}

// Variance-covariance VaR: sample mean minus z_alpha times sample stdev.
inline VaRForecast varcovar_var(const Matrix& window, double alpha) {
  check_alpha(alpha);
  if (window.rows() < 2) throw InsufficientData("varcovar needs at least 2 observations");
  const Vector mean = window.colwise().mean();
  const Matrix centered = window.rowwise() - mean.transpose();
  const Vector sd = (centered.colwise().squaredNorm() / static_cast<double>(window.rows() - 1)).cwiseSqrt();
  for (Eigen::Index j = 0; j < sd.size(); ++j) {
    if (!(sd(j) > 0.0)) throw DegenerateSeries("varcovar: column " + std::to_string(j) + " has zero variance");
  }
  VaRForecast f;
  f.alpha = alpha;
  f.method = "varcovar";
  f.values = mean - z_alpha(alpha) * sd;
  f.range_low = f.range_high = f.values;
  return f;
}

// Historical simulation: alpha-quantile of the pooled bootstrap of past rows.
inline VaRForecast hist_var(const Matrix& window, double alpha, int boot_reps, std::uint64_t seed) {
  check_alpha(alpha);
  if (window.rows() < 20) throw InsufficientData("historical simulation needs at least 20 observations");
  VaRForecast f;
  f.alpha = alpha;
  f.method = "hist";
  f.values.resize(window.cols());
  for (Eigen::Index j = 0; j < window.cols(); ++j) {
    const Vector col = window.col(j);
    f.values(j) = bootstrap_quantile(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())), alpha,
                                     boot_reps, derive_seed(seed, static_cast<std::uint64_t>(j)));
  }
  f.range_low = f.range_high = f.values;
  return f;
}

// Quantile of mc_paths standard normal draws; GARCH Monte Carlo VaR is
// mu + sigma_next times this value, which equals the quantile of the
// simulated returns because type-7 quantiles are affine equivariant.
inline double garch_innovation_quantile(double alpha, int mc_paths, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<double> draws(static_cast<std::size_t>(mc_paths));
  for (auto& d : draws) d = normal(rng);
  return empirical_quantile(std::move(draws), alpha);
}

inline double garch_var(const GarchFit& fit, double alpha, int mc_paths, std::uint64_t seed) {
  check_alpha(alpha);
  if (fit.sigma_next == 0.0) return fit.mu;
  return fit.mu + fit.sigma_next * garch_innovation_quantile(alpha, mc_paths, seed);
}

// Bootstrap quantile of the standardised residuals (x_t - mu) / sigma_t.
inline double fhs_residual_quantile(std::span<const double> series, const GarchFit& fit, double alpha, int boot_reps,
                                    std::uint64_t seed) {
  if (fit.sigma_t.size() != series.size()) throw DomainError("GARCH fit does not match the series");
  std::vector<double> e(series.size());
  for (std::size_t t = 0; t < series.size(); ++t) e[t] = (series[t] - fit.mu) / fit.sigma_t[t];
  return bootstrap_quantile(e, alpha, boot_reps, seed);
}

// Filtered historical simulation: bootstrapped standardised residuals rescaled
// by the forecast volatility.
inline double fhs_var(std::span<const double> series, const GarchFit& fit, double alpha, int boot_reps,
                      std::uint64_t seed) {
  check_alpha(alpha);
  return fit.mu + fit.sigma_next * fhs_residual_quantile(series, fit, alpha, boot_reps, seed);
}

}  // namespace neco

#endif  // NECO_VAR_ENGINES_HPP
