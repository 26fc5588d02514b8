#ifndef NECO_GARCH_HPP
#define NECO_GARCH_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "neco/errors.hpp"
#include "neco/panel_io.hpp"

namespace neco {

struct GarchParams {
  double mu = 0.0;
  double omega = 0.0;
  double a1 = 0.0;
  double b1 = 0.0;

  bool valid() const { return omega > 0.0 && a1 >= 0.0 && b1 >= 0.0 && a1 + b1 < 1.0; }
};

// Constant-mean Gaussian GARCH(1,1) fit.
struct GarchFit {
  double mu = 0.0;
  double omega = 0.0;
  double a1 = 0.0;
  double b1 = 0.0;
  std::vector<double> sigma_t;  // conditional volatility for every observation
  double sigma_next = 0.0;      // one-step-ahead volatility after the last observation
  double loglik = 0.0;
  int iterations = 0;

  GarchParams params() const { return {mu, omega, a1, b1}; }
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Nelder-Mead simplex minimisation. Converged once the simplex diameter
// (max distance from the best vertex) falls below `tol`.
inline NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd start,
                                    double step, double tol = 1e-8, int max_iter = 20000) {
  const auto n = start.size();
  std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(n + 1), start);
  std::vector<double> vals(static_cast<std::size_t>(n + 1));
  for (Eigen::Index i = 0; i < n; ++i) pts[static_cast<std::size_t>(i + 1)](i) += step;
  for (std::size_t i = 0; i < pts.size(); ++i) vals[i] = f(pts[i]);

  NelderMeadResult res;
  std::vector<std::size_t> order(pts.size());
  for (int it = 0; it < max_iter; ++it) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    const auto best = order.front(), worst = order.back(), second = order[order.size() - 2];

    double diameter = 0.0;
    for (const auto& pnt : pts) diameter = std::max(diameter, (pnt - pts[best]).norm());
    res.iterations = it;
    if (diameter < tol) {
      res.converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t i : order)
      if (i != worst) centroid += pts[i];
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd xr = centroid + (centroid - pts[worst]);
    const double fr = f(xr);
    if (fr < vals[best]) {
      const Eigen::VectorXd xe = centroid + 2.0 * (centroid - pts[worst]);
      const double fe = f(xe);
      if (fe < fr) {
        pts[worst] = xe;
        vals[worst] = fe;
      } else {
        pts[worst] = xr;
        vals[worst] = fr;
      }
      continue;
    }
    if (fr < vals[second]) {
      pts[worst] = xr;
      vals[worst] = fr;
      continue;
    }
    const bool outside = fr < vals[worst];
    const Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid))
                                       : Eigen::VectorXd(centroid + 0.5 * (pts[worst] - centroid));
    const double fc = f(xc);
    if (fc < (outside ? fr : vals[worst])) {
      pts[worst] = xc;
      vals[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i == best) continue;
      pts[i] = pts[best] + 0.5 * (pts[i] - pts[best]);
      vals[i] = f(pts[i]);
    }
  }
  const auto best = static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
  res.x = pts[best];
  res.value = vals[best];
  return res;
}

namespace detail {

// Variance recursion started at the sample variance; returns -loglik.
inline double garch_negloglik(std::span<const double> x, const GarchParams& g, double init_var,
                              std::vector<double>* sigma = nullptr) {
  double h = init_var;
  double nll = 0.0;
  if (sigma) sigma->resize(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) {
    if (t > 0) {
      const double e = x[t - 1] - g.mu;
      h = g.omega + g.a1 * e * e + g.b1 * h;
    }
    if (!(h > 0.0) || !std::isfinite(h)) return std::numeric_limits<double>::infinity();
    const double e = x[t] - g.mu;
    nll += 0.5 * (std::log(2.0 * std::numbers::pi) + std::log(h) + e * e / h);
    if (sigma) (*sigma)[t] = std::sqrt(h);
  }
  return nll;
}

inline double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline constexpr double kMaxPersistence = 0.9999;
inline constexpr double kThetaBound = 12.0;

struct GarchScaling {
  double mean;
  double sd;
  double var;
};

inline GarchParams from_theta(const Eigen::VectorXd& th, const GarchScaling& s) {
  const double persistence = kMaxPersistence * logistic(th(2));
  const double share = logistic(th(3));
  return {s.mean + th(0) * s.sd, s.var * std::exp(th(1)), persistence * share, persistence * (1.0 - share)};
}

inline Eigen::VectorXd to_theta(const GarchParams& g, const GarchScaling& s) {
  Eigen::VectorXd th(4);
  const double persistence = std::clamp((g.a1 + g.b1) / kMaxPersistence, 1e-6, 1.0 - 1e-6);
  const double share = std::clamp(g.a1 / std::max(g.a1 + g.b1, 1e-12), 1e-6, 1.0 - 1e-6);
  th << (g.mu - s.mean) / s.sd, std::log(g.omega / s.var), logit(persistence), logit(share);
  return th;
}

}  // namespace detail

// Volatility path and loglik for given parameters.
inline GarchFit garch_filter(std::span<const double> x, const GarchParams& g) {
  GarchFit fit;
  fit.mu = g.mu;
  fit.omega = g.omega;
  fit.a1 = g.a1;
  fit.b1 = g.b1;
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= n;
  fit.loglik = -detail::garch_negloglik(x, g, var, &fit.sigma_t);
  const double e = x.back() - g.mu;
  const double h_last = fit.sigma_t.back() * fit.sigma_t.back();
  fit.sigma_next = std::sqrt(g.omega + g.a1 * e * e + g.b1 * h_last);
  return fit;
}

// Advances the one-step volatility forecast by one realised return.
inline double garch_step(const GarchFit& fit, double sigma_prev_forecast, double realised) {
  const double e = realised - fit.mu;
  return std::sqrt(fit.omega + fit.a1 * e * e + fit.b1 * sigma_prev_forecast * sigma_prev_forecast);
}

// Gaussian quasi-MLE by multi-start Nelder-Mead over an unconstrained
// reparametrisation (log omega, logistic persistence and ARCH share).
inline GarchFit fit_garch11(std::span<const double> x, std::optional<GarchParams> init = std::nullopt) {
  if (x.size() < 50) throw InsufficientData("GARCH fit needs at least 50 observations");
  if (init && !init->valid()) {
    throw InvalidInit("GARCH init violates omega > 0, a1 >= 0, b1 >= 0, a1 + b1 < 1");
  }
  const double n = static_cast<double>(x.size());
  detail::GarchScaling s{0.0, 0.0, 0.0};
  for (double v : x) s.mean += v;
  s.mean /= n;
  for (double v : x) s.var += (v - s.mean) * (v - s.mean);
  s.var /= n;
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  if (*lo == *hi || !(s.var > 0.0)) throw DegenerateSeries("GARCH fit on a constant series");
  s.sd = std::sqrt(s.var);

  auto objective = [&](const Eigen::VectorXd& th) {
    if (th.cwiseAbs().maxCoeff() > detail::kThetaBound) return std::numeric_limits<double>::infinity();
    return detail::garch_negloglik(x, detail::from_theta(th, s), s.var);
  };

  std::vector<GarchParams> starts;
  if (init) starts.push_back(*init);
  for (auto [a, b] : std::array<std::pair<double, double>, 4>{{{0.05, 0.90}, {0.10, 0.80}, {0.03, 0.96}, {0.20, 0.50}}}) {
    starts.push_back({s.mean, s.var * (1.0 - a - b), a, b});
  }

  std::optional<NelderMeadResult> best;
  int total_iter = 0;
  for (const auto& st : starts) {
    auto r = nelder_mead(objective, detail::to_theta(st, s), 0.5);
    // A restart from the optimum re-expands the simplex and guards against
    // premature collapse.
    if (r.converged) {
      auto again = nelder_mead(objective, r.x, 0.1);
      again.iterations += r.iterations;
      if (again.converged && again.value <= r.value) r = again;
    }
    total_iter += r.iterations;
    if (!r.converged || !std::isfinite(r.value)) continue;
    if (!best || r.value < best->value) best = r;
  }
  if (!best) throw FitError("GARCH(1,1) Nelder-Mead did not converge from any start");
  GarchFit fit = garch_filter(x, detail::from_theta(best->x, s));
  fit.iterations = total_iter;
  return fit;
}

inline GarchFit fit_garch11(const Eigen::Ref<const Vector>& x, std::optional<GarchParams> init = std::nullopt) {
  return fit_garch11(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())), init);
}

// Asymptotic standard errors of (mu, omega, a1, b1) from a central-difference
// Hessian of the negative log-likelihood.
inline Eigen::Vector4d garch_standard_errors(std::span<const double> x, const GarchFit& fit) {
  const double n = static_cast<double>(x.size());
  double mean = 0.0, var = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= n;
  Eigen::Vector4d theta(fit.mu, fit.omega, fit.a1, fit.b1);
  auto f = [&](const Eigen::Vector4d& t) {
    return detail::garch_negloglik(x, GarchParams{t(0), t(1), t(2), t(3)}, var);
  };
  Eigen::Vector4d h;
  for (int i = 0; i < 4; ++i) h(i) = 1e-4 * std::max(std::fabs(theta(i)), i == 1 ? 1e-8 : 1e-4);
  Eigen::Matrix4d H;
  for (int i = 0; i < 4; ++i) {
    for (int j = i; j < 4; ++j) {
      Eigen::Vector4d pp = theta, pm = theta, mp = theta, mm = theta;
      pp(i) += h(i);
      pp(j) += h(j);
      pm(i) += h(i);
      pm(j) -= h(j);
      mp(i) -= h(i);
      mp(j) += h(j);
      mm(i) -= h(i);
      mm(j) -= h(j);
      H(i, j) = H(j, i) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h(i) * h(j));
    }
  }
  const Eigen::Matrix4d cov = H.inverse();
  return cov.diagonal().cwiseAbs().cwiseSqrt();
}

}  // namespace neco

#endif  // NECO_GARCH_HPP
