#ifndef NECO_COPULA_HPP
#define NECO_COPULA_HPP

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "neco/errors.hpp"
#include "neco/normal.hpp"
#include "neco/panel_io.hpp"

namespace neco {

// Adjusted empirical CDF F(x) = (0.5 + #{x_i <= x}) / (N + 1) and its
// piecewise-linear pseudo-inverse. Evaluation never returns 0 or 1.
class EmpiricalMarginal {
 public:
  EmpiricalMarginal() = default;

  explicit EmpiricalMarginal(std::span<const double> sample) : sorted_(sample.begin(), sample.end()) {
    if (sorted_.size() < 2) throw InvalidSample("marginal needs at least 2 observations");
    for (double v : sorted_) {
      if (!std::isfinite(v)) throw InvalidSample("marginal sample contains a non-finite value");
    }
    std::sort(sorted_.begin(), sorted_.end());
  }

  int n() const { return static_cast<int>(sorted_.size()); }
  const std::vector<double>& sorted_sample() const { return sorted_; }

  double operator()(double x) const {
    const auto count = std::upper_bound(sorted_.begin(), sorted_.end(), x) - sorted_.begin();
    return (0.5 + static_cast<double>(count)) / (n() + 1.0);
  }

  // Order statistic k (1-based) sits at probability (k + 0.5) / (N + 1), which
  // is F evaluated there. Between those positions the inverse is linear; outside
  // it clamps to the sample extremes.
  double quantile(double u) const {
    if (!(u > 0.0 && u < 1.0)) throw DomainError("marginal_quantile: u must lie in (0,1), got " + std::to_string(u));
    const int N = n();
    const double s = u * (N + 1.0) - 0.5;
    if (s <= 1.0) return sorted_.front();
    if (s >= N) return sorted_.back();
    const double nearest = std::round(s);
    if (std::fabs(s - nearest) < 1e-9) return sorted_[static_cast<std::size_t>(nearest) - 1];
    const auto k = static_cast<std::size_t>(std::floor(s));
    const double w = s - static_cast<double>(k);
    return (1.0 - w) * sorted_[k - 1] + w * sorted_[k];
  }

  // Bound on |Phi^{-1}(F(x))| implied by the 0.5/(N+1) adjustment.
  double latent_bound() const { return standard_normal_quantile(1.0 - 0.5 / (n() + 1.0)); }

 private:
  std::vector<double> sorted_;
};

inline EmpiricalMarginal fit_marginal(std::span<const double> series) { return EmpiricalMarginal(series); }

inline EmpiricalMarginal fit_marginal(const Eigen::Ref<const Vector>& series) {
  return EmpiricalMarginal(std::span<const double>(series.data(), static_cast<std::size_t>(series.size())));
}

inline double marginal_quantile(const EmpiricalMarginal& m, double u) { return m.quantile(u); }

// Latent Gaussian scores Z = Phi^{-1}(F(x)); same shape and labels as the source.
struct LatentPanel {
  std::vector<std::string> instruments;
  std::vector<std::string> times;
  Matrix values;

  int rows() const { return static_cast<int>(values.rows()); }
  int cols() const { return static_cast<int>(values.cols()); }
};

struct LatentTransform {
  LatentPanel latent;
  std::vector<EmpiricalMarginal> marginals;
};

// Maps observations through already-fitted marginals (used for out-of-sample days).
inline Matrix apply_marginals(const std::vector<EmpiricalMarginal>& marginals, const Matrix& values) {
  Matrix z(values.rows(), values.cols());
  for (Eigen::Index j = 0; j < values.cols(); ++j) {
    const auto& m = marginals[static_cast<std::size_t>(j)];
    for (Eigen::Index t = 0; t < values.rows(); ++t) z(t, j) = standard_normal_quantile(m(values(t, j)));
  }
  return z;
}

inline LatentTransform to_latent(const ReturnPanel& panel) {
  LatentTransform out;
  out.marginals.reserve(panel.cols());
  for (int j = 0; j < panel.cols(); ++j) out.marginals.push_back(fit_marginal(Vector(panel.values.col(j))));
  out.latent.instruments = panel.instruments;
  out.latent.times = panel.times;
  out.latent.values = apply_marginals(out.marginals, panel.values);
  return out;
}

// Inverse map X = F^{-1}(Phi(Z)), column by column.
inline Matrix from_latent(const std::vector<EmpiricalMarginal>& marginals, const Matrix& z) {
  Matrix x(z.rows(), z.cols());
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    for (Eigen::Index t = 0; t < z.rows(); ++t) {
      x(t, j) = marginals[static_cast<std::size_t>(j)].quantile(standard_normal_cdf(z(t, j)));
    }
  }
  return x;
}

}  // namespace neco

#endif  // NECO_COPULA_HPP
