#ifndef NECO_BACKTEST_HPP
#define NECO_BACKTEST_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "neco/causal_discovery.hpp"
#include "neco/copula.hpp"
#include "neco/errors.hpp"
#include "neco/garch.hpp"
#include "neco/normal.hpp"
#include "neco/panel_io.hpp"
#include "neco/parallel.hpp"
#include "neco/sem_model.hpp"
#include "neco/var_engines.hpp"

namespace neco {

struct HitSeries {
  std::vector<bool> hits;
  double alpha = 0.05;
  int n1 = 0;
  int n0 = 0;
  double alpha_hat = 0.0;

  int size() const { return static_cast<int>(hits.size()); }
};

inline HitSeries hit_series(std::span<const double> returns, std::span<const double> var, double alpha) {
  if (returns.size() != var.size()) throw DomainError("returns and VaR series differ in length");
  HitSeries h;
  h.alpha = alpha;
  h.hits.resize(returns.size());
  for (std::size_t t = 0; t < returns.size(); ++t) {
    h.hits[t] = returns[t] <= var[t];
    h.n1 += h.hits[t] ? 1 : 0;
  }
  h.n0 = h.size() - h.n1;
  h.alpha_hat = h.hits.empty() ? 0.0 : static_cast<double>(h.n1) / h.size();
  return h;
}

inline HitSeries hit_series(const std::vector<bool>& hits, double alpha) {
  HitSeries h;
  h.alpha = alpha;
  h.hits = hits;
  for (bool b : hits) h.n1 += b ? 1 : 0;
  h.n0 = h.size() - h.n1;
  h.alpha_hat = hits.empty() ? 0.0 : static_cast<double>(h.n1) / h.size();
  return h;
}

struct TestOutcome {
  double statistic = 0.0;
  double pvalue = 1.0;
  bool accept = true;
  bool degenerate = false;
  int dof = 0;
};

inline constexpr double kAcceptLevel = 0.05;

namespace detail {

// n * ln(p) with the 0 * ln 0 = 0 convention.
inline double xlogy(double n, double p) { return n == 0.0 ? 0.0 : n * std::log(p); }

inline TestOutcome chi_square_outcome(double stat, int dof) {
  TestOutcome out;
  out.statistic = std::max(0.0, stat);
  out.dof = dof;
  out.pvalue = chi_square_sf(out.statistic, dof);
  out.accept = out.pvalue > kAcceptLevel;
  return out;
}

inline double kupiec_statistic(const HitSeries& h) {
  const double a = h.alpha, ah = h.alpha_hat;
  const double null_ll = detail::xlogy(h.n0, 1.0 - a) + detail::xlogy(h.n1, a);
  const double alt_ll = detail::xlogy(h.n0, 1.0 - ah) + detail::xlogy(h.n1, ah);
  return -2.0 * (null_ll - alt_ll);
}

}  // namespace detail

// Kupiec unconditional-coverage likelihood ratio, chi-square(1).
inline TestOutcome kupiec_uc(const HitSeries& h) {
  if (h.size() < 1) throw InsufficientData("Kupiec test needs at least one observation");
  return detail::chi_square_outcome(detail::kupiec_statistic(h), 1);
}

struct TransitionCounts {
  int n00 = 0, n01 = 0, n10 = 0, n11 = 0;
};

inline TransitionCounts transition_counts(const HitSeries& h) {
  TransitionCounts c;
  for (int t = 1; t < h.size(); ++t) {
    const bool prev = h.hits[static_cast<std::size_t>(t - 1)], cur = h.hits[static_cast<std::size_t>(t)];
    (prev ? (cur ? c.n11 : c.n10) : (cur ? c.n01 : c.n00))++;
  }
  return c;
}

// Independence part of Christoffersen's test: i.i.d. against a first-order
// Markov chain of hits.
inline double christoffersen_ind_statistic(const HitSeries& h) {
  const auto c = transition_counts(h);
  const double n0x = c.n00 + c.n01, n1x = c.n10 + c.n11;
  const double total = n0x + n1x;
  if (total == 0.0) return 0.0;
  const double pi = (c.n01 + c.n11) / total;
  const double pi01 = n0x > 0 ? c.n01 / n0x : 0.0;
  const double pi11 = n1x > 0 ? c.n11 / n1x : 0.0;
  using detail::xlogy;
  const double null_ll = xlogy(c.n00 + c.n10, 1.0 - pi) + xlogy(c.n01 + c.n11, pi);
  const double alt_ll = xlogy(c.n00, 1.0 - pi01) + xlogy(c.n01, pi01) + xlogy(c.n10, 1.0 - pi11) + xlogy(c.n11, pi11);
  return std::max(0.0, -2.0 * (null_ll - alt_ll));
}

// Christoffersen conditional coverage: LR_UC + LR_IND, chi-square(2).
inline TestOutcome christoffersen_cc(const HitSeries& h) {
  if (h.size() < 2) throw InsufficientData("Christoffersen test needs at least two observations");
  return detail::chi_square_outcome(detail::kupiec_statistic(h) + christoffersen_ind_statistic(h), 2);
}

// Engle-Manganelli dynamic quantile test. Regresses hit_t - alpha on
// [1, hit_{t-1..t-n_lags}, VaR_t]; the statistic is the squared norm of the
// fitted values over alpha(1-alpha), chi-square with rank(X) degrees of freedom.
// Collinear columns (a constant VaR duplicates the intercept) reduce the rank
// rather than failing. A hit series with no variation is flagged degenerate
// and accepted.
inline TestOutcome dq_test(const HitSeries& h, std::span<const double> var, int n_lags = 4) {
  const int T = h.size();
  if (static_cast<int>(var.size()) != T) throw DomainError("hit and VaR series differ in length");
  if (T <= n_lags + 2) throw InsufficientData("DQ test needs T > n_lags + 2");
  TestOutcome out;
  if (h.n1 == 0 || h.n0 == 0) {
    out.degenerate = true;
    return out;
  }
  const int rows = T - n_lags;
  const int k = n_lags + 2;
  Matrix X(rows, k);
  Vector y(rows);
  for (int r = 0; r < rows; ++r) {
    const int t = n_lags + r;
    y(r) = (h.hits[static_cast<std::size_t>(t)] ? 1.0 : 0.0) - h.alpha;
    X(r, 0) = 1.0;
    for (int l = 1; l <= n_lags; ++l) X(r, l) = h.hits[static_cast<std::size_t>(t - l)] ? 1.0 : 0.0;
    X(r, k - 1) = var[static_cast<std::size_t>(t)];
  }
  // Scale the VaR column so the rank threshold is not unit dependent.
  const double scale = X.col(k - 1).cwiseAbs().maxCoeff();
  if (scale > 0.0) X.col(k - 1) /= scale;
  Eigen::ColPivHouseholderQR<Matrix> qr(X);
  qr.setThreshold(1e-9);
  // Squared norm of the projection of y onto the column space of X.
  const auto rank = qr.rank();
  const Vector qty = qr.householderQ().transpose() * y;
  const double fitted = qty.head(rank).squaredNorm();
  return detail::chi_square_outcome(fitted / (h.alpha * (1.0 - h.alpha)), static_cast<int>(rank));
}

struct DeviationLoss {
  double ad_mean = 0.0;
  double ad_max = 0.0;
  bool ad_empty = true;
  double ql = 0.0;
};

// Mean/max |x - VaR| over violation days and average quantile (tick) loss.
inline DeviationLoss deviation_and_ql(std::span<const double> returns, std::span<const double> var, double alpha) {
  if (returns.size() != var.size()) throw DomainError("returns and VaR series differ in length");
  DeviationLoss out;
  int violations = 0;
  double ql = 0.0;
  for (std::size_t t = 0; t < returns.size(); ++t) {
    const double d = returns[t] - var[t];
    const bool hit = returns[t] <= var[t];
    ql += (alpha - (hit ? 1.0 : 0.0)) * d;
    if (hit) {
      ++violations;
      out.ad_mean += std::fabs(d);
      out.ad_max = std::max(out.ad_max, std::fabs(d));
    }
  }
  out.ad_empty = violations == 0;
  if (violations > 0) out.ad_mean /= violations;
  out.ql = returns.empty() ? 0.0 : ql / static_cast<double>(returns.size());
  return out;
}

struct BacktestReport {
  double alpha = 0.05;
  int T = 0;
  int n1 = 0;
  double alpha_hat = 0.0;
  double ae = 0.0;
  TestOutcome lr_uc, lr_cc, dq;
  double ad_mean = 0.0, ad_max = 0.0;
  bool ad_empty = true;
  double ql = 0.0;
};

inline BacktestReport score(std::span<const double> returns, std::span<const double> var, double alpha,
                            int dq_lags = 4) {
  const auto h = hit_series(returns, var, alpha);
  BacktestReport r;
  r.alpha = alpha;
  r.T = h.size();
  r.n1 = h.n1;
  r.alpha_hat = h.alpha_hat;
  r.ae = h.alpha_hat / alpha;
  r.lr_uc = kupiec_uc(h);
  r.lr_cc = christoffersen_cc(h);
  r.dq = dq_test(h, var, dq_lags);
  const auto dl = deviation_and_ql(returns, var, alpha);
  r.ad_mean = dl.ad_mean;
  r.ad_max = dl.ad_max;
  r.ad_empty = dl.ad_empty;
  r.ql = dl.ql;
  return r;
}

// ---------------------------------------------------------------------------
// Rolling-window comparison of VaR methods.

enum class Method { neco, neco_gauss, varcovar, hist, garch, fhs };

inline const std::vector<Method>& all_baseline_methods() {
  static const std::vector<Method> m{Method::neco, Method::varcovar, Method::hist, Method::garch, Method::fhs};
  return m;
}

inline std::string method_name(Method m) {
  switch (m) {
    case Method::neco: return "neco";
    case Method::neco_gauss: return "neco-gauss";
    case Method::varcovar: return "varcovar";
    case Method::hist: return "hist";
    case Method::garch: return "garch";
    case Method::fhs: return "fhs";
  }
  return "?";
}

// Column headers used in the comparison table.
inline std::string method_title(Method m) {
  switch (m) {
    case Method::neco: return "Causal-NECO";
    case Method::neco_gauss: return "NECO-Gauss";
    case Method::varcovar: return "VarCovar";
    case Method::hist: return "HIST";
    case Method::garch: return "GARCH";
    case Method::fhs: return "FHS";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  for (Method m : {Method::neco, Method::neco_gauss, Method::varcovar, Method::hist, Method::garch, Method::fhs}) {
    if (method_name(m) == s) return m;
  }
  throw DomainError("unknown VaR method '" + s + "'");
}

struct EngineConfig {
  int lag_order = 1;
  CITestConfig ci;
  NoiseMode noise_mode = NoiseMode::estimated;
  int boot_reps = 1000;
  int mc_paths = 10000;
  int dq_lags = 4;
};

// VaR path over a test block, forecast one step ahead from parameters fitted
// on the training block and the realised history up to each day.
struct WindowForecast {
  Matrix var;  // T_test x p
  std::vector<std::string> notes;
};

namespace detail {

inline Matrix stack_rows(const Matrix& top, const Matrix& bottom) {
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

inline WindowForecast forecast_neco(const Matrix& train, const Matrix& test, const std::vector<std::string>& labels,
                                    double alpha, const EngineConfig& cfg) {
  std::vector<std::string> times(static_cast<std::size_t>(train.rows()));
  const ReturnPanel panel{labels, times, train};
  const auto tr = to_latent(panel);
  const auto graph = discover(tr.latent, cfg.ci);
  const auto ens = fit_sem(tr.latent, graph, cfg.lag_order);
  const Matrix z = stack_rows(tr.latent.values, apply_marginals(tr.marginals, test));
  WindowForecast out;
  out.var.resize(test.rows(), test.cols());
  const auto N = train.rows();
  for (Eigen::Index t = 0; t < test.rows(); ++t) {
    const auto f = neco_var_general(ens, tr.marginals, z.middleRows(N + t - cfg.lag_order, cfg.lag_order), alpha,
                                    cfg.noise_mode);
    out.var.row(t) = f.values.transpose();
  }
  if (ens.models.size() > 1) out.notes.push_back("ensemble of " + std::to_string(ens.models.size()) + " models");
  return out;
}

inline WindowForecast forecast_neco_gauss(const Matrix& train, const Matrix& test,
                                          const std::vector<std::string>& labels, double alpha,
                                          const EngineConfig& cfg) {
  const auto skel = pc_stable_skeleton(correlation_matrix(train), static_cast<int>(train.rows()), cfg.ci);
  const auto graph = orient_cpdag(skel, labels);
  const auto ens = fit_sem(train, labels, graph, cfg.lag_order);
  const Matrix x = stack_rows(train, test);
  WindowForecast out;
  out.var.resize(test.rows(), test.cols());
  const auto N = train.rows();
  for (Eigen::Index t = 0; t < test.rows(); ++t) {
    Vector worst = Vector::Constant(train.cols(), std::numeric_limits<double>::infinity());
    for (const auto& m : ens.models) {
      worst = worst.cwiseMin(neco_var_gaussian(m, x.middleRows(N + t - cfg.lag_order, cfg.lag_order), alpha).values);
    }
    out.var.row(t) = worst.transpose();
  }
  return out;
}

template <class QuantileFn>
WindowForecast forecast_garch_family(const Matrix& train, const Matrix& test, double alpha, QuantileFn&& quantile_of) {
  WindowForecast out;
  out.var.resize(test.rows(), test.cols());
  for (Eigen::Index j = 0; j < train.cols(); ++j) {
    const Vector col = train.col(j);
    try {
      const auto fit = fit_garch11(col);
      const double q = quantile_of(fit, col, j);
      double sigma = fit.sigma_next;
      for (Eigen::Index t = 0; t < test.rows(); ++t) {
        out.var(t, j) = fit.mu + sigma * q;
        sigma = garch_step(fit, sigma, test(t, j));
      }
    } catch (const FitError& e) {
      const auto vc = varcovar_var(train.col(j), alpha);
      out.var.col(j).setConstant(vc.values(0));
      out.notes.push_back("instrument " + std::to_string(j) + ": " + e.what() + "; fell back to varcovar");
    }
  }
  return out;
}

}  // namespace detail

inline WindowForecast forecast_window(Method method, const Matrix& train, const Matrix& test,
                                      const std::vector<std::string>& labels, double alpha, const EngineConfig& cfg,
                                      std::uint64_t seed) {
  check_alpha(alpha);
  switch (method) {
    case Method::neco: return detail::forecast_neco(train, test, labels, alpha, cfg);
    case Method::neco_gauss: return detail::forecast_neco_gauss(train, test, labels, alpha, cfg);
    case Method::varcovar: {
      WindowForecast out;
      const auto f = varcovar_var(train, alpha);
      out.var = f.values.transpose().replicate(test.rows(), 1);
      return out;
    }
    case Method::hist: {
      WindowForecast out;
      const auto f = hist_var(train, alpha, cfg.boot_reps, seed);
      out.var = f.values.transpose().replicate(test.rows(), 1);
      return out;
    }
    case Method::garch:
      return detail::forecast_garch_family(train, test, alpha, [&](const GarchFit&, const Vector&, Eigen::Index j) {
        return garch_innovation_quantile(alpha, cfg.mc_paths, derive_seed(seed, static_cast<std::uint64_t>(j)));
      });
    case Method::fhs:
      return detail::forecast_garch_family(train, test, alpha, [&](const GarchFit& fit, const Vector& col, Eigen::Index j) {
        return fhs_residual_quantile(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())), fit,
                                     alpha, cfg.boot_reps, derive_seed(seed, static_cast<std::uint64_t>(j)));
      });
  }
  throw DomainError("unhandled method");
}

struct CellReport {
  Method method;
  int window = 0;
  int instrument = 0;
  BacktestReport report;
};

struct DayRecord {
  int window = 0;
  int row = 0;  // panel row index
  int instrument = 0;
  Method method;
  double ret = 0.0;
  double var = 0.0;
  bool hit = false;
};

struct MethodFailure {
  Method method;
  int window = 0;
  std::string message;
};

// One column of the comparison table.
struct AggregateRow {
  Method method;
  int cells = 0;
  double mean_alpha_hat = 0.0;
  double sd_alpha_hat = 0.0;
  double lr_uc_accept = 0.0;
  double lr_cc_accept = 0.0;
  double dq_accept = 0.0;
  double ae_mean = 0.0;
  double ae_sd = 0.0;
  std::optional<double> ad_mean;  // empty when no method violation occurred
  std::optional<double> ad_max;
  double mean_ql = 0.0;
  double compare_ql = 1.0;
};

struct BacktestResult {
  double alpha = 0.05;
  std::vector<std::string> instruments;
  std::vector<std::string> times;
  std::vector<Method> methods;
  std::vector<CellReport> cells;
  std::vector<DayRecord> days;
  std::vector<MethodFailure> failures;
  std::vector<std::string> notes;
  std::vector<AggregateRow> aggregate;
};

inline double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// Aggregates cells into one row per method. AD statistics pool all violation
// days; CompareQL divides each method's mean QL by Causal-NECO's (or by the
// first method's when NECO is absent).
inline std::vector<AggregateRow> aggregate_cells(const std::vector<CellReport>& cells, const std::vector<DayRecord>& days,
                                                 const std::vector<Method>& methods) {
  std::vector<AggregateRow> rows;
  for (Method m : methods) {
    AggregateRow row;
    row.method = m;
    std::vector<double> ah, ae;
    double ql = 0.0;
    for (const auto& c : cells) {
      if (c.method != m) continue;
      ++row.cells;
      ah.push_back(c.report.alpha_hat);
      ae.push_back(c.report.ae);
      row.lr_uc_accept += c.report.lr_uc.accept;
      row.lr_cc_accept += c.report.lr_cc.accept;
      row.dq_accept += c.report.dq.accept;
      ql += c.report.ql;
    }
    if (row.cells > 0) {
      const double n = row.cells;
      for (double v : ah) row.mean_alpha_hat += v / n;
      for (double v : ae) row.ae_mean += v / n;
      row.sd_alpha_hat = sample_sd(ah);
      row.ae_sd = sample_sd(ae);
      row.lr_uc_accept /= n;
      row.lr_cc_accept /= n;
      row.dq_accept /= n;
      row.mean_ql = ql / n;
    }
    double ad_sum = 0.0, ad_max = 0.0;
    int violations = 0;
    for (const auto& d : days) {
      if (d.method != m || !d.hit) continue;
      ++violations;
      ad_sum += std::fabs(d.ret - d.var);
      ad_max = std::max(ad_max, std::fabs(d.ret - d.var));
    }
    if (violations > 0) {
      row.ad_mean = ad_sum / violations;
      row.ad_max = ad_max;
    }
    rows.push_back(row);
  }
  const auto ref = std::find_if(rows.begin(), rows.end(), [](const AggregateRow& r) { return r.method == Method::neco; });
  const double base = rows.empty() ? 1.0 : (ref != rows.end() ? ref->mean_ql : rows.front().mean_ql);
  for (auto& r : rows) r.compare_ql = base != 0.0 ? r.mean_ql / base : std::numeric_limits<double>::quiet_NaN();
  return rows;
}

// Fits every method on each training block, forecasts the following test
// block one day at a time, and scores each (method, instrument, window) cell.
// A method that throws on a window is recorded and skipped for that window.
inline BacktestResult rolling_backtest(const ReturnPanel& panel, const WindowPlan& plan, const std::vector<Method>& methods,
                                       double alpha, const EngineConfig& cfg, std::uint64_t seed,
                                       int jobs = 1) {
  check_alpha(alpha);
  for (const auto& [train, test] : plan.windows) {
    if (train.begin < 0 || test.end > panel.rows()) throw WindowError("window plan exceeds the panel");
  }
  const int W = static_cast<int>(plan.windows.size());
  const int M = static_cast<int>(methods.size());
  struct Slot {
    std::optional<WindowForecast> forecast;
    std::optional<std::string> failure;
  };
  std::vector<Slot> slots(static_cast<std::size_t>(W * M));
  parallel_for(W * M, jobs, [&](int idx) {
    const int w = idx / M, mi = idx % M;
    const auto& [train, test] = plan.windows[static_cast<std::size_t>(w)];
    auto& slot = slots[static_cast<std::size_t>(idx)];
    try {
      slot.forecast = forecast_window(methods[static_cast<std::size_t>(mi)], panel.values.middleRows(train.begin, train.size()),
                                      panel.values.middleRows(test.begin, test.size()), panel.instruments, alpha, cfg,
                                      derive_seed(seed, static_cast<std::uint64_t>(w), static_cast<std::uint64_t>(methods[static_cast<std::size_t>(mi)])));
    } catch (const Error& e) {
      slot.failure = e.what();
    }
  });

  BacktestResult res;
  res.alpha = alpha;
  res.instruments = panel.instruments;
  res.times = panel.times;
  res.methods = methods;
  for (int w = 0; w < W; ++w) {
    const auto& test = plan.windows[static_cast<std::size_t>(w)].second;
    for (int mi = 0; mi < M; ++mi) {
      const Method m = methods[static_cast<std::size_t>(mi)];
      const auto& slot = slots[static_cast<std::size_t>(w * M + mi)];
      if (slot.failure) {
        res.failures.push_back({m, w, *slot.failure});
        continue;
      }
      for (const auto& note : slot.forecast->notes) {
        res.notes.push_back(method_name(m) + " window " + std::to_string(w) + ": " + note);
      }
      const Matrix& var = slot.forecast->var;
      for (int j = 0; j < panel.cols(); ++j) {
        const Vector r = panel.values.block(test.begin, j, test.size(), 1);
        const Vector v = var.col(j);
        const std::span<const double> rs(r.data(), static_cast<std::size_t>(r.size()));
        const std::span<const double> vs(v.data(), static_cast<std::size_t>(v.size()));
        res.cells.push_back({m, w, j, score(rs, vs, alpha, cfg.dq_lags)});
        for (int t = 0; t < test.size(); ++t) {
          res.days.push_back({w, test.begin + t, j, m, r(t), v(t), r(t) <= v(t)});
        }
      }
    }
  }
  res.aggregate = aggregate_cells(res.cells, res.days, methods);
  return res;
}

}  // namespace neco

#endif  // NECO_BACKTEST_HPP
