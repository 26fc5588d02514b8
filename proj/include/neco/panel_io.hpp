#ifndef NECO_PANEL_IO_HPP
#define NECO_PANEL_IO_HPP

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "neco/errors.hpp"

namespace neco {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// N x p panel of per-period log-returns. Rows are time, columns instruments.
struct ReturnPanel {
  std::vector<std::string> instruments;
  std::vector<std::string> times;
  Matrix values;

  int rows() const { return static_cast<int>(values.rows()); }
  int cols() const { return static_cast<int>(values.cols()); }

  // Contiguous block of rows [begin, end).
  ReturnPanel slice(int begin, int end) const {
    ReturnPanel out;
    out.instruments = instruments;
    out.times.assign(times.begin() + begin, times.begin() + end);
    out.values = values.middleRows(begin, end - begin);
    return out;
  }

  // Single column as its own panel.
  ReturnPanel column(int j) const {
    ReturnPanel out;
    out.instruments = {instruments[j]};
    out.times = times;
    out.values = values.col(j);
    return out;
  }
};

enum class PanelMode { prices, log_returns };

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell.push_back(c);
    }
  }
  out.push_back(cell);
  for (auto& s : out) {
    const auto b = s.find_first_not_of(" \t\"");
    const auto e = s.find_last_not_of(" \t\"");
    s = b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  }
  return out;
}

// Parses YYYY-MM-DD (any trailing time component is ignored for ordering).
inline bool parse_iso_date(std::string_view s, std::chrono::sys_days& out) {
  if (s.size() < 10 || s[4] != '-' || s[7] != '-') return false;
  int y = 0;
  unsigned m = 0, d = 0;
  if (std::from_chars(s.data(), s.data() + 4, y).ec != std::errc{}) return false;
  if (std::from_chars(s.data() + 5, s.data() + 7, m).ec != std::errc{}) return false;
  if (std::from_chars(s.data() + 8, s.data() + 10, d).ec != std::errc{}) return false;
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) return false;
  out = std::chrono::sys_days{ymd};
  return true;
}

inline bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace detail

// ISO date `offset` calendar days after 2000-01-01; used to stamp synthetic panels.
inline std::string synthetic_date(int offset) {
  using namespace std::chrono;
  const year_month_day ymd{sys_days{year{2000} / January / 1} + days{offset}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

inline void validate_panel(const ReturnPanel& panel) {
  if (panel.cols() < 1) throw DataError("panel has no instruments");
  if (panel.rows() < 2) throw InsufficientData("panel needs at least 2 observations");
  if (static_cast<int>(panel.instruments.size()) != panel.cols() ||
      static_cast<int>(panel.times.size()) != panel.rows()) {
    throw DataError("panel labels do not match value dimensions");
  }
  std::unordered_set<std::string> seen;
  for (const auto& l : panel.instruments) {
    if (!seen.insert(l).second) throw DuplicateLabel("duplicate instrument label '" + l + "'");
  }
  if (!panel.values.allFinite()) throw DataError("panel contains non-finite values");
}

// Reads `date,<label1>,...,<labelp>`. In prices mode consecutive rows are
// turned into log(P_t / P_{t-1}) and the first date is dropped.
inline ReturnPanel parse_panel_csv(std::istream& in, PanelMode mode) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty CSV");
  const auto header = detail::split_csv_line(line);
  if (header.size() < 2) throw DataError("CSV header needs a date column and at least one instrument");
  std::vector<std::string> labels(header.begin() + 1, header.end());
  std::unordered_set<std::string> seen;
  for (const auto& l : labels) {
    if (l.empty()) throw DataError("empty instrument label in header");
    if (!seen.insert(l).second) throw DuplicateLabel("duplicate instrument label '" + l + "'");
  }
  const std::size_t p = labels.size();

  std::vector<std::string> dates;
  std::vector<double> cells;
  std::chrono::sys_days prev{};
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto row = detail::split_csv_line(line);
    if (row.size() != p + 1) {
      throw DataError("row " + std::to_string(line_no) + ": expected " + std::to_string(p + 1) +
                      " cells, found " + std::to_string(row.size()));
    }
    std::chrono::sys_days day;
    if (!detail::parse_iso_date(row[0], day)) {
      throw DataError("row " + std::to_string(line_no) + ": invalid ISO-8601 date '" + row[0] + "'");
    }
    if (!dates.empty() && day <= prev) {
      throw DataError("row " + std::to_string(line_no) + ": dates are not strictly increasing");
    }
    prev = day;
    dates.push_back(row[0]);
    for (std::size_t j = 0; j < p; ++j) {
      double v;
      if (!detail::parse_double(row[j + 1], v)) {
        throw DataError("row " + std::to_string(line_no) + ", column '" + labels[j] +
                        "': missing or non-numeric cell '" + row[j + 1] + "'");
      }
      if (mode == PanelMode::prices && !(v > 0.0)) {
        throw DataError("row " + std::to_string(line_no) + ", column '" + labels[j] + "': price must be positive");
      }
      cells.push_back(v);
    }
  }

  const auto n_raw = static_cast<Eigen::Index>(dates.size());
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> raw(
      cells.data(), n_raw, static_cast<Eigen::Index>(p));

  ReturnPanel panel;
  panel.instruments = std::move(labels);
  if (mode == PanelMode::prices) {
    if (n_raw < 3) throw InsufficientData("prices mode needs at least 3 rows");
    panel.values = (raw.bottomRows(n_raw - 1).array() / raw.topRows(n_raw - 1).array()).log().matrix();
    panel.times.assign(dates.begin() + 1, dates.end());
  } else {
    panel.values = raw;
    panel.times = std::move(dates);
  }
  validate_panel(panel);
  return panel;
}

inline ReturnPanel parse_panel_csv(const std::string& path, PanelMode mode) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return parse_panel_csv(in, mode);
}

// Shortest form with at least 15 significant digits.
inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

inline void write_panel_csv(std::ostream& out, const ReturnPanel& panel) {
  out << "date";
  for (const auto& l : panel.instruments) out << ',' << l;
  out << '\n';
  for (int t = 0; t < panel.rows(); ++t) {
    out << panel.times[t];
    for (int j = 0; j < panel.cols(); ++j) out << ',' << format_number(panel.values(t, j));
    out << '\n';
  }
}

struct InstrumentSummary {
  std::string instrument;
  double min = 0, median = 0, mean = 0, max = 0, stdev = 0;
  double skewness = 0, excess_kurtosis = 0, jarque_bera = 0;
};

inline double median_of(std::vector<double> v) {
  const auto n = v.size();
  std::nth_element(v.begin(), v.begin() + n / 2, v.end());
  const double hi = v[n / 2];
  if (n % 2 == 1) return hi;
  return 0.5 * (hi + *std::max_element(v.begin(), v.begin() + n / 2));
}

inline InstrumentSummary summarize_series(const std::string& label, const Eigen::Ref<const Vector>& x) {
  const auto n = x.size();
  if (n < 4) throw InsufficientData("summarize needs N >= 4, got " + std::to_string(n));
  InstrumentSummary s;
  s.instrument = label;
  s.min = x.minCoeff();
  s.max = x.maxCoeff();
  s.mean = x.mean();
  s.median = median_of(std::vector<double>(x.data(), x.data() + n));
  const Vector d = x.array() - s.mean;
  const double m2 = d.squaredNorm() / n;
  if (!(m2 > 0.0)) throw DegenerateSeries("series '" + label + "' is constant");
  const double m3 = d.array().cube().sum() / n;
  const double m4 = d.array().square().square().sum() / n;
  s.stdev = std::sqrt(d.squaredNorm() / (n - 1));
  s.skewness = m3 / std::pow(m2, 1.5);
  s.excess_kurtosis = m4 / (m2 * m2) - 3.0;
  s.jarque_bera = n / 6.0 * (s.skewness * s.skewness + 0.25 * s.excess_kurtosis * s.excess_kurtosis);
  return s;
}

inline std::vector<InstrumentSummary> summarize(const ReturnPanel& panel) {
  std::vector<InstrumentSummary> out;
  out.reserve(panel.cols());
  for (int j = 0; j < panel.cols(); ++j) out.push_back(summarize_series(panel.instruments[j], panel.values.col(j)));
  return out;
}

// Half-open row range.
struct RowRange {
  int begin = 0;
  int end = 0;
  int size() const { return end - begin; }
  bool operator==(const RowRange&) const = default;
};

struct WindowPlan {
  int train_length = 0;
  int test_length = 0;
  int stride = 0;
  std::vector<std::pair<RowRange, RowRange>> windows;
};

// Train/test windows advancing by `stride`; a trailing partial window is dropped.
inline WindowPlan make_windows(int n, int train, int test, int stride) {
  if (train <= 0 || test <= 0 || stride <= 0) throw WindowError("window sizes must be positive");
  if (train + test > n) {
    throw WindowError("train (" + std::to_string(train) + ") + test (" + std::to_string(test) +
                      ") exceeds panel length " + std::to_string(n));
  }
  WindowPlan plan{train, test, stride, {}};
  for (int s = 0; s + train + test <= n; s += stride) {
    plan.windows.push_back({RowRange{s, s + train}, RowRange{s + train, s + train + test}});
  }
  return plan;
}

}  // namespace neco

#endif  // NECO_PANEL_IO_HPP
