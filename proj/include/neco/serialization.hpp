#ifndef NECO_SERIALIZATION_HPP
#define NECO_SERIALIZATION_HPP

#include <nlohmann/json.hpp>

#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "neco/backtest.hpp"
#include "neco/causal_discovery.hpp"
#include "neco/errors.hpp"
#include "neco/panel_io.hpp"
#include "neco/sem_model.hpp"
#include "neco/studies.hpp"

namespace neco {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Graphs and models

inline json graph_to_json(const CausalGraph& g) {
  json j;
  j["p"] = g.p;
  j["labels"] = g.labels;
  j["directed"] = json::array();
  for (const auto& [a, b] : g.directed) j["directed"].push_back({a, b});
  j["undirected"] = json::array();
  for (const auto& [a, b] : g.undirected) j["undirected"].push_back({a, b});
  return j;
}

inline CausalGraph graph_from_json(const json& j) {
  CausalGraph g;
  try {
    g.p = j.at("p").get<int>();
    g.labels = j.value("labels", std::vector<std::string>{});
    for (const auto& e : j.at("directed")) g.directed.insert({e.at(0).get<int>(), e.at(1).get<int>()});
    for (const auto& e : j.at("undirected")) g.undirected.insert(unordered_pair(e.at(0).get<int>(), e.at(1).get<int>()));
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed graph JSON: ") + e.what());
  }
  for (const auto& e : g.skeleton()) {
    if (e.first == e.second || e.first < 0 || e.second >= g.p) throw DataError("graph JSON has an invalid edge");
  }
  return g;
}

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(row);
  }
  return rows;
}

inline Matrix matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) throw DataError("matrix JSON has the wrong shape");
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) throw DataError("matrix JSON has the wrong shape");
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
  }
  return m;
}

inline json vector_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline json model_to_json(const SemModel& m) {
  json j;
  j["labels"] = m.labels;
  j["L"] = m.L;
  j["alpha0"] = vector_to_json(m.alpha0);
  j["A"] = matrix_to_json(m.A);
  j["B"] = matrix_to_json(m.B);
  j["sigma2"] = vector_to_json(m.sigma2);
  j["graph"] = graph_to_json(m.graph);
  return j;
}

inline SemModel model_from_json(const json& j) {
  SemModel m;
  try {
    m.labels = j.at("labels").get<std::vector<std::string>>();
    m.L = j.at("L").get<int>();
    const auto a0 = j.at("alpha0").get<std::vector<double>>();
    const auto p = static_cast<Eigen::Index>(a0.size());
    m.alpha0 = Eigen::Map<const Vector>(a0.data(), p);
    m.A = matrix_from_json(j.at("A"), p, m.L);
    m.B = matrix_from_json(j.at("B"), p, p);
    const auto s2 = j.at("sigma2").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(s2.size()) != p) throw DataError("sigma2 has the wrong length");
    m.sigma2 = Eigen::Map<const Vector>(s2.data(), p);
    if (j.contains("graph")) m.graph = graph_from_json(j.at("graph"));
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model JSON: ") + e.what());
  }
  if (!support_acyclic(m.B)) throw DataError("model JSON has a cyclic contagion matrix");
  return m;
}

inline json ensemble_to_json(const ModelEnsemble& ens) {
  json j;
  j["primary_index"] = ens.primary_index;
  j["models"] = json::array();
  for (const auto& m : ens.models) j["models"].push_back(model_to_json(m));
  return j;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(path + ": " + e.what());
  }
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Forecasts and backtests

struct ForecastRow {
  std::string time;
  std::string instrument;
  std::string method;
  double alpha = 0.05;
  double var = 0.0;
};

inline void write_forecast_csv(std::ostream& out, const std::vector<ForecastRow>& rows, bool header = true) {
  if (header) out << "time,instrument,method,alpha,var\n";
  for (const auto& r : rows) {
    out << r.time << ',' << r.instrument << ',' << r.method << ',' << format_number(r.alpha) << ','
        << format_number(r.var) << '\n';
  }
}

// Tidy per-day output: one row per (window, day, instrument, method).
inline void write_days_csv(std::ostream& out, const BacktestResult& res) {
  out << "window,time,instrument,method,alpha,return,var,hit\n";
  for (const auto& d : res.days) {
    out << d.window << ',' << res.times[static_cast<std::size_t>(d.row)] << ','
        << res.instruments[static_cast<std::size_t>(d.instrument)] << ',' << method_name(d.method) << ','
        << format_number(res.alpha) << ',' << format_number(d.ret) << ',' << format_number(d.var) << ','
        << (d.hit ? 1 : 0) << '\n';
  }
}

inline void write_cells_csv(std::ostream& out, const BacktestResult& res) {
  out << "method,window,instrument,T,n1,alpha_hat,ae,lr_uc,lr_uc_p,lr_cc,lr_cc_p,dq,dq_p,dq_degenerate,ad_mean,ad_max,"
         "ql\n";
  for (const auto& c : res.cells) {
    const auto& r = c.report;
    out << method_name(c.method) << ',' << c.window << ',' << res.instruments[static_cast<std::size_t>(c.instrument)]
        << ',' << r.T << ',' << r.n1 << ',' << format_number(r.alpha_hat) << ',' << format_number(r.ae) << ','
        << format_number(r.lr_uc.statistic) << ',' << format_number(r.lr_uc.pvalue) << ','
        << format_number(r.lr_cc.statistic) << ',' << format_number(r.lr_cc.pvalue) << ','
        << format_number(r.dq.statistic) << ',' << format_number(r.dq.pvalue) << ',' << (r.dq.degenerate ? 1 : 0)
        << ',' << (r.ad_empty ? "NA" : format_number(r.ad_mean)) << ','
        << (r.ad_empty ? "NA" : format_number(r.ad_max)) << ',' << format_number(r.ql) << '\n';
  }
}

inline const std::vector<std::string>& aggregate_metric_names() {
  static const std::vector<std::string> names{"mean(alpha_hat)", "st.dev(alpha_hat)", "LRuc.accept", "LRcc.accept",
                                              "DQ.accept",       "AE.mean",           "AE.sd",       "AD.mean",
                                              "AD.max",          "CompareQL"};
  return names;
}

inline std::optional<double> aggregate_metric(const AggregateRow& r, std::size_t k) {
  switch (k) {
    case 0: return r.mean_alpha_hat;
    case 1: return r.sd_alpha_hat;
    case 2: return r.lr_uc_accept;
    case 3: return r.lr_cc_accept;
    case 4: return r.dq_accept;
    case 5: return r.ae_mean;
    case 6: return r.ae_sd;
    case 7: return r.ad_mean;
    case 8: return r.ad_max;
    case 9: return r.compare_ql;
    default: return std::nullopt;
  }
}

// Comparison table: one row per metric, one column per method.
inline void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
  out << "metric";
  for (const auto& r : rows) out << ',' << method_title(r.method);
  out << '\n';
  const auto& names = aggregate_metric_names();
  for (std::size_t k = 0; k < names.size(); ++k) {
    out << names[k];
    for (const auto& r : rows) {
      const auto v = aggregate_metric(r, k);
      out << ',' << (v ? format_number(*v) : "NA");
    }
    out << '\n';
  }
}

inline json aggregate_to_json(const std::vector<AggregateRow>& rows, double alpha) {
  json j;
  j["alpha"] = alpha;
  j["methods"] = json::array();
  for (const auto& r : rows) {
    json m;
    m["method"] = method_name(r.method);
    m["title"] = method_title(r.method);
    m["cells"] = r.cells;
    const auto& names = aggregate_metric_names();
    for (std::size_t k = 0; k < names.size(); ++k) {
      const auto v = aggregate_metric(r, k);
      m[names[k]] = v ? json(*v) : json(nullptr);
    }
    m["mean_ql"] = r.mean_ql;
    j["methods"].push_back(m);
  }
  return j;
}

inline void write_failures_csv(std::ostream& out, const BacktestResult& res) {
  out << "method,window,message\n";
  for (const auto& f : res.failures) out << method_name(f.method) << ',' << f.window << ",\"" << f.message << "\"\n";
}

// ---------------------------------------------------------------------------
// Studies

inline void write_study_table_csv(std::ostream& out, const StudyResult& s) {
  out << study_level_name(s.kind)
      << ",alpha,method,cells,mean_alpha_hat,sd_alpha_hat,lr_uc_accept,lr_cc_accept,dq_accept,ae_mean,ae_sd,ad_mean,ad_max,"
         "compare_ql\n";
  for (const auto& row : s.table) {
    const auto& r = row.agg;
    out << format_number(row.level) << ',' << format_number(row.alpha) << ',' << method_name(r.method) << ','
        << r.cells << ',' << format_number(r.mean_alpha_hat) << ',' << format_number(r.sd_alpha_hat) << ','
        << format_number(r.lr_uc_accept) << ',' << format_number(r.lr_cc_accept) << ','
        << format_number(r.dq_accept) << ',' << format_number(r.ae_mean) << ',' << format_number(r.ae_sd) << ','
        << (r.ad_mean ? format_number(*r.ad_mean) : "NA") << ',' << (r.ad_max ? format_number(*r.ad_max) : "NA")
        << ',' << format_number(r.compare_ql) << '\n';
  }
}

inline void write_study_trace_csv(std::ostream& out, const StudyResult& s) {
  out << study_level_name(s.kind) << ",alpha,method,rep,instrument,alpha_hat\n";
  for (const auto& t : s.trace) {
    out << format_number(t.level) << ',' << format_number(t.alpha) << ',' << method_name(t.method) << ',' << t.rep
        << ',' << t.instrument << ',' << format_number(t.alpha_hat) << '\n';
  }
}

inline void write_timing_csv(std::ostream& out, const std::vector<TimingRow>& rows) {
  out << "p,reps,mean_ms,sd_ms\n";
  for (const auto& r : rows) {
    out << r.p << ',' << r.reps << ',' << format_number(r.mean_ms) << ',' << format_number(r.sd_ms) << '\n';
  }
}

inline void write_lag_csv(std::ostream& out, const LagSelection& sel) {
  out << "L,k,loglik,aic,minimum\n";
  for (const auto& c : sel.candidates) {
    out << c.L << ',' << c.k << ',' << format_number(c.loglik) << ',' << format_number(c.aic) << ','
        << (c.L == sel.chosen_L ? 1 : 0) << '\n';
  }
}

}  // namespace neco

#endif  // NECO_SERIALIZATION_HPP
