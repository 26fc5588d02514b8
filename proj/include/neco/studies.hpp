#ifndef NECO_STUDIES_HPP
#define NECO_STUDIES_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "neco/backtest.hpp"
#include "neco/causal_discovery.hpp"
#include "neco/copula.hpp"
#include "neco/errors.hpp"
#include "neco/parallel.hpp"
#include "neco/seeding.hpp"
#include "neco/sem_model.hpp"
#include "neco/simulation.hpp"

namespace neco {

enum class StudyKind { baseline, window, size, contagion, volatility };

inline std::string study_name(StudyKind k) {
  switch (k) {
    case StudyKind::baseline: return "baseline";
    case StudyKind::window: return "window";
    case StudyKind::size: return "size";
    case StudyKind::contagion: return "contagion";
    case StudyKind::volatility: return "volatility";
  }
  return "?";
}

inline StudyKind parse_study(const std::string& s) {
  for (auto k : {StudyKind::baseline, StudyKind::window, StudyKind::size, StudyKind::contagion, StudyKind::volatility}) {
    if (study_name(k) == s) return k;
  }
  throw DomainError("unknown study '" + s + "'");
}

// Name of the swept quantity, used as the first table column.
inline std::string study_level_name(StudyKind k) {
  switch (k) {
    case StudyKind::baseline: return "scenario";
    case StudyKind::window: return "train";
    case StudyKind::size: return "p";
    case StudyKind::contagion: return "necof";
    case StudyKind::volatility: return "sigma";
  }
  return "level";
}

inline std::vector<double> default_study_levels(StudyKind k) {
  switch (k) {
    case StudyKind::baseline: return {0.0};
    case StudyKind::window: return {50, 100, 150, 200, 250, 300, 350, 400, 450, 500};
    case StudyKind::size: return {5, 10, 20, 50};
    case StudyKind::contagion: return {0.0, 0.19, 0.47, 0.73, 0.83};
    case StudyKind::volatility: return {0.005, 0.05, 0.5, 1.0, 2.0};
  }
  return {};
}

struct StudySettings {
  std::optional<std::vector<double>> levels;
  std::optional<std::vector<Method>> methods;  // baseline: the five comparison methods plus NECO; others: NECO
  std::vector<double> alphas{0.05};
  int reps = 20;
  int train = 250;
  int test = 100;
  int contagion_p = 10;
  double necof = 0.47;
  NoiseKind noise = NoiseKind::exponential;
  std::optional<int> shock_period = 100;
  double shock_scale = 5.0;
  int burn_in = 100;
  EngineConfig engine;
  std::uint64_t seed = 20240101;
  int jobs = 1;
};

// Edge probability for random networks of size p: about 1.4 links per node,
// capped at the density of the five-node reference network.
inline double sparse_density(int p) { return p <= 1 ? 0.0 : std::min(0.7, 2.8 / (p - 1)); }

// Simulation config and true model for one (level, replication) of a study.
struct Scenario {
  SimConfig sim;
  SemModel model;
};

inline Scenario study_scenario(StudyKind kind, double level, const StudySettings& s, int rep) {
  SimConfig c;
  c.p = 5;
  c.density = 0.7;
  c.target_necof = s.necof;
  c.noise = s.noise;
  c.shock_period = s.shock_period;
  c.shock_scale = s.shock_scale;
  c.burn_in = s.burn_in;
  c.N = s.train + s.test;
  c.seed = derive_seed(s.seed, static_cast<std::uint64_t>(std::llround(level * 1e6)), static_cast<std::uint64_t>(rep));
  std::optional<CausalGraph> graph = reference_network();
  switch (kind) {
    case StudyKind::baseline: break;
    case StudyKind::window: c.N = static_cast<int>(level) + s.test; break;
    case StudyKind::size:
      c.p = static_cast<int>(level);
      if (c.p != 5) {
        c.density = sparse_density(c.p);
        graph.reset();
      }
      break;
    case StudyKind::contagion:
      c.p = s.contagion_p;
      c.density = sparse_density(c.p);
      c.target_necof = level;
      graph.reset();
      break;
    case StudyKind::volatility: c.sigma = level; break;
  }
  Scenario sc{c, build_sim_model(c, graph)};
  return sc;
}

struct StudyRow {
  double level = 0.0;
  double alpha = 0.05;
  AggregateRow agg;
};

struct TraceRow {
  double level = 0.0;
  double alpha = 0.05;
  Method method = Method::neco;
  int rep = 0;
  int instrument = 0;
  double alpha_hat = 0.0;
};

struct StudyResult {
  StudyKind kind = StudyKind::baseline;
  std::vector<double> levels;
  std::vector<double> alphas;
  std::vector<Method> methods;
  std::vector<StudyRow> table;
  std::vector<TraceRow> trace;
  std::vector<MethodFailure> failures;
  std::vector<std::string> notes;

  const AggregateRow* find(double level, double alpha, Method m) const {
    for (const auto& r : table) {
      if (r.level == level && r.alpha == alpha && r.agg.method == m) return &r.agg;
    }
    return nullptr;
  }
};

inline std::vector<Method> default_study_methods(StudyKind kind) {
  if (kind == StudyKind::baseline) return {Method::neco, Method::varcovar, Method::hist, Method::garch, Method::fhs};
  return {Method::neco};
}

// Runs the sweep: for every level and replication a fresh network and path
// are simulated, every method is backtested over one train/test window, and
// the cells are aggregated per (level, alpha, method).
inline StudyResult run_study(StudyKind kind, const StudySettings& s) {
  if (s.reps < 1) throw DomainError("reps must be positive");
  for (double a : s.alphas) check_alpha(a);
  StudyResult out;
  out.kind = kind;
  out.levels = s.levels ? *s.levels : default_study_levels(kind);
  out.alphas = s.alphas;
  out.methods = s.methods ? *s.methods : default_study_methods(kind);

  const int n_levels = static_cast<int>(out.levels.size());
  struct RepOutput {
    std::vector<BacktestResult> per_alpha;
    std::optional<std::string> error;
  };
  std::vector<RepOutput> reps(static_cast<std::size_t>(n_levels * s.reps));
  parallel_for(n_levels * s.reps, s.jobs, [&](int idx) {
    const int li = idx / s.reps, rep = idx % s.reps;
    const double level = out.levels[static_cast<std::size_t>(li)];
    auto& slot = reps[static_cast<std::size_t>(idx)];
    try {
      const auto sc = study_scenario(kind, level, s, rep);
      const auto panel = simulate_sem(sc.model, sc.sim);
      const auto plan = make_windows(panel.rows(), panel.rows() - s.test, s.test, s.test);
      for (double a : s.alphas) {
        slot.per_alpha.push_back(rolling_backtest(panel, plan, out.methods, a, s.engine, sc.sim.seed, 1));
      }
    } catch (const Error& e) {
      slot.error = e.what();
    }
  });

  for (int li = 0; li < n_levels; ++li) {
    const double level = out.levels[static_cast<std::size_t>(li)];
    for (std::size_t ai = 0; ai < s.alphas.size(); ++ai) {
      const double a = s.alphas[ai];
      std::vector<CellReport> cells;
      std::vector<DayRecord> days;
      for (int rep = 0; rep < s.reps; ++rep) {
        const auto& slot = reps[static_cast<std::size_t>(li * s.reps + rep)];
        if (slot.error) {
          if (ai == 0) out.notes.push_back(study_level_name(kind) + "=" + format_number(level) + " rep " +
                                           std::to_string(rep) + ": " + *slot.error);
          continue;
        }
        const auto& res = slot.per_alpha[ai];
        for (const auto& c : res.cells) {
          out.trace.push_back({level, a, c.method, rep, c.instrument, c.report.alpha_hat});
          cells.push_back(c);
        }
        days.insert(days.end(), res.days.begin(), res.days.end());
        for (const auto& f : res.failures) out.failures.push_back({f.method, rep, f.message});
      }
      for (const auto& row : aggregate_cells(cells, days, out.methods)) out.table.push_back({level, a, row});
    }
  }
  return out;
}

struct TimingRow {
  int p = 0;
  int reps = 0;
  double mean_ms = 0.0;
  double sd_ms = 0.0;
};

// Wall-clock of copula transform + discovery + SEM fit on simulated sparse
// networks of each size, averaged over replications. Runs sequentially so
// timings are not distorted by contention.
inline std::vector<TimingRow> timing_study(const std::vector<int>& p_values, int reps, int n = 250, int lag_order = 1,
                                           std::uint64_t seed = 7) {
  if (reps < 1) throw DomainError("reps must be positive");
  std::vector<TimingRow> rows;
  for (int p : p_values) {
    std::vector<double> ms;
    for (int r = 0; r < reps; ++r) {
      SimConfig c;
      c.p = p;
      c.density = sparse_density(p);
      c.target_necof = 0.47;
      c.N = n;
      c.seed = derive_seed(seed, static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(r));
      std::optional<CausalGraph> g;
      if (p == 5) g = reference_network();
      if (p < 2) c.target_necof.reset();
      const auto panel = simulate_sem(build_sim_model(c, g), c);
      const auto t0 = std::chrono::steady_clock::now();
      const auto tr = to_latent(panel);
      const auto graph = discover(tr.latent, CITestConfig{});
      const auto ens = fit_sem(tr.latent, graph, lag_order);
      const auto t1 = std::chrono::steady_clock::now();
      if (ens.models.empty()) throw NumericalError("empty ensemble");
      ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    TimingRow row;
    row.p = p;
    row.reps = reps;
    for (double v : ms) row.mean_ms += v / reps;
    row.sd_ms = sample_sd(ms);
    rows.push_back(row);
  }
  return rows;
}

// AIC-by-lag on a panel: copula transform, discovery, then lag comparison on
// a common sample.
inline LagSelection lag_aic(const ReturnPanel& panel, int max_lag, const CITestConfig& ci = {}) {
  const auto tr = to_latent(panel);
  const auto graph = discover(tr.latent, ci);
  return select_lags(tr.latent, graph, max_lag);
}

// Config for panels with first-order own-lag dynamics on the reference network.
inline SimConfig lag_one_config(int n, std::uint64_t seed, double ar_coef = 0.3) {
  SimConfig c;
  c.p = 5;
  c.density = 0.7;
  c.target_necof = 0.47;
  c.L = 1;
  c.ar_coef = ar_coef;
  c.noise = NoiseKind::gaussian;
  c.N = n;
  c.seed = seed;
  return c;
}

struct LagFrequency {
  int reps = 0;
  std::vector<int> counts;  // counts[L] = times L was chosen
  double share(int L) const { return reps ? static_cast<double>(counts[static_cast<std::size_t>(L)]) / reps : 0.0; }
};

// Share of panels for which AIC picks each lag. p = 5 uses the reference
// network; larger p uses sparse random networks.
inline LagFrequency lag_selection_frequency(int reps, int n, int max_lag, std::uint64_t seed, int jobs = 1, int p = 5) {
  LagFrequency f;
  f.reps = reps;
  f.counts.assign(static_cast<std::size_t>(max_lag + 1), 0);
  std::vector<int> chosen(static_cast<std::size_t>(reps), 0);
  parallel_for(reps, jobs, [&](int r) {
    auto c = lag_one_config(n, derive_seed(seed, static_cast<std::uint64_t>(r)));
    std::optional<CausalGraph> graph;
    if (p == 5) {
      graph = reference_network();
    } else {
      c.p = p;
      c.density = sparse_density(p);
    }
    const auto panel = simulate_sem(build_sim_model(c, graph), c);
    chosen[static_cast<std::size_t>(r)] = lag_aic(panel, max_lag).chosen_L;
  });
  for (int L : chosen) ++f.counts[static_cast<std::size_t>(L)];
  return f;
}

struct GraphScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int true_edges = 0;
  int estimated_edges = 0;
  int compelled_true = 0;    // directed edges of the true CPDAG
  int compelled_correct = 0; // of those, estimated with the same direction
  int marks_correct = 0;     // true skeleton edges whose mark (direction or undirected) matches the true CPDAG
  double orientation_accuracy = 0.0;
};

// Compares an estimated CPDAG with the equivalence class of the true DAG.
// Orientation accuracy counts true edges whose estimated mark agrees with the
// true CPDAG: directed the same way, or undirected where the class leaves the
// direction open.
inline GraphScore score_graph(const CausalGraph& estimated, const CausalGraph& true_dag) {
  const auto truth = cpdag_of_dag(true_dag);
  const auto ts = truth.skeleton();
  const auto es = estimated.skeleton();
  GraphScore s;
  s.true_edges = static_cast<int>(ts.size());
  s.estimated_edges = static_cast<int>(es.size());
  int tp = 0;
  for (const auto& e : es) tp += ts.count(e) ? 1 : 0;
  s.precision = es.empty() ? (ts.empty() ? 1.0 : 0.0) : static_cast<double>(tp) / es.size();
  s.recall = ts.empty() ? 1.0 : static_cast<double>(tp) / ts.size();
  s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  for (const auto& [a, b] : ts) {
    const bool t_ab = truth.directed.count({a, b}) > 0, t_ba = truth.directed.count({b, a}) > 0;
    const bool e_ab = estimated.directed.count({a, b}) > 0, e_ba = estimated.directed.count({b, a}) > 0;
    const bool e_und = estimated.undirected.count({a, b}) > 0;
    if (t_ab || t_ba) {
      ++s.compelled_true;
      if ((t_ab && e_ab) || (t_ba && e_ba)) {
        ++s.compelled_correct;
        ++s.marks_correct;
      }
    } else if (e_und) {
      ++s.marks_correct;
    }
  }
  s.orientation_accuracy = ts.empty() ? 1.0 : static_cast<double>(s.marks_correct) / ts.size();
  return s;
}

}  // namespace neco

#endif  // NECO_STUDIES_HPP
