// neco: command-line front end for simulation, discovery, estimation,
// forecasting, backtesting and the simulation studies.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "neco/backtest.hpp"
#include "neco/causal_discovery.hpp"
#include "neco/copula.hpp"
#include "neco/errors.hpp"
#include "neco/panel_io.hpp"
#include "neco/parallel.hpp"
#include "neco/sem_model.hpp"
#include "neco/serialization.hpp"
#include "neco/simulation.hpp"
#include "neco/studies.hpp"
#include "neco/version.hpp"

namespace fs = std::filesystem;
using namespace neco;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kUsage = 2, kPartial = 3, kData = 4 };

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

fs::path prepare_dir(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw DataError("cannot create output directory " + dir + ": " + ec.message());
  return p;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

// Resolved value of every option of `cmd`: given on the command line or in
// the config file, otherwise its default.
json resolved_options(const CLI::App* cmd) {
  json cfg = json::object();
  for (const CLI::Option* opt : cmd->get_options()) {
    const std::string key = opt->get_single_name();
    if (key.empty() || key == "help" || key == "config" || key == "version") continue;
    if (opt->count() > 0) {
      const auto& res = opt->results();
      std::string joined;
      for (std::size_t i = 0; i < res.size(); ++i) joined += (i ? "," : "") + res[i];
      cfg[key] = joined;
    } else {
      cfg[key] = opt->get_default_str();
    }
  }
  return cfg;
}

void write_manifest(const fs::path& dir, const CLI::App* cmd, std::uint64_t seed, json extra = json::object()) {
  json m;
  m["tool"] = "neco";
  m["version"] = kVersion;
  m["command"] = cmd->get_name();
  m["seed"] = seed;
  m["config"] = resolved_options(cmd);
  for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
  write_json_file((dir / "manifest.json").string(), m);
}

PanelMode parse_mode(const std::string& s) {
  if (s == "prices") return PanelMode::prices;
  if (s == "returns" || s == "log_returns") return PanelMode::log_returns;
  throw UsageError("mode must be 'prices' or 'returns'");
}

std::vector<Method> parse_methods(const std::vector<std::string>& names) {
  std::vector<Method> out;
  for (const auto& n : names) {
    try {
      out.push_back(parse_method(n));
    } catch (const DomainError& e) {
      throw UsageError(std::string(e.what()) + " (valid: neco, neco-gauss, varcovar, hist, garch, fhs)");
    }
  }
  if (out.empty()) throw UsageError("no methods given");
  return out;
}

void require_alpha(double a) {
  if (!(a > 0.0 && a < 1.0)) throw UsageError("alpha must lie strictly between 0 and 1");
}

struct PanelInput {
  std::string path;
  std::string mode = "returns";
};

void add_panel_options(CLI::App* cmd, PanelInput& in) {
  cmd->add_option("-i,--input", in.path, "Panel CSV (date,<label1>,...)")->required();
  cmd->add_option("--mode", in.mode, "Input cells: returns or prices")->check(CLI::IsMember({"returns", "log_returns", "prices"}));
}

ReturnPanel load_panel(const PanelInput& in) { return parse_panel_csv(in.path, parse_mode(in.mode)); }

struct EngineOptions {
  int lags = 1;
  double alpha_ci = 0.01;
  int max_cond = -1;
  std::string noise_mode = "estimated";
  int boot_reps = 1000;
  int mc_paths = 10000;
  int dq_lags = 4;
};

void add_engine_options(CLI::App* cmd, EngineOptions& e) {
  cmd->add_option("--lags", e.lags, "SEM lag order L")->check(CLI::Range(0, 50));
  cmd->add_option("--alpha-ci", e.alpha_ci, "CI test significance level")->check(CLI::Range(1e-12, 0.999999));
  cmd->add_option("--max-cond", e.max_cond, "Maximum conditioning set size (-1: unlimited)");
  cmd->add_option("--noise-mode", e.noise_mode, "Latent noise: estimated or unit")->check(CLI::IsMember({"estimated", "unit"}));
  cmd->add_option("--boot-reps", e.boot_reps, "Bootstrap resamples for HIST/FHS")->check(CLI::PositiveNumber);
  cmd->add_option("--mc-paths", e.mc_paths, "Monte Carlo paths for GARCH")->check(CLI::PositiveNumber);
  cmd->add_option("--dq-lags", e.dq_lags, "Lagged hits in the DQ regression")->check(CLI::Range(0, 50));
}

EngineConfig engine_config(const EngineOptions& e) {
  EngineConfig c;
  c.lag_order = e.lags;
  c.ci.alpha_ci = e.alpha_ci;
  if (e.max_cond >= 0) c.ci.max_cond_size = e.max_cond;
  c.noise_mode = e.noise_mode == "unit" ? NoiseMode::unit : NoiseMode::estimated;
  c.boot_reps = e.boot_reps;
  c.mc_paths = e.mc_paths;
  c.dq_lags = e.dq_lags;
  return c;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  int p = 5;
  double density = 0.7;
  int edges = -1;
  std::string graph = "random";
  double necof = -1.0;
  int L = 0;
  double ar = 0.0;
  std::string noise = "gaussian";
  double sigma = 1.0;
  int shock_every = 0;
  double shock_scale = 5.0;
  int n = 350;
  int burn_in = 100;
  std::uint64_t seed = 1;
  std::string out = "sim";
};

int cmd_simulate(const CLI::App* cmd, const SimulateArgs& a) {
  SimConfig c;
  c.p = a.p;
  c.density = a.density;
  if (a.edges >= 0) c.edges = a.edges;
  if (a.necof >= 0.0) c.target_necof = a.necof;
  c.L = a.L;
  c.ar_coef = a.ar;
  c.noise = parse_noise(a.noise);
  c.sigma = a.sigma;
  if (a.shock_every > 0) c.shock_period = a.shock_every;
  c.shock_scale = a.shock_scale;
  c.N = a.n;
  c.burn_in = a.burn_in;
  c.seed = a.seed;
  try {
    c.validate();
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
  std::optional<CausalGraph> g;
  if (a.graph == "reference") {
    if (a.p != 5) throw UsageError("--graph reference requires --p 5");
    g = reference_network();
  }
  const auto model = build_sim_model(c, g);
  const auto path = simulate_sem_path(model, c);
  const auto dir = prepare_dir(a.out);
  {
    auto out = open_out(dir / "panel.csv");
    write_panel_csv(out, path.panel);
  }
  write_json_file((dir / "model.json").string(), model_to_json(model));
  write_json_file((dir / "graph.json").string(), graph_to_json(model.graph));
  const auto nf = necof(model);
  json extra;
  extra["necof"] = {{"market", nf.market}, {"per_node", vector_to_json(nf.per_node)}};
  extra["edges"] = model.graph.edge_count();
  extra["density"] = graph_density(model.graph);
  extra["shocked_rows"] = path.shocked_rows;
  write_manifest(dir, cmd, a.seed, extra);
  std::cout << "wrote " << path.panel.rows() << "x" << path.panel.cols() << " panel to " << (dir / "panel.csv").string()
            << " (market NECOF " << format_number(nf.market) << ")\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct DiscoverArgs {
  PanelInput in;
  EngineOptions eng;
  std::string out = "discover";
};

int cmd_discover(const CLI::App* cmd, const DiscoverArgs& a) {
  const auto panel = load_panel(a.in);
  const auto cfg = engine_config(a.eng);
  const auto tr = to_latent(panel);
  const auto g = discover(tr.latent, cfg.ci);
  const auto dir = prepare_dir(a.out);
  auto j = graph_to_json(g);
  j["diagnostics"] = g.diagnostics;
  write_json_file((dir / "graph.json").string(), j);
  write_manifest(dir, cmd, 0, {{"rows", panel.rows()}});
  std::cout << g.directed.size() << " directed, " << g.undirected.size() << " undirected edges\n";
  for (const auto& d : g.diagnostics) std::cerr << "note: " << d << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct FitArgs {
  PanelInput in;
  EngineOptions eng;
  std::string graph;
  int lmax = -1;
  std::string out = "fit";
};

int cmd_fit(const CLI::App* cmd, const FitArgs& a) {
  const auto panel = load_panel(a.in);
  const auto cfg = engine_config(a.eng);
  const auto tr = to_latent(panel);
  CausalGraph g = a.graph.empty() ? discover(tr.latent, cfg.ci) : graph_from_json(read_json_file(a.graph));
  if (g.p != panel.cols()) throw DataError("graph has " + std::to_string(g.p) + " nodes, panel has " + std::to_string(panel.cols()));
  if (g.labels.empty()) g.labels = panel.instruments;
  const auto dir = prepare_dir(a.out);
  int L = cfg.lag_order;
  json extra;
  if (a.lmax >= 0) {
    const auto sel = select_lags(tr.latent, g, a.lmax);
    L = sel.chosen_L;
    auto out = open_out(dir / "lag_aic.csv");
    write_lag_csv(out, sel);
    extra["selected_L"] = L;
  }
  const auto ens = fit_sem(tr.latent, g, L);
  write_json_file((dir / "model.json").string(), ensemble_to_json(ens));
  write_json_file((dir / "graph.json").string(), graph_to_json(g));
  const auto nf = necof(ens.primary());
  extra["necof_market"] = nf.market;
  extra["ensemble_size"] = ens.models.size();
  write_manifest(dir, cmd, 0, extra);
  std::cout << ens.models.size() << " model(s), L=" << L << ", market NECOF " << format_number(nf.market) << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct ForecastArgs {
  PanelInput in;
  EngineOptions eng;
  int train = 250;
  int test = 0;
  std::vector<double> alphas{0.05};
  std::vector<std::string> methods{"neco"};
  std::uint64_t seed = 1;
  std::string out = "forecast";
};

// Fits on the `train` rows preceding the last `test` rows and forecasts each
// of those test days plus the day after the panel ends (time "next").
int cmd_forecast(const CLI::App* cmd, const ForecastArgs& a) {
  for (double al : a.alphas) require_alpha(al);
  const auto methods = parse_methods(a.methods);
  const auto panel = load_panel(a.in);
  const auto cfg = engine_config(a.eng);
  if (a.train < 2 || a.test < 0 || a.train + a.test > panel.rows()) throw UsageError("train/test do not fit the panel");
  const int begin = panel.rows() - a.test - a.train;
  const Matrix train = panel.values.middleRows(begin, a.train);
  Matrix test(a.test + 1, panel.cols());
  test.topRows(a.test) = panel.values.bottomRows(a.test);
  test.row(a.test).setZero();  // placeholder for the unobserved next day; never used in its own forecast
  std::vector<ForecastRow> rows;
  std::vector<std::string> notes;
  int failures = 0;
  for (double al : a.alphas) {
    for (Method m : methods) {
      try {
        const auto wf = forecast_window(m, train, test, panel.instruments, al, cfg, derive_seed(a.seed, static_cast<std::uint64_t>(m)));
        for (const auto& n : wf.notes) notes.push_back(method_name(m) + ": " + n);
        for (int t = 0; t <= a.test; ++t) {
          const std::string time = t < a.test ? panel.times[static_cast<std::size_t>(panel.rows() - a.test + t)] : "next";
          for (int j = 0; j < panel.cols(); ++j) {
            rows.push_back({time, panel.instruments[static_cast<std::size_t>(j)], method_name(m), al, wf.var(t, j)});
          }
        }
      } catch (const Error& e) {
        ++failures;
        std::cerr << "error: " << method_name(m) << " at alpha " << al << ": " << e.what() << '\n';
      }
    }
  }
  const auto dir = prepare_dir(a.out);
  {
    auto out = open_out(dir / "forecasts.csv");
    write_forecast_csv(out, rows);
  }
  write_manifest(dir, cmd, a.seed, {{"notes", notes}, {"failures", failures}});
  for (const auto& n : notes) std::cerr << "note: " << n << '\n';
  std::cout << "wrote " << rows.size() << " forecasts to " << (dir / "forecasts.csv").string() << '\n';
  return failures ? kPartial : kOk;
}

// ---------------------------------------------------------------------------

struct BacktestArgs {
  PanelInput in;
  EngineOptions eng;
  int train = 250;
  int test = 100;
  int stride = 0;
  double alpha = 0.05;
  std::vector<std::string> methods{"neco", "varcovar", "hist", "garch", "fhs"};
  std::uint64_t seed = 1;
  int jobs = 0;
  std::string out = "backtest";
};

void write_backtest_outputs(const fs::path& dir, const BacktestResult& res) {
  {
    auto out = open_out(dir / "aggregate.csv");
    write_aggregate_csv(out, res.aggregate);
  }
  write_json_file((dir / "aggregate.json").string(), aggregate_to_json(res.aggregate, res.alpha));
  {
    auto out = open_out(dir / "days.csv");
    write_days_csv(out, res);
  }
  {
    auto out = open_out(dir / "cells.csv");
    write_cells_csv(out, res);
  }
  {
    auto out = open_out(dir / "failures.csv");
    write_failures_csv(out, res);
  }
}

int cmd_backtest(const CLI::App* cmd, const BacktestArgs& a) {
  require_alpha(a.alpha);
  const auto methods = parse_methods(a.methods);
  const auto panel = load_panel(a.in);
  WindowPlan plan;
  try {
    plan = make_windows(panel.rows(), a.train, a.test, a.stride > 0 ? a.stride : a.test);
  } catch (const WindowError& e) {
    throw UsageError(e.what());
  }
  const int jobs = a.jobs > 0 ? a.jobs : default_jobs();
  const auto res = rolling_backtest(panel, plan, methods, a.alpha, engine_config(a.eng), a.seed, jobs);
  const auto dir = prepare_dir(a.out);
  write_backtest_outputs(dir, res);
  write_manifest(dir, cmd, a.seed,
                 {{"windows", plan.windows.size()}, {"notes", res.notes}, {"failures", res.failures.size()}});
  write_aggregate_csv(std::cout, res.aggregate);
  for (const auto& n : res.notes) std::cerr << "note: " << n << '\n';
  for (const auto& f : res.failures) {
    std::cerr << "error: " << method_name(f.method) << " window " << f.window << ": " << f.message << '\n';
  }
  return res.failures.empty() ? kOk : kPartial;
}

// ---------------------------------------------------------------------------

struct CompareArgs {
  PanelInput in;
  std::string forecasts;
  int dq_lags = 4;
  std::string out = "compare";
};

// Scores externally produced forecasts (time,instrument,method,alpha,var)
// against the realised panel returns.
int cmd_compare(const CLI::App* cmd, const CompareArgs& a) {
  const auto panel = load_panel(a.in);
  std::ifstream in(a.forecasts);
  if (!in) throw DataError("cannot open " + a.forecasts);
  std::map<std::string, int> row_of, col_of;
  for (int t = 0; t < panel.rows(); ++t) row_of[panel.times[static_cast<std::size_t>(t)]] = t;
  for (int j = 0; j < panel.cols(); ++j) col_of[panel.instruments[static_cast<std::size_t>(j)]] = j;
  // (method, alpha) -> instrument -> [(row, var)]
  std::map<std::pair<std::string, double>, std::map<int, std::vector<std::pair<int, double>>>> series;
  std::string line;
  std::getline(in, line);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 5) throw DataError(a.forecasts + ":" + std::to_string(lineno) + ": expected 5 fields");
    if (f[0] == "next") continue;
    const auto rt = row_of.find(f[0]);
    const auto ci = col_of.find(f[1]);
    if (rt == row_of.end() || ci == col_of.end()) {
      throw DataError(a.forecasts + ":" + std::to_string(lineno) + ": unknown time or instrument");
    }
    double al = 0, v = 0;
    if (!detail::parse_double(f[3], al) || !detail::parse_double(f[4], v)) {
      throw DataError(a.forecasts + ":" + std::to_string(lineno) + ": non-numeric alpha or var");
    }
    require_alpha(al);
    series[{f[2], al}][ci->second].push_back({rt->second, v});
  }
  const auto dir = prepare_dir(a.out);
  auto out = open_out(dir / "scores.csv");
  out << "method,alpha,instrument,T,n1,alpha_hat,ae,lr_uc_p,lr_uc_accept,lr_cc_p,lr_cc_accept,dq_p,dq_accept,ad_mean,ad_max,"
         "ql\n";
  for (auto& [key, by_inst] : series) {
    for (auto& [j, pts] : by_inst) {
      std::sort(pts.begin(), pts.end());
      std::vector<double> r, v;
      for (const auto& [t, var] : pts) {
        r.push_back(panel.values(t, j));
        v.push_back(var);
      }
      const auto rep = score(r, v, key.second, a.dq_lags);
      out << key.first << ',' << format_number(key.second) << ',' << panel.instruments[static_cast<std::size_t>(j)]
          << ',' << rep.T << ',' << rep.n1 << ',' << format_number(rep.alpha_hat) << ',' << format_number(rep.ae)
          << ',' << format_number(rep.lr_uc.pvalue) << ',' << rep.lr_uc.accept << ','
          << format_number(rep.lr_cc.pvalue) << ',' << rep.lr_cc.accept << ',' << format_number(rep.dq.pvalue) << ','
          << rep.dq.accept << ',' << (rep.ad_empty ? "NA" : format_number(rep.ad_mean)) << ','
          << (rep.ad_empty ? "NA" : format_number(rep.ad_max)) << ',' << format_number(rep.ql) << '\n';
    }
  }
  write_manifest(dir, cmd, 0);
  std::cout << "scored " << series.size() << " method/alpha series\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct ReproduceArgs {
  std::string study;
  EngineOptions eng;
  int reps = 20;
  std::vector<double> levels;
  std::vector<double> alphas{0.05};
  std::vector<std::string> methods;
  int train = 250;
  int test = 100;
  std::vector<int> p_values{5, 10, 20, 50};
  int lmax = 5;
  int n = 500;
  std::string input;
  std::string mode = "returns";
  std::uint64_t seed = 20240101;
  int jobs = 0;
  std::string out;
};

const std::vector<std::string>& study_names() {
  static const std::vector<std::string> names{"baseline", "window", "size", "contagion", "volatility", "timing", "lag-aic"};
  return names;
}

int cmd_reproduce(const CLI::App* cmd, const ReproduceArgs& a) {
  const auto& names = study_names();
  if (std::find(names.begin(), names.end(), a.study) == names.end()) {
    std::string list;
    for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
    throw UsageError("unknown study '" + a.study + "' (valid: " + list + ")");
  }
  const auto dir = prepare_dir(a.out.empty() ? "study_" + a.study : a.out);
  const std::string stem = "study_" + a.study;

  if (a.study == "timing") {
    const auto rows = timing_study(a.p_values, a.reps, a.train, a.eng.lags, a.seed);
    auto out = open_out(dir / (stem + "_table.csv"));
    write_timing_csv(out, rows);
    write_manifest(dir, cmd, a.seed);
    write_timing_csv(std::cout, rows);
    return kOk;
  }
  if (a.study == "lag-aic") {
    ReturnPanel panel;
    if (!a.input.empty()) {
      panel = parse_panel_csv(a.input, parse_mode(a.mode));
    } else {
      const auto c = lag_one_config(a.n, a.seed);
      panel = simulate_sem(build_sim_model(c, reference_network()), c);
    }
    CITestConfig ci;
    ci.alpha_ci = a.eng.alpha_ci;
    const auto sel = lag_aic(panel, a.lmax, ci);
    auto out = open_out(dir / (stem + "_table.csv"));
    write_lag_csv(out, sel);
    write_manifest(dir, cmd, a.seed, {{"selected_L", sel.chosen_L}});
    write_lag_csv(std::cout, sel);
    return kOk;
  }

  const auto kind = parse_study(a.study);
  StudySettings s;
  if (!a.levels.empty()) s.levels = a.levels;
  if (!a.methods.empty()) s.methods = parse_methods(a.methods);
  for (double al : a.alphas) require_alpha(al);
  s.alphas = a.alphas;
  s.reps = a.reps;
  s.train = a.train;
  s.test = a.test;
  s.engine = engine_config(a.eng);
  s.seed = a.seed;
  s.jobs = a.jobs > 0 ? a.jobs : default_jobs();
  const auto res = run_study(kind, s);
  {
    auto out = open_out(dir / (stem + "_table.csv"));
    write_study_table_csv(out, res);
  }
  {
    auto out = open_out(dir / (stem + "_trace.csv"));
    write_study_trace_csv(out, res);
  }
  if (kind == StudyKind::baseline) {
    for (double al : res.alphas) {
      std::vector<AggregateRow> rows;
      for (const auto& r : res.table)
        if (r.alpha == al) rows.push_back(r.agg);
      auto out = open_out(dir / (stem + "_comparison_alpha" + format_number(al) + ".csv"));
      write_aggregate_csv(out, rows);
      if (al == res.alphas.front()) write_aggregate_csv(std::cout, rows);
    }
  } else {
    write_study_table_csv(std::cout, res);
  }
  write_manifest(dir, cmd, a.seed, {{"notes", res.notes}, {"failures", res.failures.size()}});
  for (const auto& n : res.notes) std::cerr << "note: " << n << '\n';
  return res.failures.empty() ? kOk : kPartial;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal network contagion VaR toolkit"};
  app.set_version_flag("--version", kVersion);
  app.set_config("--config", "", "INI/TOML config file (command-line flags take precedence)");
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Simulate a contagion network and return panel");
  c_sim->add_option("--p", sim.p, "Number of instruments")->check(CLI::PositiveNumber);
  c_sim->add_option("--density", sim.density, "Edge probability of the random DAG");
  c_sim->add_option("--edges", sim.edges, "Exact number of edges (overrides --density)");
  c_sim->add_option("--graph", sim.graph, "random or reference (five-node network)")->check(CLI::IsMember({"random", "reference"}));
  c_sim->add_option("--necof", sim.necof, "Target market NECOF in [0,1); negative keeps raw coefficients");
  c_sim->add_option("--L", sim.L, "Own-lag order")->check(CLI::NonNegativeNumber);
  c_sim->add_option("--ar", sim.ar, "Own-lag coefficients drawn in [-ar, ar]")->check(CLI::Range(0.0, 0.99));
  c_sim->add_option("--noise", sim.noise, "gaussian or exponential")->check(CLI::IsMember({"gaussian", "exponential"}));
  c_sim->add_option("--sigma", sim.sigma, "Noise standard deviation");
  c_sim->add_option("--shock-every", sim.shock_every, "Shock period in rows (0: none)")->check(CLI::NonNegativeNumber);
  c_sim->add_option("--shock-scale", sim.shock_scale, "Shock size in noise standard deviations");
  c_sim->add_option("--n", sim.n, "Rows kept after burn-in")->check(CLI::PositiveNumber);
  c_sim->add_option("--burn-in", sim.burn_in, "Discarded initial rows")->check(CLI::NonNegativeNumber);
  c_sim->add_option("--seed", sim.seed, "Random seed");
  c_sim->add_option("-o,--out", sim.out, "Output directory");

  DiscoverArgs dis;
  auto* c_dis = app.add_subcommand("discover", "Estimate the contagion CPDAG with PC-stable");
  add_panel_options(c_dis, dis.in);
  add_engine_options(c_dis, dis.eng);
  c_dis->add_option("-o,--out", dis.out, "Output directory");

  FitArgs fit;
  auto* c_fit = app.add_subcommand("fit", "Fit the SEM (range ensemble) on a panel");
  add_panel_options(c_fit, fit.in);
  add_engine_options(c_fit, fit.eng);
  c_fit->add_option("--graph", fit.graph, "Graph JSON (default: discover from the panel)");
  c_fit->add_option("--lmax", fit.lmax, "Select L by AIC over 0..lmax (-1: use --lags)");
  c_fit->add_option("-o,--out", fit.out, "Output directory");

  ForecastArgs fc;
  auto* c_fc = app.add_subcommand("forecast", "One-step-ahead VaR forecasts");
  add_panel_options(c_fc, fc.in);
  add_engine_options(c_fc, fc.eng);
  c_fc->add_option("--train", fc.train, "Training rows")->check(CLI::PositiveNumber);
  c_fc->add_option("--test", fc.test, "Trailing rows forecast with realised history")->check(CLI::NonNegativeNumber);
  c_fc->add_option("--alpha", fc.alphas, "VaR level(s)")->delimiter(',');
  c_fc->add_option("--methods", fc.methods, "Methods")->delimiter(',');
  c_fc->add_option("--seed", fc.seed, "Random seed");
  c_fc->add_option("-o,--out", fc.out, "Output directory");

  BacktestArgs bt;
  auto* c_bt = app.add_subcommand("backtest", "Rolling-window backtest of VaR methods");
  add_panel_options(c_bt, bt.in);
  add_engine_options(c_bt, bt.eng);
  c_bt->add_option("--train", bt.train, "Training rows per window");
  c_bt->add_option("--test", bt.test, "Out-of-sample rows per window");
  c_bt->add_option("--stride", bt.stride, "Window advance (0: equal to --test)")->check(CLI::NonNegativeNumber);
  c_bt->add_option("--alpha", bt.alpha, "VaR level");
  c_bt->add_option("--methods", bt.methods, "Methods")->delimiter(',');
  c_bt->add_option("--seed", bt.seed, "Random seed");
  c_bt->add_option("--jobs", bt.jobs, "Worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
  c_bt->add_option("-o,--out", bt.out, "Output directory");

  CompareArgs cmp;
  auto* c_cmp = app.add_subcommand("compare", "Score external VaR forecasts against a panel");
  add_panel_options(c_cmp, cmp.in);
  c_cmp->add_option("--forecasts", cmp.forecasts, "CSV with time,instrument,method,alpha,var")->required();
  c_cmp->add_option("--dq-lags", cmp.dq_lags, "Lagged hits in the DQ regression")->check(CLI::Range(0, 50));
  c_cmp->add_option("-o,--out", cmp.out, "Output directory");

  ReproduceArgs rp;
  auto* c_rp = app.add_subcommand("reproduce", "Run a simulation study");
  c_rp->add_option("study", rp.study, "baseline, window, size, contagion, volatility, timing or lag-aic")->required();
  add_engine_options(c_rp, rp.eng);
  c_rp->add_option("--reps", rp.reps, "Replications per level")->check(CLI::PositiveNumber);
  c_rp->add_option("--levels", rp.levels, "Override the swept levels")->delimiter(',');
  c_rp->add_option("--alpha", rp.alphas, "VaR level(s)")->delimiter(',');
  c_rp->add_option("--methods", rp.methods, "Methods")->delimiter(',');
  c_rp->add_option("--train", rp.train, "Training rows")->check(CLI::PositiveNumber);
  c_rp->add_option("--test", rp.test, "Out-of-sample rows")->check(CLI::PositiveNumber);
  c_rp->add_option("--p-values", rp.p_values, "Network sizes for the timing study")->delimiter(',');
  c_rp->add_option("--lmax", rp.lmax, "Largest lag for lag-aic")->check(CLI::NonNegativeNumber);
  c_rp->add_option("--n", rp.n, "Simulated rows for lag-aic")->check(CLI::PositiveNumber);
  c_rp->add_option("--input", rp.input, "Panel CSV for lag-aic (default: simulated)");
  c_rp->add_option("--mode", rp.mode, "Input cells: returns or prices");
  c_rp->add_option("--seed", rp.seed, "Master seed");
  c_rp->add_option("--jobs", rp.jobs, "Worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
  c_rp->add_option("-o,--out", rp.out, "Output directory (default: study_<name>)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (c_sim->parsed()) return cmd_simulate(c_sim, sim);
    if (c_dis->parsed()) return cmd_discover(c_dis, dis);
    if (c_fit->parsed()) return cmd_fit(c_fit, fit);
    if (c_fc->parsed()) return cmd_forecast(c_fc, fc);
    if (c_bt->parsed()) return cmd_backtest(c_bt, bt);
    if (c_cmp->parsed()) return cmd_compare(c_cmp, cmp);
    if (c_rp->parsed()) return cmd_reproduce(c_rp, rp);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const DomainError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const WindowError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const CalibrationError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const InsufficientData& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const DegenerateSeries& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const InvalidSample& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}
