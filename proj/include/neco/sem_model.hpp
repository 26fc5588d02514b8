#ifndef NECO_SEM_MODEL_HPP
#define NECO_SEM_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "neco/causal_discovery.hpp"
#include "neco/copula.hpp"
#include "neco/errors.hpp"

namespace neco {

// Linear SEM with own-lag autoregression and contemporaneous contagion:
//   X_t = (I - B)^{-1} (alpha0 + A . X_{t-1:t-L} + eps_t),  eps_t ~ N(0, diag(sigma2)).
// B(i, j) is the effect of instrument j on instrument i.
struct SemModel {
  std::vector<std::string> labels;
  int L = 0;
  Vector alpha0;
  Matrix A;  // p x L, column l-1 holds the lag-l coefficient
  Matrix B;  // p x p, zero diagonal
  Vector sigma2;
  CausalGraph graph;

  int p() const { return static_cast<int>(alpha0.size()); }
};

struct ModelEnsemble {
  std::vector<SemModel> models;
  int primary_index = 0;

  const SemModel& primary() const { return models[static_cast<std::size_t>(primary_index)]; }
};

// Whether the latent conditional covariance uses the fitted noise variances or
// unit noise as in the copula VaR formula written with (I-B)^{-1}(I-B)^{-T}.
enum class NoiseMode { estimated, unit };

struct LagCandidate {
  int L = 0;
  int k = 0;
  double loglik = 0.0;
  double aic = 0.0;
};

struct LagSelection {
  std::vector<LagCandidate> candidates;
  int chosen_L = 0;
};

inline Matrix identity_minus(const Matrix& B) { return Matrix::Identity(B.rows(), B.cols()) - B; }

// (I - B)^{-1}. B's support is acyclic, so I - B is a permuted triangular
// matrix with unit diagonal and always invertible.
inline Matrix contagion_inverse(const Matrix& B) {
  return identity_minus(B).partialPivLu().inverse();
}

inline bool support_acyclic(const Matrix& B) {
  const auto p = B.rows();
  std::vector<int> indeg(static_cast<std::size_t>(p), 0);
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < p; ++j)
      if (i != j && B(i, j) != 0.0) ++indeg[static_cast<std::size_t>(i)];
  std::vector<char> done(static_cast<std::size_t>(p), 0);
  for (Eigen::Index round = 0; round < p; ++round) {
    Eigen::Index next = -1;
    for (Eigen::Index v = 0; v < p && next < 0; ++v)
      if (!done[static_cast<std::size_t>(v)] && indeg[static_cast<std::size_t>(v)] == 0) next = v;
    if (next < 0) return false;
    done[static_cast<std::size_t>(next)] = 1;
    for (Eigen::Index i = 0; i < p; ++i)
      if (i != next && B(i, next) != 0.0) --indeg[static_cast<std::size_t>(i)];
  }
  return true;
}

// Topological order of the instruments under B (parents first).
inline std::vector<int> topological_order(const Matrix& B) {
  const auto p = static_cast<int>(B.rows());
  std::vector<int> indeg(static_cast<std::size_t>(p), 0), order;
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j)
      if (i != j && B(i, j) != 0.0) ++indeg[static_cast<std::size_t>(i)];
  std::vector<char> done(static_cast<std::size_t>(p), 0);
  while (static_cast<int>(order.size()) < p) {
    int next = -1;
    for (int v = 0; v < p && next < 0; ++v)
      if (!done[static_cast<std::size_t>(v)] && indeg[static_cast<std::size_t>(v)] == 0) next = v;
    if (next < 0) throw NumericalError("contagion matrix support is cyclic");
    done[static_cast<std::size_t>(next)] = 1;
    order.push_back(next);
    for (int i = 0; i < p; ++i)
      if (i != next && B(i, next) != 0.0) --indeg[static_cast<std::size_t>(i)];
  }
  return order;
}

namespace detail {

struct NodeFit {
  double intercept = 0.0;
  std::vector<double> lags;
  std::vector<double> betas;  // aligned with the parent set
  double rss = 0.0;
  int n_eff = 0;
  int k = 0;
};

// OLS of Z_{i,t} on [1, Z_{i,t-1..t-L}, Z_{parents,t}] over rows first_row..N-1.
inline NodeFit fit_node(const Matrix& z, int node, const std::vector<int>& parents, int L, int first_row) {
  const int n = static_cast<int>(z.rows()) - first_row;
  const int k = 1 + L + static_cast<int>(parents.size());
  if (k >= n) {
    throw NumericalError("node " + std::to_string(node) + ": " + std::to_string(k) + " regressors for " +
                         std::to_string(n) + " observations");
  }
  Matrix X(n, k);
  Vector y(n);
  for (int r = 0; r < n; ++r) {
    const int t = first_row + r;
    y(r) = z(t, node);
    X(r, 0) = 1.0;
    for (int l = 1; l <= L; ++l) X(r, l) = z(t - l, node);
    for (std::size_t q = 0; q < parents.size(); ++q) X(r, 1 + L + static_cast<int>(q)) = z(t, parents[q]);
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < k) {
    throw NumericalError("rank-deficient regressor matrix for node " + std::to_string(node));
  }
  const Vector coef = qr.solve(y);
  NodeFit f;
  f.intercept = coef(0);
  for (int l = 1; l <= L; ++l) f.lags.push_back(coef(l));
  for (std::size_t q = 0; q < parents.size(); ++q) f.betas.push_back(coef(1 + L + static_cast<int>(q)));
  f.rss = (y - X * coef).squaredNorm();
  f.n_eff = n;
  f.k = k;
  return f;
}

using ParentAssignment = std::vector<std::vector<int>>;

inline bool assignment_acyclic(const ParentAssignment& pa) {
  const auto p = static_cast<Eigen::Index>(pa.size());
  Matrix B = Matrix::Zero(p, p);
  for (Eigen::Index i = 0; i < p; ++i)
    for (int j : pa[static_cast<std::size_t>(i)]) B(i, j) = 1.0;
  return support_acyclic(B);
}

inline ParentAssignment parents_of(const CausalGraph& dag) {
  ParentAssignment pa(static_cast<std::size_t>(dag.p));
  for (int i = 0; i < dag.p; ++i) {
    pa[static_cast<std::size_t>(i)] = dag.parents(i);
    std::sort(pa[static_cast<std::size_t>(i)].begin(), pa[static_cast<std::size_t>(i)].end());
  }
  return pa;
}

inline CausalGraph graph_of(const CausalGraph& like, const ParentAssignment& pa) {
  CausalGraph g;
  g.p = like.p;
  g.labels = like.labels;
  g.sepsets = like.sepsets;
  for (int i = 0; i < like.p; ++i)
    for (int j : pa[static_cast<std::size_t>(i)]) g.directed.insert({j, i});
  return g;
}

}  // namespace detail

inline constexpr std::size_t kMaxEnsembleModels = 64;

// Parent assignments for the ensemble. The first entry is a DAG extension of
// the CPDAG; the rest come from a depth-first walk over each node's locally
// valid parent sets, pruned so every undirected edge is oriented exactly one
// way, keeping acyclic results. This lists the Markov equivalence class up to
// kMaxEnsembleModels members.
inline std::vector<detail::ParentAssignment> ensemble_assignments(const CausalGraph& cpdag) {
  using detail::ParentAssignment;
  const ParentAssignment base = detail::parents_of(dag_extension(cpdag));
  std::vector<ParentAssignment> out{base};
  if (cpdag.fully_directed()) return out;

  const auto p = static_cast<std::size_t>(cpdag.p);
  std::vector<std::vector<std::vector<int>>> alts(p);
  std::vector<std::vector<int>> nbrs(p);
  for (std::size_t i = 0; i < p; ++i) {
    alts[i] = enumerate_parent_sets(cpdag, static_cast<int>(i));
    if (alts[i].empty()) alts[i].push_back(base[i]);
    nbrs[i] = cpdag.undirected_neighbors(static_cast<int>(i));
  }
  auto contains = [](const std::vector<int>& v, int x) { return std::find(v.begin(), v.end(), x) != v.end(); };

  ParentAssignment pa(p);
  long budget = 200000;
  auto walk = [&](auto&& self, std::size_t i) -> void {
    if (out.size() >= kMaxEnsembleModels || --budget < 0) return;
    if (i == p) {
      if (detail::assignment_acyclic(pa) && std::find(out.begin(), out.end(), pa) == out.end()) out.push_back(pa);
      return;
    }
    for (const auto& choice : alts[i]) {
      bool ok = true;
      for (int nb : nbrs[i]) {
        if (static_cast<std::size_t>(nb) >= i) continue;
        if (contains(choice, nb) == contains(pa[static_cast<std::size_t>(nb)], static_cast<int>(i))) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      pa[i] = choice;
      self(self, i + 1);
    }
  };
  walk(walk, 0);
  return out;
}

// Least-squares SEM fit on the latent scale, one model per parent assignment.
inline ModelEnsemble fit_sem(const Matrix& z, const std::vector<std::string>& labels, const CausalGraph& graph, int L) {
  if (L < 0) throw DomainError("lag order must be nonnegative");
  const int p = static_cast<int>(z.cols());
  if (graph.p != p) throw DomainError("graph and panel disagree on the number of instruments");
  std::map<std::pair<int, std::vector<int>>, detail::NodeFit> cache;
  auto node_fit = [&](int i, const std::vector<int>& parents) -> const detail::NodeFit& {
    const auto key = std::make_pair(i, parents);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, detail::fit_node(z, i, parents, L, L)).first;
    return it->second;
  };

  ModelEnsemble ens;
  for (const auto& pa : ensemble_assignments(graph)) {
    SemModel m;
    m.labels = labels;
    m.L = L;
    m.alpha0 = Vector::Zero(p);
    m.A = Matrix::Zero(p, L);
    m.B = Matrix::Zero(p, p);
    m.sigma2 = Vector::Zero(p);
    for (int i = 0; i < p; ++i) {
      const auto& parents = pa[static_cast<std::size_t>(i)];
      const auto& f = node_fit(i, parents);
      m.alpha0(i) = f.intercept;
      for (int l = 0; l < L; ++l) m.A(i, l) = f.lags[static_cast<std::size_t>(l)];
      for (std::size_t q = 0; q < parents.size(); ++q) m.B(i, parents[q]) = f.betas[q];
      m.sigma2(i) = f.rss / (f.n_eff - f.k);
      if (!(m.sigma2(i) > 0.0)) throw NumericalError("zero residual variance for node " + std::to_string(i));
    }
    m.graph = detail::graph_of(graph, pa);
    ens.models.push_back(std::move(m));
  }
  return ens;
}

inline ModelEnsemble fit_sem(const LatentPanel& latent, const CausalGraph& graph, int L) {
  return fit_sem(latent.values, latent.instruments, graph, L);
}

// AIC over lag orders 0..max_lag, all fitted on the common rows max_lag..N-1
// with the parent sets of a DAG extension of `graph`.
inline LagSelection select_lags(const Matrix& z, const CausalGraph& graph, int max_lag) {
  if (max_lag < 0) throw DomainError("max_lag must be nonnegative");
  const auto pa = detail::parents_of(dag_extension(graph));
  const int p = static_cast<int>(z.cols());
  LagSelection sel;
  double best = std::numeric_limits<double>::infinity();
  for (int L = 0; L <= max_lag; ++L) {
    LagCandidate c;
    c.L = L;
    double loglik = 0.0;
    int k = 0;
    for (int i = 0; i < p; ++i) {
      const auto f = detail::fit_node(z, i, pa[static_cast<std::size_t>(i)], L, max_lag);
      const double s2 = f.rss / f.n_eff;
      loglik += -0.5 * f.n_eff * (std::log(2.0 * std::numbers::pi * s2) + 1.0);
      k += f.k + 1;  // coefficients plus the noise variance
    }
    c.k = k;
    c.loglik = loglik;
    c.aic = 2.0 * k - 2.0 * loglik;
    if (c.aic < best) {
      best = c.aic;
      sel.chosen_L = L;
    }
    sel.candidates.push_back(c);
  }
  return sel;
}

inline LagSelection select_lags(const LatentPanel& latent, const CausalGraph& graph, int max_lag) {
  return select_lags(latent.values, graph, max_lag);
}

struct ConditionalMoments {
  Vector mean;
  Matrix cov;
};

// Own-lag contribution A . X_{t-1:t-L}; `history` holds the last L rows in
// chronological order (row L-1 is t-1).
inline Vector lag_term(const SemModel& m, const Eigen::Ref<const Matrix>& history) {
  if (history.rows() != m.L || history.cols() != m.p()) {
    throw DomainError("history must have exactly L rows and p columns");
  }
  Vector out = Vector::Zero(m.p());
  for (int l = 1; l <= m.L; ++l) out += m.A.col(l - 1).cwiseProduct(history.row(m.L - l).transpose());
  return out;
}

inline Matrix implied_covariance(const SemModel& m, NoiseMode mode = NoiseMode::estimated) {
  const Matrix inv = contagion_inverse(m.B);
  if (mode == NoiseMode::unit) return inv * inv.transpose();
  return inv * m.sigma2.asDiagonal() * inv.transpose();
}

// Distribution of X_t given the previous L rows.
inline ConditionalMoments conditional_distribution(const SemModel& m, const Eigen::Ref<const Matrix>& history,
                                                   NoiseMode mode = NoiseMode::estimated) {
  const Matrix inv = contagion_inverse(m.B);
  ConditionalMoments out;
  out.mean = inv * (m.alpha0 + lag_term(m, history));
  out.cov = mode == NoiseMode::unit ? Matrix(inv * inv.transpose()) : Matrix(inv * m.sigma2.asDiagonal() * inv.transpose());
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

struct Necof {
  Vector per_node;
  double market = 0.0;
};

// Share of conditional variance attributable to contagion:
// node i: 1 - Sigma_ii / V_ii, market: 1 - tr(Sigma) / tr(V), V = (I-B)^{-1} Sigma (I-B)^{-T}.
inline Necof necof(const Matrix& B, const Vector& sigma2) {
  const Matrix inv = contagion_inverse(B);
  const Matrix V = inv * sigma2.asDiagonal() * inv.transpose();
  Necof out;
  out.per_node = (1.0 - sigma2.array() / V.diagonal().array()).max(0.0).matrix();
  out.market = std::max(0.0, 1.0 - sigma2.sum() / V.trace());
  return out;
}

inline Necof necof(const SemModel& m) { return necof(m.B, m.sigma2); }

}  // namespace neco

#endif  // NECO_SEM_MODEL_HPP
