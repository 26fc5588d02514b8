#ifndef NECO_CAUSAL_DISCOVERY_HPP
#define NECO_CAUSAL_DISCOVERY_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "neco/copula.hpp"
#include "neco/errors.hpp"
#include "neco/normal.hpp"

namespace neco {

using NodePair = std::pair<int, int>;

inline NodePair unordered_pair(int a, int b) { return a < b ? NodePair{a, b} : NodePair{b, a}; }

// Partially directed graph over p instruments. Directed edges are stored as
// (from, to); undirected edges as (min, max).
struct CausalGraph {
  int p = 0;
  std::vector<std::string> labels;
  std::set<NodePair> directed;
  std::set<NodePair> undirected;
  std::map<NodePair, std::vector<int>> sepsets;
  std::vector<std::string> diagnostics;

  bool has_directed(int from, int to) const { return directed.count({from, to}) > 0; }
  bool has_undirected(int a, int b) const { return undirected.count(unordered_pair(a, b)) > 0; }
  bool adjacent(int a, int b) const { return has_directed(a, b) || has_directed(b, a) || has_undirected(a, b); }
  std::size_t edge_count() const { return directed.size() + undirected.size(); }
  bool fully_directed() const { return undirected.empty(); }

  std::vector<int> parents(int node) const {
    std::vector<int> out;
    for (const auto& [from, to] : directed)
      if (to == node) out.push_back(from);
    return out;
  }

  std::vector<int> undirected_neighbors(int node) const {
    std::vector<int> out;
    for (const auto& [a, b] : undirected) {
      if (a == node) out.push_back(b);
      if (b == node) out.push_back(a);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  std::set<NodePair> skeleton() const {
    std::set<NodePair> out(undirected);
    for (const auto& [a, b] : directed) out.insert(unordered_pair(a, b));
    return out;
  }

  // Kahn's algorithm on the directed part.
  bool directed_acyclic() const {
    std::vector<int> indeg(static_cast<std::size_t>(p), 0);
    for (const auto& e : directed) ++indeg[static_cast<std::size_t>(e.second)];
    std::vector<int> stack;
    for (int i = 0; i < p; ++i)
      if (indeg[static_cast<std::size_t>(i)] == 0) stack.push_back(i);
    int seen = 0;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      ++seen;
      for (const auto& [from, to] : directed) {
        if (from == v && --indeg[static_cast<std::size_t>(to)] == 0) stack.push_back(to);
      }
    }
    return seen == p;
  }
};

struct CITestConfig {
  double alpha_ci = 0.01;
  std::optional<int> max_cond_size;
};

struct CITestResult {
  bool independent = false;
  double statistic = 0.0;
  double pvalue = 1.0;
  double partial_correlation = 0.0;
};

inline Matrix correlation_matrix(const Matrix& x) {
  const Matrix centered = x.rowwise() - x.colwise().mean();
  const Matrix cov = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
  const Vector inv_sd = cov.diagonal().array().sqrt().inverse();
  return inv_sd.asDiagonal() * cov * inv_sd.asDiagonal();
}

// Partial correlation of (i, j) given S from the inverse of the correlation
// submatrix over {i, j} u S.
inline double partial_correlation(const Matrix& corr, int i, int j, const std::vector<int>& cond) {
  const auto k = static_cast<Eigen::Index>(cond.size() + 2);
  std::vector<int> idx{i, j};
  idx.insert(idx.end(), cond.begin(), cond.end());
  Matrix sub(k, k);
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b) sub(a, b) = corr(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
  if (cond.empty()) return sub(0, 1);
  Eigen::LDLT<Matrix> ldlt(sub);
  const Vector d = ldlt.vectorD();
  if (ldlt.info() != Eigen::Success || !(d.minCoeff() > 1e-12 * std::max(1.0, d.maxCoeff()))) {
    throw NumericalError("singular correlation submatrix in partial-correlation test");
  }
  const Matrix prec = ldlt.solve(Matrix::Identity(k, k));
  return -prec(0, 1) / std::sqrt(prec(0, 0) * prec(1, 1));
}

// Fisher-z test of r_{ij.S} = 0 at level alpha_ci.
inline CITestResult fisher_z_ci_test(const Matrix& corr, int i, int j, const std::vector<int>& cond, int n,
                                     double alpha_ci) {
  const int dof = n - static_cast<int>(cond.size()) - 3;
  if (dof < 1) throw InsufficientData("Fisher-z test needs n - |S| - 3 >= 1");
  CITestResult res;
  double r = partial_correlation(corr, i, j, cond);
  res.partial_correlation = r;
  r = std::clamp(r, -1.0 + 1e-15, 1.0 - 1e-15);
  res.statistic = std::sqrt(static_cast<double>(dof)) * std::fabs(std::atanh(r));
  res.pvalue = 2.0 * standard_normal_cdf(-res.statistic);
  res.independent = res.statistic <= standard_normal_quantile(1.0 - alpha_ci / 2.0);
  return res;
}

struct Skeleton {
  int p = 0;
  std::set<NodePair> edges;
  std::map<NodePair, std::vector<int>> sepsets;
  long tests = 0;
};

namespace detail {

// Calls f(subset) for every size-k subset of `pool` in lexicographic order;
// stops early when f returns true.
template <class F>
bool for_each_subset(const std::vector<int>& pool, int k, F&& f) {
  const int n = static_cast<int>(pool.size());
  if (k > n) return false;
  std::vector<int> pick(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) pick[static_cast<std::size_t>(i)] = i;
  std::vector<int> subset(static_cast<std::size_t>(k));
  while (true) {
    for (int i = 0; i < k; ++i) subset[static_cast<std::size_t>(i)] = pool[static_cast<std::size_t>(pick[static_cast<std::size_t>(i)])];
    if (f(subset)) return true;
    int i = k - 1;
    while (i >= 0 && pick[static_cast<std::size_t>(i)] == n - k + i) --i;
    if (i < 0) return false;
    ++pick[static_cast<std::size_t>(i)];
    for (int m = i + 1; m < k; ++m) pick[static_cast<std::size_t>(m)] = pick[static_cast<std::size_t>(m - 1)] + 1;
  }
}

}  // namespace detail

// PC-stable skeleton search from a correlation matrix. Adjacency sets are
// frozen at the start of every level, so the removed edges do not depend on
// the order in which pairs are visited.
inline Skeleton pc_stable_skeleton(const Matrix& corr, int n, const CITestConfig& cfg) {
  if (!(cfg.alpha_ci > 0.0 && cfg.alpha_ci < 1.0)) throw DomainError("alpha_ci must lie in (0,1)");
  const int p = static_cast<int>(corr.rows());
  std::vector<std::vector<char>> adj(static_cast<std::size_t>(p), std::vector<char>(static_cast<std::size_t>(p), 1));
  for (int i = 0; i < p; ++i) adj[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 0;

  Skeleton out;
  out.p = p;
  for (int level = 0;; ++level) {
    if (cfg.max_cond_size && level > *cfg.max_cond_size) break;
    if (n - level - 3 < 1) break;
    std::vector<std::vector<int>> frozen(static_cast<std::size_t>(p));
    bool any_candidate = false;
    for (int i = 0; i < p; ++i) {
      for (int j = 0; j < p; ++j)
        if (adj[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) frozen[static_cast<std::size_t>(i)].push_back(j);
      if (static_cast<int>(frozen[static_cast<std::size_t>(i)].size()) - 1 >= level) any_candidate = true;
    }
    if (!any_candidate) break;

    for (int i = 0; i < p; ++i) {
      for (int j : frozen[static_cast<std::size_t>(i)]) {
        if (!adj[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) continue;
        std::vector<int> pool;
        for (int k : frozen[static_cast<std::size_t>(i)])
          if (k != j) pool.push_back(k);
        if (static_cast<int>(pool.size()) < level) continue;
        detail::for_each_subset(pool, level, [&](const std::vector<int>& cond) {
          ++out.tests;
          if (fisher_z_ci_test(corr, i, j, cond, n, cfg.alpha_ci).independent) {
            adj[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = 0;
            adj[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = 0;
            out.sepsets[unordered_pair(i, j)] = cond;
            return true;
          }
          return false;
        });
      }
    }
  }
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j)
      if (adj[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) out.edges.insert({i, j});
  return out;
}

inline Skeleton pc_stable_skeleton(const LatentPanel& latent, const CITestConfig& cfg) {
  if (latent.rows() <= latent.cols() + 3) {
    throw InsufficientData("skeleton search needs N > p + 3");
  }
  return pc_stable_skeleton(correlation_matrix(latent.values), latent.rows(), cfg);
}

namespace detail {

// Working representation for orientation: m[a][b] = 1 marks an edge mark at b
// seen from a. a->b is m[a][b]=1, m[b][a]=0; a-b is both 1.
class Pdag {
 public:
  explicit Pdag(int p) : p_(p), m_(static_cast<std::size_t>(p * p), 0) {}

  int p() const { return p_; }
  bool edge(int a, int b) const { return m_[idx(a, b)] != 0; }
  bool adjacent(int a, int b) const { return edge(a, b) || edge(b, a); }
  bool undirected(int a, int b) const { return edge(a, b) && edge(b, a); }
  bool directed(int a, int b) const { return edge(a, b) && !edge(b, a); }

  void set_undirected(int a, int b) { m_[idx(a, b)] = m_[idx(b, a)] = 1; }
  void orient(int from, int to) {
    m_[idx(from, to)] = 1;
    m_[idx(to, from)] = 0;
  }

  // True if `to` reaches `from` through directed edges, i.e. from->to would close a cycle.
  bool creates_cycle(int from, int to) const {
    std::vector<char> seen(static_cast<std::size_t>(p_), 0);
    std::vector<int> stack{to};
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      if (v == from) return true;
      if (seen[static_cast<std::size_t>(v)]) continue;
      seen[static_cast<std::size_t>(v)] = 1;
      for (int w = 0; w < p_; ++w)
        if (directed(v, w)) stack.push_back(w);
    }
    return false;
  }

 private:
  std::size_t idx(int a, int b) const { return static_cast<std::size_t>(a * p_ + b); }
  int p_;
  std::vector<char> m_;
};

inline bool try_orient(Pdag& g, int from, int to, std::vector<std::string>& diagnostics, const char* rule) {
  if (!g.undirected(from, to)) return false;
  if (g.creates_cycle(from, to)) {
    diagnostics.push_back(std::string(rule) + ": skipped " + std::to_string(from) + "->" + std::to_string(to) +
                          " (would create a directed cycle)");
    return false;
  }
  g.orient(from, to);
  return true;
}

// One sweep of Meek's rules 1-4; returns true if anything was oriented.
inline bool meek_sweep(Pdag& g, std::vector<std::string>& diag) {
  const int p = g.p();
  bool changed = false;
  for (int b = 0; b < p; ++b) {
    for (int c = 0; c < p; ++c) {
      if (b == c || !g.undirected(b, c)) continue;
      // Rule 1: a->b, b-c, a and c nonadjacent => b->c.
      for (int a = 0; a < p; ++a) {
        if (a != c && g.directed(a, b) && !g.adjacent(a, c)) {
          if (try_orient(g, b, c, diag, "R1")) {
            changed = true;
            break;
          }
        }
      }
    }
  }
  for (int a = 0; a < p; ++a) {
    for (int b = 0; b < p; ++b) {
      if (a == b || !g.undirected(a, b)) continue;
      // Rule 2: a->c->b with a-b => a->b.
      for (int c = 0; c < p; ++c) {
        if (g.directed(a, c) && g.directed(c, b)) {
          if (try_orient(g, a, b, diag, "R2")) changed = true;
          break;
        }
      }
    }
  }
  for (int a = 0; a < p; ++a) {
    for (int b = 0; b < p; ++b) {
      if (a == b || !g.undirected(a, b)) continue;
      // Rule 3: a-c->b, a-d->b, c and d nonadjacent => a->b.
      bool done = false;
      for (int c = 0; c < p && !done; ++c) {
        if (!(g.undirected(a, c) && g.directed(c, b))) continue;
        for (int d = c + 1; d < p && !done; ++d) {
          if (g.undirected(a, d) && g.directed(d, b) && !g.adjacent(c, d)) {
            if (try_orient(g, a, b, diag, "R3")) changed = true;
            done = true;
          }
        }
      }
    }
  }
  for (int a = 0; a < p; ++a) {
    for (int b = 0; b < p; ++b) {
      if (a == b || !g.undirected(a, b)) continue;
      // Rule 4: a-c, c->d->b, a adjacent to d, c and b nonadjacent => a->b.
      bool done = false;
      for (int c = 0; c < p && !done; ++c) {
        if (c == b || !g.undirected(a, c) || g.adjacent(c, b)) continue;
        for (int d = 0; d < p && !done; ++d) {
          if (d != a && g.directed(c, d) && g.directed(d, b) && g.adjacent(a, d)) {
            if (try_orient(g, a, b, diag, "R4")) changed = true;
            done = true;
          }
        }
      }
    }
  }
  return changed;
}

}  // namespace detail

// Orients a skeleton into a CPDAG: v-structures i->k<-j for unshielded triples
// with k outside sepset(i,j), then Meek rules to closure. An edge that two
// v-structures want in opposite directions stays undirected.
inline CausalGraph orient_cpdag(const Skeleton& skel, std::vector<std::string> labels = {}) {
  const int p = skel.p;
  detail::Pdag g(p);
  for (const auto& [a, b] : skel.edges) g.set_undirected(a, b);

  std::vector<std::string> diag;
  std::map<NodePair, std::set<NodePair>> requests;  // unordered edge -> requested (from,to)
  for (int k = 0; k < p; ++k) {
    for (int i = 0; i < p; ++i) {
      if (i == k || !g.adjacent(i, k)) continue;
      for (int j = i + 1; j < p; ++j) {
        if (j == k || !g.adjacent(j, k) || g.adjacent(i, j)) continue;
        const auto it = skel.sepsets.find(unordered_pair(i, j));
        const bool in_sepset = it != skel.sepsets.end() &&
                               std::find(it->second.begin(), it->second.end(), k) != it->second.end();
        if (in_sepset) continue;
        requests[unordered_pair(i, k)].insert({i, k});
        requests[unordered_pair(j, k)].insert({j, k});
      }
    }
  }
  for (const auto& [edge, dirs] : requests) {
    if (dirs.size() > 1) {
      diag.push_back("conflicting v-structure orientations on " + std::to_string(edge.first) + "-" +
                     std::to_string(edge.second) + "; left undirected");
      continue;
    }
    const auto [from, to] = *dirs.begin();
    detail::try_orient(g, from, to, diag, "v-structure");
  }
  while (detail::meek_sweep(g, diag)) {
  }

  CausalGraph out;
  out.p = p;
  out.labels = labels.empty() ? std::vector<std::string>{} : std::move(labels);
  if (out.labels.empty())
    for (int i = 0; i < p; ++i) out.labels.push_back("X" + std::to_string(i + 1));
  for (int a = 0; a < p; ++a) {
    for (int b = 0; b < p; ++b) {
      if (g.directed(a, b)) out.directed.insert({a, b});
      if (a < b && g.undirected(a, b)) out.undirected.insert({a, b});
    }
  }
  out.sepsets = skel.sepsets;
  out.diagnostics = std::move(diag);
  return out;
}

// Skeleton search and orientation on a latent panel.
inline CausalGraph discover(const LatentPanel& latent, const CITestConfig& cfg) {
  return orient_cpdag(pc_stable_skeleton(latent, cfg), latent.instruments);
}

// Locally valid parent sets of `node`: the directed parents plus any subset of
// undirected neighbours that does not form a new v-structure at `node`.
inline std::vector<std::vector<int>> enumerate_parent_sets(const CausalGraph& g, int node) {
  std::vector<int> fixed = g.parents(node);
  std::sort(fixed.begin(), fixed.end());
  const std::vector<int> nbrs = g.undirected_neighbors(node);
  std::vector<std::vector<int>> out;
  const std::size_t m = nbrs.size();
  for (std::size_t mask = 0; mask < (std::size_t{1} << m); ++mask) {
    std::vector<int> extra;
    for (std::size_t b = 0; b < m; ++b)
      if (mask & (std::size_t{1} << b)) extra.push_back(nbrs[b]);
    bool ok = true;
    for (std::size_t a = 0; a < extra.size() && ok; ++a) {
      for (std::size_t b = a + 1; b < extra.size() && ok; ++b) ok = g.adjacent(extra[a], extra[b]);
      for (int f : fixed)
        if (ok) ok = g.adjacent(extra[a], f);
    }
    if (!ok) continue;
    std::vector<int> set = fixed;
    set.insert(set.end(), extra.begin(), extra.end());
    std::sort(set.begin(), set.end());
    out.push_back(std::move(set));
  }
  return out;
}

// A DAG in the class of a CPDAG (Dor-Tarsi). Falls back to orienting the
// remaining undirected edges along a topological order of the directed part
// when the input is not extendable, which can happen with sampling errors.
inline CausalGraph dag_extension(const CausalGraph& cpdag) {
  const int p = cpdag.p;
  detail::Pdag work(p);
  for (const auto& [a, b] : cpdag.undirected) work.set_undirected(a, b);
  for (const auto& [a, b] : cpdag.directed) work.orient(a, b);

  CausalGraph out = cpdag;
  out.undirected.clear();
  out.directed = cpdag.directed;
  std::vector<char> removed(static_cast<std::size_t>(p), 0);
  int remaining = p;
  bool extendable = true;
  while (remaining > 0) {
    int sink = -1;
    for (int x = 0; x < p && sink < 0; ++x) {
      if (removed[static_cast<std::size_t>(x)]) continue;
      bool has_out = false;
      for (int y = 0; y < p; ++y)
        if (!removed[static_cast<std::size_t>(y)] && work.directed(x, y)) has_out = true;
      if (has_out) continue;
      bool ok = true;
      for (int y = 0; y < p && ok; ++y) {
        if (removed[static_cast<std::size_t>(y)] || !work.undirected(x, y)) continue;
        for (int z = 0; z < p && ok; ++z) {
          if (z == y || z == x || removed[static_cast<std::size_t>(z)] || !work.adjacent(x, z)) continue;
          ok = work.adjacent(y, z);
        }
      }
      if (ok) sink = x;
    }
    if (sink < 0) {
      extendable = false;
      break;
    }
    for (int y = 0; y < p; ++y) {
      if (!removed[static_cast<std::size_t>(y)] && work.undirected(sink, y)) out.directed.insert({y, sink});
    }
    removed[static_cast<std::size_t>(sink)] = 1;
    --remaining;
  }
  if (extendable) return out;

  // Topological order of the directed part, then orient along it.
  out.directed = cpdag.directed;
  std::vector<int> indeg(static_cast<std::size_t>(p), 0), order;
  for (const auto& e : cpdag.directed) ++indeg[static_cast<std::size_t>(e.second)];
  std::vector<char> done(static_cast<std::size_t>(p), 0);
  for (int step = 0; step < p; ++step) {
    for (int v = 0; v < p; ++v) {
      if (done[static_cast<std::size_t>(v)] || indeg[static_cast<std::size_t>(v)] != 0) continue;
      done[static_cast<std::size_t>(v)] = 1;
      order.push_back(v);
      for (const auto& [from, to] : cpdag.directed)
        if (from == v) --indeg[static_cast<std::size_t>(to)];
      break;
    }
  }
  std::vector<int> rank(static_cast<std::size_t>(p), 0);
  for (std::size_t k = 0; k < order.size(); ++k) rank[static_cast<std::size_t>(order[k])] = static_cast<int>(k);
  for (const auto& [a, b] : cpdag.undirected) {
    if (rank[static_cast<std::size_t>(a)] < rank[static_cast<std::size_t>(b)]) out.directed.insert({a, b});
    else out.directed.insert({b, a});
  }
  out.diagnostics.push_back("CPDAG not extendable; undirected edges oriented by topological order");
  return out;
}

// CPDAG of a DAG: keep its skeleton and v-structures, then close under Meek's rules.
inline CausalGraph cpdag_of_dag(const CausalGraph& dag) {
  Skeleton skel;
  skel.p = dag.p;
  skel.edges = dag.skeleton();
  // A pair is unshielded-separated by the parents of either endpoint; using the
  // union of both endpoints' parents never contains a common child.
  for (int i = 0; i < dag.p; ++i) {
    for (int j = i + 1; j < dag.p; ++j) {
      if (dag.adjacent(i, j)) continue;
      std::vector<int> s = dag.parents(i);
      for (int v : dag.parents(j)) s.push_back(v);
      std::sort(s.begin(), s.end());
      s.erase(std::unique(s.begin(), s.end()), s.end());
      skel.sepsets[{i, j}] = s;
    }
  }
  return orient_cpdag(skel, dag.labels);
}

}  // namespace neco

#endif  // NECO_CAUSAL_DISCOVERY_HPP
