#pragma once

// Discrete optimal transport: the transportation simplex (spanning-tree bases,
// MODI potentials) and a brute-force vertex enumerator used as an oracle.
// The epsilon-optimal cost uses the threshold cost d_eps(x, y) = 1{|x - y| > eps}.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <queue>
#include <vector>

#include <Eigen/Dense>

#include "nsmix/errors.hpp"

namespace nsmix {

struct DiscreteMeasure {
  std::vector<Eigen::VectorXd> points;
  std::vector<double> weights;

  std::size_t size() const { return points.size(); }

  void validate() const {
    if (points.empty() || points.size() != weights.size()) {
      throw ValidationError("discrete measure: need matching, non-empty points and weights");
    }
    double s = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("discrete measure: weights must be non-negative");
      s += w;
    }
    if (std::abs(s - 1.0) > 1e-12) throw ValidationError("discrete measure: weights must sum to 1");
    for (const auto& p : points) {
      if (p.size() != points.front().size()) throw ValidationError("discrete measure: points of mixed dimension");
    }
  }

  /// Uniform measure on the given points.
  static DiscreteMeasure uniform(std::vector<Eigen::VectorXd> pts) {
    const double w = 1.0 / static_cast<double>(pts.size());
    DiscreteMeasure m{std::move(pts), {}};
    m.weights.assign(m.points.size(), w);
    return m;
  }
};

struct TransportResult {
  double cost = 0.0;        // primal value sum_ij pi_ij C_ij
  double dual = 0.0;        // sum_i a_i f_i - sum_j b_j g_j
  Eigen::MatrixXd plan;     // pi
  Eigen::VectorXd f;        // row potentials
  Eigen::VectorXd g;        // column potentials, f_i - g_j <= C_ij
  int pivots = 0;
};

namespace detail {

struct Cell {
  int i;
  int j;
};

/// Flows on a spanning-tree basis: peel leaves until every edge is fixed.
inline bool tree_flows(const std::vector<Cell>& basis, const std::vector<double>& a, const std::vector<double>& b,
                       std::vector<double>& x) {
  const int n = static_cast<int>(a.size()), k = static_cast<int>(b.size());
  std::vector<double> rem(static_cast<std::size_t>(n + k));
  for (int i = 0; i < n; ++i) rem[static_cast<std::size_t>(i)] = a[static_cast<std::size_t>(i)];
  for (int j = 0; j < k; ++j) rem[static_cast<std::size_t>(n + j)] = b[static_cast<std::size_t>(j)];
  std::vector<int> deg(static_cast<std::size_t>(n + k), 0);
  for (const auto& c : basis) {
    ++deg[static_cast<std::size_t>(c.i)];
    ++deg[static_cast<std::size_t>(n + c.j)];
  }
  x.assign(basis.size(), 0.0);
  std::vector<bool> done(basis.size(), false);
  std::queue<int> leaves;
  for (int v = 0; v < n + k; ++v) {
    if (deg[static_cast<std::size_t>(v)] == 1) leaves.push(v);
  }
  std::size_t fixed = 0;
  while (!leaves.empty() && fixed < basis.size()) {
    const int v = leaves.front();
    leaves.pop();
    if (deg[static_cast<std::size_t>(v)] != 1) continue;
    for (std::size_t e = 0; e < basis.size(); ++e) {
      if (done[e]) continue;
      const int r = basis[e].i, c = n + basis[e].j;
      if (r != v && c != v) continue;
      const int other = r == v ? c : r;
      x[e] = rem[static_cast<std::size_t>(v)];
      rem[static_cast<std::size_t>(other)] -= x[e];
      rem[static_cast<std::size_t>(v)] = 0.0;
      done[e] = true;
      ++fixed;
      --deg[static_cast<std::size_t>(v)];
      if (--deg[static_cast<std::size_t>(other)] == 1) leaves.push(other);
      break;
    }
  }
  return fixed == basis.size();
}

/// Potentials u_i + v_j = C_ij on the basis tree, u_0 = 0.
inline void tree_potentials(const std::vector<Cell>& basis, const Eigen::MatrixXd& C, std::vector<double>& u,
                            std::vector<double>& v) {
  const int n = static_cast<int>(C.rows()), k = static_cast<int>(C.cols());
  u.assign(static_cast<std::size_t>(n), std::numeric_limits<double>::quiet_NaN());
  v.assign(static_cast<std::size_t>(k), std::numeric_limits<double>::quiet_NaN());
  u[0] = 0.0;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& c : basis) {
      auto& ui = u[static_cast<std::size_t>(c.i)];
      auto& vj = v[static_cast<std::size_t>(c.j)];
      if (!std::isnan(ui) && std::isnan(vj)) {
        vj = C(c.i, c.j) - ui;
        changed = true;
      } else if (std::isnan(ui) && !std::isnan(vj)) {
        ui = C(c.i, c.j) - vj;
        changed = true;
      }
    }
  }
}

/// Path in the basis tree from row node ri to column node cj, as alternating basis indices.
inline std::vector<int> tree_path(const std::vector<Cell>& basis, int n, int k, int ri, int cj) {
  const int nodes = n + k;
  std::vector<std::vector<std::pair<int, int>>> adj(static_cast<std::size_t>(nodes));
  for (std::size_t e = 0; e < basis.size(); ++e) {
    adj[static_cast<std::size_t>(basis[e].i)].push_back({n + basis[e].j, static_cast<int>(e)});
    adj[static_cast<std::size_t>(n + basis[e].j)].push_back({basis[e].i, static_cast<int>(e)});
  }
  std::vector<int> prev_edge(static_cast<std::size_t>(nodes), -1), prev_node(static_cast<std::size_t>(nodes), -1);
  std::vector<bool> seen(static_cast<std::size_t>(nodes), false);
  std::queue<int> q;
  q.push(ri);
  seen[static_cast<std::size_t>(ri)] = true;
  const int target = n + cj;
  while (!q.empty()) {
    const int v = q.front();
    q.pop();
    if (v == target) break;
    for (const auto& [w, e] : adj[static_cast<std::size_t>(v)]) {
      if (seen[static_cast<std::size_t>(w)]) continue;
      seen[static_cast<std::size_t>(w)] = true;
      prev_edge[static_cast<std::size_t>(w)] = e;
      prev_node[static_cast<std::size_t>(w)] = v;
      q.push(w);
    }
  }
  std::vector<int> path;
  for (int v = target; v != ri; v = prev_node[static_cast<std::size_t>(v)]) {
    if (prev_edge[static_cast<std::size_t>(v)] < 0) throw NumericalError("transport: basis is not a spanning tree");
    path.push_back(prev_edge[static_cast<std::size_t>(v)]);
  }
  std::reverse(path.begin(), path.end());
  return path;
}

inline void check_marginals(const std::vector<double>& a, const std::vector<double>& b, const Eigen::MatrixXd& C) {
  if (a.empty() || b.empty()) throw ValidationError("transport: empty marginal");
  if (C.rows() != static_cast<Eigen::Index>(a.size()) || C.cols() != static_cast<Eigen::Index>(b.size())) {
    throw ValidationError("transport: cost matrix shape mismatch");
  }
  double sa = 0.0, sb = 0.0;
  for (double x : a) {
    if (!(x >= 0.0)) throw ValidationError("transport: negative weight");
    sa += x;
  }
  for (double x : b) {
    if (!(x >= 0.0)) throw ValidationError("transport: negative weight");
    sb += x;
  }
  if (std::abs(sa - sb) > 1e-12 * std::max(1.0, sa)) throw ValidationError("transport: marginals are infeasible");
}

}  // namespace detail

/// Transportation simplex. Optimal plan, primal cost and dual potentials.
inline TransportResult solve_transport(const std::vector<double>& a, const std::vector<double>& b,
                                       const Eigen::MatrixXd& C, int max_pivots = 100000) {
  detail::check_marginals(a, b, C);
  const int n = static_cast<int>(a.size()), k = static_cast<int>(b.size());
  using detail::Cell;

  // North-west corner start with degenerate zeros kept in the basis.
  std::vector<Cell> basis;
  {
    std::vector<double> s = a, d = b;
    int i = 0, j = 0;
    while (i < n && j < k) {
      basis.push_back({i, j});
      const double x = std::min(s[static_cast<std::size_t>(i)], d[static_cast<std::size_t>(j)]);
      s[static_cast<std::size_t>(i)] -= x;
      d[static_cast<std::size_t>(j)] -= x;
      if (i == n - 1) {
        ++j;
      } else if (j == k - 1) {
        ++i;
      } else if (s[static_cast<std::size_t>(i)] <= d[static_cast<std::size_t>(j)]) {
        ++i;
      } else {
        ++j;
      }
    }
  }
  std::vector<double> x;
  if (!detail::tree_flows(basis, a, b, x)) throw NumericalError("transport: initial basis is not a tree");

  TransportResult res;
  std::vector<double> u, v;
  const double tol = 1e-12 * std::max(1.0, C.cwiseAbs().maxCoeff());
  for (;;) {
    detail::tree_potentials(basis, C, u, v);
    int bi = -1, bj = -1;
    double best = -tol;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < k; ++j) {
        const double r = C(i, j) - u[static_cast<std::size_t>(i)] - v[static_cast<std::size_t>(j)];
        if (r < best) {
          best = r;
          bi = i;
          bj = j;
        }
      }
    }
    if (bi < 0) break;
    if (++res.pivots > max_pivots) throw NumericalError("transport: pivot limit reached");
    const auto path = detail::tree_path(basis, n, k, bi, bj);
    // Cycle: entering cell (+), then path edges alternate -, +, -, ... from the row side.
    double theta = std::numeric_limits<double>::infinity();
    int leave = -1;
    for (std::size_t p = 0; p < path.size(); p += 2) {
      const int e = path[p];
      if (x[static_cast<std::size_t>(e)] < theta) {
        theta = x[static_cast<std::size_t>(e)];
        leave = e;
      }
    }
    theta = std::max(theta, 0.0);
    for (std::size_t p = 0; p < path.size(); ++p) {
      x[static_cast<std::size_t>(path[p])] += (p % 2 == 0 ? -theta : theta);
    }
    basis[static_cast<std::size_t>(leave)] = {bi, bj};
    x[static_cast<std::size_t>(leave)] = theta;
  }
  // Recompute flows exactly on the final tree to shed accumulated roundoff.
  detail::tree_flows(basis, a, b, x);
  res.plan = Eigen::MatrixXd::Zero(n, k);
  for (std::size_t e = 0; e < basis.size(); ++e) res.plan(basis[e].i, basis[e].j) += std::max(x[e], 0.0);
  res.cost = (res.plan.array() * C.array()).sum();
  res.f.resize(n);
  res.g.resize(k);
  double dual = 0.0;
  for (int i = 0; i < n; ++i) {
    res.f[i] = u[static_cast<std::size_t>(i)];
    dual += a[static_cast<std::size_t>(i)] * u[static_cast<std::size_t>(i)];
  }
  for (int j = 0; j < k; ++j) {
    res.g[j] = -v[static_cast<std::size_t>(j)];
    dual += b[static_cast<std::size_t>(j)] * v[static_cast<std::size_t>(j)];
  }
  res.dual = dual;
  return res;
}

/// Minimum cost over all vertices of the transportation polytope (spanning-tree bases).
/// Exponential; limited to at most 5 points per side.
inline double brute_force_transport(const std::vector<double>& a, const std::vector<double>& b,
                                    const Eigen::MatrixXd& C) {
  detail::check_marginals(a, b, C);
  const int n = static_cast<int>(a.size()), k = static_cast<int>(b.size());
  if (n > 5 || k > 5) throw ValidationError("brute_force_transport: at most 5 points per side");
  const int edges = n + k - 1;
  std::vector<detail::Cell> chosen;
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> x;
  // Union-find over n + k nodes, rebuilt per branch (sizes are tiny).
  auto acyclic_with = [&](const detail::Cell& c) {
    std::vector<int> parent(static_cast<std::size_t>(n + k));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int v) {
      while (parent[static_cast<std::size_t>(v)] != v) v = parent[static_cast<std::size_t>(v)];
      return v;
    };
    for (const auto& e : chosen) parent[static_cast<std::size_t>(find(e.i))] = find(n + e.j);
    return find(c.i) != find(n + c.j);
  };
  auto recurse = [&](auto&& self, int next) -> void {
    if (static_cast<int>(chosen.size()) == edges) {
      if (!detail::tree_flows(chosen, a, b, x)) return;
      double cost = 0.0;
      for (std::size_t e = 0; e < chosen.size(); ++e) {
        if (x[e] < -1e-12) return;
        cost += x[e] * C(chosen[e].i, chosen[e].j);
      }
      best = std::min(best, cost);
      return;
    }
    for (int cell = next; cell < n * k; ++cell) {
      if (n * k - cell < edges - static_cast<int>(chosen.size())) return;
      const detail::Cell c{cell / k, cell % k};
      if (!acyclic_with(c)) continue;
      chosen.push_back(c);
      self(self, cell + 1);
      chosen.pop_back();
    }
  };
  recurse(recurse, 0);
  return best;
}

inline Eigen::MatrixXd distance_matrix(const DiscreteMeasure& m1, const DiscreteMeasure& m2) {
  Eigen::MatrixXd D(static_cast<Eigen::Index>(m1.size()), static_cast<Eigen::Index>(m2.size()));
  for (std::size_t i = 0; i < m1.size(); ++i) {
    for (std::size_t j = 0; j < m2.size(); ++j) {
      if (m1.points[i].size() != m2.points[j].size()) throw ValidationError("transport: dimension mismatch");
      D(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (m1.points[i] - m2.points[j]).norm();
    }
  }
  return D;
}

inline Eigen::MatrixXd threshold_cost(const DiscreteMeasure& m1, const DiscreteMeasure& m2, double eps) {
  return (distance_matrix(m1, m2).array() > eps).cast<double>().matrix();
}

/// C_eps by linear programming, with the Kantorovich dual K_eps alongside.
inline TransportResult epsilon_optimal_cost(const DiscreteMeasure& m1, const DiscreteMeasure& m2, double eps) {
  m1.validate();
  m2.validate();
  if (m1.size() > 64 || m2.size() > 64) throw ValidationError("epsilon_optimal_cost: at most 64 points per side");
  if (!(eps >= 0.0)) throw ValidationError("epsilon_optimal_cost: eps must be non-negative");
  return solve_transport(m1.weights, m2.weights, threshold_cost(m1, m2, eps));
}

/// Wasserstein-1 distance with Euclidean ground cost.
inline TransportResult wasserstein1(const DiscreteMeasure& m1, const DiscreteMeasure& m2) {
  m1.validate();
  m2.validate();
  if (m1.size() > 64 || m2.size() > 64) throw ValidationError("wasserstein1: at most 64 points per side");
  return solve_transport(m1.weights, m2.weights, distance_matrix(m1, m2));
}

}  // namespace nsmix
