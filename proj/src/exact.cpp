#include "lsot/exact.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace lsot {

namespace {

// Supply perturbation: every row gets +eps, the last column +m*eps. No proper
// row subset then balances a column subset, so every basis is nondegenerate.
constexpr double kPerturbation = 1e-13;

struct Arc {
  int row;
  int col;
};

// Spanning tree over m row nodes [0, m) and n column nodes [m, m+n).
class BasisTree {
 public:
  BasisTree(int m, int n) : m_(m), n_(n), adj_(static_cast<std::size_t>(m + n)) {}

  void add(int arc_id, const Arc& a) {
    adj_[a.row].push_back(arc_id);
    adj_[m_ + a.col].push_back(arc_id);
  }

  void remove(int arc_id, const Arc& a) {
    auto drop = [arc_id](std::vector<int>& v) {
      v.erase(std::find(v.begin(), v.end(), arc_id));
    };
    drop(adj_[a.row]);
    drop(adj_[m_ + a.col]);
  }

  int other(const Arc& a, int node) const {
    return node == a.row ? m_ + a.col : a.row;
  }

  // Row potentials u and column potentials v with u_i + v_j = C_ij on the
  // tree, anchored at u_0 = 0.
  void potentials(const std::vector<Arc>& arcs, const Matrix& C, Vector& u,
                  Vector& v) const {
    std::vector<char> seen(static_cast<std::size_t>(m_ + n_), 0);
    std::vector<int> stack = {0};
    u[0] = 0.0;
    seen[0] = 1;
    while (!stack.empty()) {
      const int node = stack.back();
      stack.pop_back();
      for (int id : adj_[node]) {
        const Arc& a = arcs[id];
        const int next = other(a, node);
        if (seen[next]) continue;
        seen[next] = 1;
        if (next >= m_)
          v[next - m_] = C(a.row, a.col) - u[a.row];
        else
          u[next] = C(a.row, a.col) - v[a.col];
        stack.push_back(next);
      }
    }
  }

  // Arc ids on the tree path from `from` to `to`, ordered from `from`.
  std::vector<int> path(const std::vector<Arc>& arcs, int from, int to) const {
    std::vector<int> via(static_cast<std::size_t>(m_ + n_), -1);
    std::vector<char> seen(static_cast<std::size_t>(m_ + n_), 0);
    std::vector<int> queue = {from};
    seen[from] = 1;
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const int node = queue[head];
      if (node == to) break;
      for (int id : adj_[node]) {
        const int next = other(arcs[id], node);
        if (seen[next]) continue;
        seen[next] = 1;
        via[next] = id;
        queue.push_back(next);
      }
    }
    std::vector<int> out;
    for (int node = to; node != from;) {
      const int id = via[node];
      out.push_back(id);
      node = other(arcs[id], node);
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

 private:
  int m_;
  int n_;
  std::vector<std::vector<int>> adj_;
};

// Flows on a spanning tree for the given supplies/demands by leaf peeling.
std::vector<double> tree_flows(const std::vector<Arc>& arcs, int m, int n,
                               const Vector& supply, const Vector& demand) {
  const int nodes = m + n;
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(nodes));
  for (int id = 0; id < static_cast<int>(arcs.size()); ++id) {
    adj[arcs[id].row].push_back(id);
    adj[m + arcs[id].col].push_back(id);
  }
  std::vector<double> rest(static_cast<std::size_t>(nodes));
  for (int i = 0; i < m; ++i) rest[i] = supply[i];
  for (int j = 0; j < n; ++j) rest[m + j] = demand[j];
  std::vector<int> degree(static_cast<std::size_t>(nodes));
  for (int k = 0; k < nodes; ++k) degree[k] = static_cast<int>(adj[k].size());
  std::vector<char> used(arcs.size(), 0);
  std::vector<double> flow(arcs.size(), 0.0);
  std::vector<int> leaves;
  for (int k = 0; k < nodes; ++k)
    if (degree[k] == 1) leaves.push_back(k);
  while (!leaves.empty()) {
    const int leaf = leaves.back();
    leaves.pop_back();
    if (degree[leaf] != 1) continue;
    int id = -1;
    for (int a : adj[leaf])
      if (!used[a]) id = a;
    used[id] = 1;
    const double f = rest[leaf];
    flow[id] = f;
    const int other = leaf < m ? m + arcs[id].col : arcs[id].row;
    rest[leaf] = 0.0;
    rest[other] -= f;
    --degree[leaf];
    if (--degree[other] == 1) leaves.push_back(other);
  }
  return flow;
}

}  // namespace

ExactSolution solve_exact(const Instance& inst) {
  const int m = static_cast<int>(inst.m());
  const int n = static_cast<int>(inst.n());
  if (static_cast<Index>(m) * n > kExactSizeGuard)
    throw Error(ErrorCode::size_guard_exceeded, "solve_exact: m*n exceeds 1e6");

  const Matrix C = inst.cost().to_dense();
  const Vector& p = inst.p();
  const Vector& q = inst.q();

  Vector supply = p.array() + kPerturbation;
  Vector demand = q;
  demand[n - 1] += kPerturbation * m;

  // North-west corner start: exactly m + n - 1 staircase arcs.
  std::vector<Arc> arcs;
  std::vector<double> flow;
  {
    Vector ra = supply, rb = demand;
    int i = 0, j = 0;
    while (true) {
      const double f = std::min(ra[i], rb[j]);
      arcs.push_back({i, j});
      flow.push_back(f);
      ra[i] -= f;
      rb[j] -= f;
      if (i == m - 1 && j == n - 1) break;
      if (j == n - 1 || (i < m - 1 && ra[i] <= rb[j]))
        ++i;
      else
        ++j;
    }
  }
  BasisTree tree(m, n);
  std::vector<int> basic_at(static_cast<std::size_t>(m) * n, -1);
  for (int id = 0; id < static_cast<int>(arcs.size()); ++id) {
    tree.add(id, arcs[id]);
    basic_at[static_cast<std::size_t>(arcs[id].row) * n + arcs[id].col] = id;
  }

  const double tol = 1e-12 * std::max(1.0, inst.cost().max_abs());
  Vector u(m), v(n);
  Index iterations = 0;
  const Index max_pivots = 1000 + 50 * static_cast<Index>(m) * n;
  while (true) {
    tree.potentials(arcs, C, u, v);
    // Bland: the lowest-index cell (row-major) with negative reduced cost.
    int enter_row = -1, enter_col = -1;
    for (int i = 0; i < m && enter_row < 0; ++i) {
      for (int j = 0; j < n; ++j) {
        if (basic_at[static_cast<std::size_t>(i) * n + j] >= 0) continue;
        if (C(i, j) - u[i] - v[j] < -tol) {
          enter_row = i;
          enter_col = j;
          break;
        }
      }
    }
    if (enter_row < 0) break;
    if (++iterations > max_pivots)
      throw Error(ErrorCode::non_convergence, "solve_exact: pivot limit reached");

    // Cycle: entering arc (+), then the tree path from its column back to its
    // row alternates -, +, ..., - starting next to the column.
    std::vector<int> cycle = tree.path(arcs, m + enter_col, enter_row);
    double theta = std::numeric_limits<double>::infinity();
    int leave = -1;
    int leave_cell = std::numeric_limits<int>::max();
    for (std::size_t k = 0; k < cycle.size(); k += 2) {
      const int id = cycle[k];
      const int cell = arcs[id].row * n + arcs[id].col;
      if (flow[id] < theta || (flow[id] == theta && cell < leave_cell)) {
        theta = flow[id];
        leave = id;
        leave_cell = cell;
      }
    }
    for (std::size_t k = 0; k < cycle.size(); ++k)
      flow[cycle[k]] += (k % 2 == 0) ? -theta : theta;

    tree.remove(leave, arcs[leave]);
    basic_at[static_cast<std::size_t>(leave_cell)] = -1;
    arcs[leave] = {enter_row, enter_col};
    flow[leave] = theta;
    tree.add(leave, arcs[leave]);
    basic_at[static_cast<std::size_t>(enter_row) * n + enter_col] = leave;
  }

  // Undo the perturbation on the optimal basis.
  std::vector<double> exact_flow = tree_flows(arcs, m, n, p, q);
  Matrix T = Matrix::Zero(m, n);
  for (std::size_t id = 0; id < arcs.size(); ++id)
    T(arcs[id].row, arcs[id].col) = std::max(exact_flow[id], 0.0);

  ExactSolution out{TransportPlan(T), 0.0, 0, iterations};
  out.value = C.cwiseProduct(T).sum();
  out.support_size = (T.array() > 0.0).count();
  return out;
}

// ---------------------------------------------------------------------------
// Brute-force oracle. Deliberately shares no code with the simplex above.

namespace {

int find_root(std::vector<int>& parent, int x) {
  while (parent[x] != x) x = parent[x] = parent[parent[x]];
  return x;
}

}  // namespace

double oracle_tiny(const Instance& inst) {
  const int m = static_cast<int>(inst.m());
  const int n = static_cast<int>(inst.n());
  if (m + n > 9)
    throw Error(ErrorCode::size_guard_exceeded, "oracle_tiny: m + n exceeds 9");

  const Matrix C = inst.cost().to_dense();
  const int cells = m * n;
  const int k = m + n - 1;
  double best = std::numeric_limits<double>::infinity();

  std::vector<int> chosen(static_cast<std::size_t>(k));
  std::iota(chosen.begin(), chosen.end(), 0);
  std::vector<int> parent(static_cast<std::size_t>(m + n));
  std::vector<double> rest(static_cast<std::size_t>(m + n));
  std::vector<double> value(static_cast<std::size_t>(k));
  std::vector<char> done(static_cast<std::size_t>(k));
  std::vector<int> degree(static_cast<std::size_t>(m + n));

  while (true) {
    // Spanning tree test: k edges on m+n nodes without a cycle.
    std::iota(parent.begin(), parent.end(), 0);
    bool tree = true;
    for (int e : chosen) {
      const int a = find_root(parent, e / n);
      const int b = find_root(parent, m + e % n);
      if (a == b) {
        tree = false;
        break;
      }
      parent[a] = b;
    }
    if (tree) {
      // Triangular solve: repeatedly settle an edge at a degree-one node.
      for (int i = 0; i < m; ++i) rest[i] = inst.p()[i];
      for (int j = 0; j < n; ++j) rest[m + j] = inst.q()[j];
      std::fill(degree.begin(), degree.end(), 0);
      for (int e : chosen) {
        ++degree[e / n];
        ++degree[m + e % n];
      }
      std::fill(done.begin(), done.end(), 0);
      for (int settled = 0; settled < k; ++settled) {
        int pick = -1, node = -1;
        for (int t = 0; t < k && pick < 0; ++t) {
          if (done[t]) continue;
          const int r = chosen[t] / n, c = m + chosen[t] % n;
          if (degree[r] == 1) {
            pick = t;
            node = r;
          } else if (degree[c] == 1) {
            pick = t;
            node = c;
          }
        }
        const int r = chosen[pick] / n, c = m + chosen[pick] % n;
        const int far = node == r ? c : r;
        value[pick] = rest[node];
        rest[far] -= rest[node];
        rest[node] = 0.0;
        done[pick] = 1;
        --degree[r];
        --degree[c];
      }
      bool feasible = true;
      double cost = 0.0;
      for (int t = 0; t < k; ++t) {
        if (value[t] < -1e-12) {
          feasible = false;
          break;
        }
        cost += C(chosen[t] / n, chosen[t] % n) * std::max(value[t], 0.0);
      }
      if (feasible) best = std::min(best, cost);
    }
    // Next k-subset in lexicographic order.
    int t = k - 1;
    while (t >= 0 && chosen[t] == cells - k + t) --t;
    if (t < 0) break;
    ++chosen[t];
    for (int s = t + 1; s < k; ++s) chosen[s] = chosen[s - 1] + 1;
  }
  return best;
}

}  // namespace lsot
