#include "polymean/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace polymean {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

AssignmentResult solve_assignment(const CostMatrix& cost) {
  if (cost.rows != cost.cols)
    throw DimensionError("assignment needs a square cost matrix, got " +
                         std::to_string(cost.rows) + "x" + std::to_string(cost.cols));
  const int n = cost.rows;
  AssignmentResult result;
  result.perm.assign(n, -1);
  if (n == 0) return result;

  // match[j] = row currently matched to column j; column n is virtual and
  // temporarily holds the row being inserted.
  std::vector<double> u(n, 0.0), v(n + 1, 0.0);
  std::vector<int> match(n + 1, -1);
  for (int i = 0; i < n; ++i) {
    std::vector<double> min_to(n + 1, kInf);
    std::vector<int> prev(n + 1, n);
    std::vector<char> used(n + 1, 0);
    int j0 = n;
    match[n] = i;
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      double delta = kInf;
      int j1 = -1;
      for (int j = 0; j < n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0, j) - u[i0] - v[j];
        if (cur < min_to[j]) {
          min_to[j] = cur;
          prev[j] = j0;
        }
        if (min_to[j] < delta) {
          delta = min_to[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          if (match[j] >= 0) u[match[j]] += delta;
          v[j] -= delta;
        } else {
          min_to[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != -1);
    // Augment along the alternating path back to the virtual column.
    while (j0 != n) {
      const int j1 = prev[j0];
      match[j0] = match[j1];
      j0 = j1;
    }
  }

  for (int j = 0; j < n; ++j) result.perm[match[j]] = j;
  double total = 0.0;
  for (int i = 0; i < n; ++i) total += cost(i, result.perm[i]);
  result.cost = total;
  return result;
}

namespace {

// Transportation simplex on strictly positive supplies/demands with equal
// totals. The basis is a spanning tree of the bipartite node set; Bland-style
// first-negative pricing keeps pivoting deterministic and finite.
class TransportationSimplex {
 public:
  TransportationSimplex(std::vector<double> supply, std::vector<double> demand,
                        const CostMatrix& cost)
      : m_(static_cast<int>(supply.size())),
        k_(static_cast<int>(demand.size())),
        cost_(cost),
        supply_(std::move(supply)),
        demand_(std::move(demand)) {}

  // Runs the simplex; afterwards basic cells hold an optimal basic solution.
  void solve() {
    northwest_start();
    double scale = 1.0;
    for (double c : cost_.data) scale = std::max(scale, std::abs(c));
    const double eps = 1e-13 * scale;
    const long max_pivots = 2000 + 64L * (m_ + k_) + 4L * m_ * k_;
    for (long pivot = 0; pivot < max_pivots; ++pivot) {
      compute_duals();
      int ei = -1, ej = -1;
      for (int i = 0; i < m_ && ei < 0; ++i) {
        for (int j = 0; j < k_; ++j) {
          if (basic_id_[cell(i, j)] >= 0) continue;
          if (cost_(i, j) - u_[i] - v_[j] < -eps) {
            ei = i;
            ej = j;
            break;
          }
        }
      }
      if (ei < 0) return;  // optimal
      pivot_on(ei, ej);
    }
    throw Error("InternalError", "transportation simplex exceeded its pivot budget");
  }

  // flow on cell (i, j), zero if non-basic
  double flow_at(int i, int j) const {
    const int id = basic_id_[cell(i, j)];
    return id >= 0 ? flow_[id] : 0.0;
  }

 private:
  struct BasicCell {
    int i, j;
    bool alive = true;
  };

  std::size_t cell(int i, int j) const { return static_cast<std::size_t>(i) * k_ + j; }
  int node_of_row(int i) const { return i; }
  int node_of_col(int j) const { return m_ + j; }

  void add_basic(int i, int j, double f) {
    const int id = static_cast<int>(cells_.size());
    cells_.push_back({i, j});
    flow_.push_back(f);
    basic_id_[cell(i, j)] = id;
    adj_[node_of_row(i)].push_back(id);
    adj_[node_of_col(j)].push_back(id);
  }

  void remove_basic(int id) {
    const auto& c = cells_[id];
    basic_id_[cell(c.i, c.j)] = -1;
    auto drop = [&](int node) {
      auto& lst = adj_[node];
      lst.erase(std::remove(lst.begin(), lst.end(), id), lst.end());
    };
    drop(node_of_row(c.i));
    drop(node_of_col(c.j));
    cells_[id].alive = false;
  }

  void northwest_start() {
    basic_id_.assign(static_cast<std::size_t>(m_) * k_, -1);
    adj_.assign(m_ + k_, {});
    std::vector<double> a = supply_, b = demand_;
    int i = 0, j = 0;
    while (true) {
      const double f = std::min(a[i], b[j]);
      add_basic(i, j, f);
      a[i] -= f;
      b[j] -= f;
      if (i == m_ - 1 && j == k_ - 1) break;
      if (a[i] <= 0.0 && i < m_ - 1) {
        ++i;
      } else {
        ++j;
      }
    }
  }

  void compute_duals() {
    u_.assign(m_, 0.0);
    v_.assign(k_, 0.0);
    std::vector<char> seen(m_ + k_, 0);
    std::vector<int> stack = {node_of_row(0)};
    seen[node_of_row(0)] = 1;
    while (!stack.empty()) {
      const int node = stack.back();
      stack.pop_back();
      for (int id : adj_[node]) {
        const auto& c = cells_[id];
        const int other = node < m_ ? node_of_col(c.j) : node_of_row(c.i);
        if (seen[other]) continue;
        seen[other] = 1;
        if (other >= m_) {
          v_[c.j] = cost_(c.i, c.j) - u_[c.i];
        } else {
          u_[c.i] = cost_(c.i, c.j) - v_[c.j];
        }
        stack.push_back(other);
      }
    }
  }

  // Path of basic cell ids between two nodes in the spanning tree.
  std::vector<int> tree_path(int from, int to) const {
    std::vector<int> via_cell(m_ + k_, -1), parent(m_ + k_, -1);
    std::vector<char> seen(m_ + k_, 0);
    std::vector<int> queue = {from};
    seen[from] = 1;
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const int node = queue[head];
      if (node == to) break;
      for (int id : adj_[node]) {
        const auto& c = cells_[id];
        const int other = node < m_ ? node_of_col(c.j) : node_of_row(c.i);
        if (seen[other]) continue;
        seen[other] = 1;
        parent[other] = node;
        via_cell[other] = id;
        queue.push_back(other);
      }
    }
    std::vector<int> path;
    for (int node = to; node != from; node = parent[node]) path.push_back(via_cell[node]);
    std::reverse(path.begin(), path.end());
    return path;
  }

  void pivot_on(int ei, int ej) {
    // Cycle = entering arc + tree path from the entering column back to the
    // entering row; flows alternate +/- starting with + on the entering arc.
    const std::vector<int> path = tree_path(node_of_col(ej), node_of_row(ei));
    double theta = kInf;
    int leaving = -1;
    long leaving_pos = -1;
    int sign = -1;
    for (int id : path) {
      if (sign < 0) {
        const long pos = static_cast<long>(cells_[id].i) * k_ + cells_[id].j;
        if (flow_[id] < theta || (flow_[id] == theta && (leaving < 0 || pos < leaving_pos))) {
          theta = flow_[id];
          leaving = id;
          leaving_pos = pos;
        }
      }
      sign = -sign;
    }
    sign = -1;
    for (int id : path) {
      flow_[id] += sign < 0 ? -theta : theta;
      sign = -sign;
    }
    remove_basic(leaving);
    add_basic(ei, ej, theta);
  }

  const int m_, k_;
  const CostMatrix& cost_;
  std::vector<double> supply_, demand_;
  std::vector<BasicCell> cells_;
  std::vector<double> flow_;
  std::vector<int> basic_id_;
  std::vector<std::vector<int>> adj_;
  std::vector<double> u_, v_;
};

// Drops zero-mass rows/cols, solves, and scatters the plan back.
TransportPlan solve_reduced(std::span<const double> supply, std::span<const double> demand,
                            const CostMatrix& cost) {
  const int m = static_cast<int>(supply.size());
  const int k = static_cast<int>(demand.size());
  std::vector<int> rows, cols;
  for (int i = 0; i < m; ++i)
    if (supply[i] > 0.0) rows.push_back(i);
  for (int j = 0; j < k; ++j)
    if (demand[j] > 0.0) cols.push_back(j);
  if (rows.empty() || cols.empty()) throw MassError("transport requires positive total mass");

  CostMatrix reduced(static_cast<int>(rows.size()), static_cast<int>(cols.size()));
  std::vector<double> a(rows.size()), b(cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i) a[i] = supply[rows[i]];
  for (std::size_t j = 0; j < cols.size(); ++j) b[j] = demand[cols[j]];
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      reduced(static_cast<int>(i), static_cast<int>(j)) = cost(rows[i], cols[j]);

  // Make the totals match exactly so the last northwest cell closes cleanly.
  const double sa = std::accumulate(a.begin(), a.end(), 0.0);
  const double sb = std::accumulate(b.begin(), b.end(), 0.0);
  b.back() += sa - sb;
  if (b.back() < 0.0) b.back() = 0.0;

  TransportationSimplex simplex(a, b, reduced);
  simplex.solve();

  TransportPlan plan;
  plan.rows = m;
  plan.cols = k;
  plan.mass.assign(static_cast<std::size_t>(m) * k, 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const double f = simplex.flow_at(static_cast<int>(i), static_cast<int>(j));
      if (f != 0.0) plan.mass[static_cast<std::size_t>(rows[i]) * k + cols[j]] = f;
    }
  return plan;
}

}  // namespace

TransportResult solve_transport(std::span<const double> source_weights,
                                std::span<const double> target_weights,
                                const CostMatrix& cost) {
  if (static_cast<int>(source_weights.size()) != cost.rows ||
      static_cast<int>(target_weights.size()) != cost.cols)
    throw DimensionError("weight vectors do not match the cost matrix");
  auto check_sum = [](std::span<const double> w, const char* side) {
    double s = 0.0;
    for (double x : w) {
      if (x < 0.0) throw MassError(std::string(side) + " weights must be non-negative");
      s += x;
    }
    if (std::abs(s - 1.0) > 1e-12)
      throw MassError(std::string(side) + " weights sum to " + std::to_string(s) + ", expected 1");
  };
  check_sum(source_weights, "source");
  check_sum(target_weights, "target");

  TransportResult result;
  if (cost.cols == 1 || cost.rows == 1) {
    // Single marginal on one side: the coupling is forced.
    result.plan.rows = cost.rows;
    result.plan.cols = cost.cols;
    result.plan.mass.assign(static_cast<std::size_t>(cost.rows) * cost.cols, 0.0);
    if (cost.cols == 1) {
      for (int i = 0; i < cost.rows; ++i) result.plan.mass[i] = source_weights[i];
    } else {
      for (int j = 0; j < cost.cols; ++j) result.plan.mass[j] = target_weights[j];
    }
    double total = 0.0;
    for (int i = 0; i < cost.rows; ++i)
      for (int j = 0; j < cost.cols; ++j) total += result.plan(i, j) * cost(i, j);
    result.cost = total;
    return result;
  }
  result.plan = solve_reduced(source_weights, target_weights, cost);
  double total = 0.0;
  for (int i = 0; i < cost.rows; ++i)
    for (int j = 0; j < cost.cols; ++j) total += result.plan(i, j) * cost(i, j);
  result.cost = total;
  return result;
}

CapacitatedResult solve_capacitated_assignment(const CostMatrix& cost,
                                               std::span<const int> capacities) {
  const int n = cost.rows;
  const int q = static_cast<int>(capacities.size());
  if (q != cost.cols) throw DimensionError("capacities do not match the cost matrix columns");
  long total = 0;
  for (int c : capacities) {
    if (c < 1) throw MassError("capacities must be positive");
    total += c;
  }
  if (total != n)
    throw MassError("capacities sum to " + std::to_string(total) + ", expected " +
                    std::to_string(n));

  std::vector<double> supply(n, 1.0), demand(q);
  for (int j = 0; j < q; ++j) demand[j] = static_cast<double>(capacities[j]);
  const TransportPlan plan = solve_reduced(supply, demand, cost);

  CapacitatedResult result;
  result.assignment.assign(n, -1);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < q; ++j) {
      if (plan(i, j) > 0.5) {
        result.assignment[i] = j;
        break;
      }
    }
    if (result.assignment[i] < 0)
      throw Error("InternalError", "capacitated assignment produced a fractional flow");
  }
  double c = 0.0;
  for (int i = 0; i < n; ++i) c += cost(i, result.assignment[i]);
  result.cost = c;
  return result;
}

}  // namespace polymean
