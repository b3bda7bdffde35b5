#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "hetplan/core/error.hpp"

namespace hetplan::perception {

/// goal index -> current index; a permutation of 0..N-1.
struct Correspondence {
  std::vector<int> goal_to_current;

  std::size_t size() const { return goal_to_current.size(); }
  bool is_bijection() const {
    std::vector<char> seen(goal_to_current.size(), 0);
    for (int c : goal_to_current) {
      if (c < 0 || static_cast<std::size_t>(c) >= seen.size() || seen[static_cast<std::size_t>(c)]) return false;
      seen[static_cast<std::size_t>(c)] = 1;
    }
    return true;
  }
  /// current index -> goal index.
  std::vector<int> inverse() const {
    std::vector<int> inv(goal_to_current.size(), -1);
    for (std::size_t g = 0; g < goal_to_current.size(); ++g) inv[static_cast<std::size_t>(goal_to_current[g])] = static_cast<int>(g);
    return inv;
  }
  friend bool operator==(const Correspondence&, const Correspondence&) = default;
};

inline double l2(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

/// Minimum-cost perfect assignment on a square cost matrix (rows -> columns),
/// O(n^3) shortest augmenting paths with potentials.
inline std::vector<int> hungarian(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based arrays; column 0 is a virtual start.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n, -1);
  for (std::size_t j = 1; j <= n; ++j)
    if (p[j] != 0) row_to_col[p[j] - 1] = static_cast<int>(j - 1);
  return row_to_col;
}

/// Each goal takes its nearest current descriptor (lowest index on ties);
/// when two goals pick the same object the whole map is re-solved as a
/// minimum total distance assignment.
inline Correspondence match_descriptors(const std::vector<std::vector<double>>& current,
                                        const std::vector<std::vector<double>>& goal) {
  if (current.size() != goal.size())
    throw DomainError("cannot match " + std::to_string(current.size()) + " current objects to " +
                      std::to_string(goal.size()) + " goals");
  const std::size_t n = goal.size();
  std::vector<std::vector<double>> cost(n, std::vector<double>(n));
  for (std::size_t g = 0; g < n; ++g)
    for (std::size_t c = 0; c < n; ++c) cost[g][c] = l2(goal[g], current[c]);
  Correspondence out;
  out.goal_to_current.resize(n);
  for (std::size_t g = 0; g < n; ++g) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < n; ++c)
      if (cost[g][c] < cost[g][best]) best = c;
    out.goal_to_current[g] = static_cast<int>(best);
  }
  if (!out.is_bijection()) out.goal_to_current = hungarian(cost);
  return out;
}

}  // namespace hetplan::perception
