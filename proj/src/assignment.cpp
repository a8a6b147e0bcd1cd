#include "mvdelay/assignment.hpp"

#include <cmath>
#include <limits>

#include "mvdelay/model.hpp"

namespace mvdelay {

AssignmentResult solve_assignment(std::span<const double> cost, std::size_t n) {
  if (cost.size() != n * n) throw Error("assignment: cost matrix must be n x n");
  for (double c : cost)
    if (!std::isfinite(c)) throw Error("assignment: non-finite cost");

  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based bookkeeping; column 0 is a virtual source.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> col_owner(n + 1, 0), way(n + 1, 0);
  std::vector<double> min_slack(n + 1);
  std::vector<char> used(n + 1);

  for (std::size_t row = 1; row <= n; ++row) {
    col_owner[0] = row;
    std::size_t col0 = 0;
    std::fill(min_slack.begin(), min_slack.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[col0] = 1;
      const std::size_t i0 = col_owner[col0];
      double delta = inf;
      std::size_t col1 = 0;
      const double* cost_row = cost.data() + (i0 - 1) * n;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double reduced = cost_row[j - 1] - u[i0] - v[j];
        if (reduced < min_slack[j]) {
          min_slack[j] = reduced;
          way[j] = col0;
        }
        if (min_slack[j] < delta) {
          delta = min_slack[j];
          col1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[col_owner[j]] += delta;
          v[j] -= delta;
        } else {
          min_slack[j] -= delta;
        }
      }
      col0 = col1;
    } while (col_owner[col0] != 0);
    do {
      const std::size_t col1 = way[col0];
      col_owner[col0] = col_owner[col1];
      col0 = col1;
    } while (col0 != 0);
  }

  AssignmentResult result;
  result.row_to_col.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) result.row_to_col[col_owner[j] - 1] = j - 1;
  // Recompute the total from the matching itself rather than the dual value,
  // so equal matchings give bit-identical totals.
  for (std::size_t i = 0; i < n; ++i) result.total_cost += cost[i * n + result.row_to_col[i]];
  return result;
}

}  // namespace mvdelay
