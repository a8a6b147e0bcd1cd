#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mvdelay {

struct AssignmentResult {
  /// row_to_col[i] is the column matched to row i.
  std::vector<std::size_t> row_to_col;
  double total_cost = 0.0;
};

/// Exact minimum-cost perfect matching of a square n x n cost matrix
/// (row-major), by successive shortest augmenting paths with potentials.
/// O(n^3) time and O(n) extra memory.
AssignmentResult solve_assignment(std::span<const double> cost, std::size_t n);

}  // namespace mvdelay
