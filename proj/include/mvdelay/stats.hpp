#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace mvdelay {

/// Pairwise (cascade) summation in index order. The result depends only on
/// the values and their order, never on how they were produced.
double pairwise_sum(std::span<const double> values);

struct MeanError {
  double mean = 0.0;
  double standard_error = 0.0;  ///< sample standard deviation / sqrt(n)
};

MeanError mean_and_error(std::span<const double> values);

/// Runs body(begin, end) over contiguous chunks of [0, n) on up to `threads`
/// threads. Bodies must write only to per-index outputs; results are then
/// identical to a sequential run.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace mvdelay
