#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace nshawkes {

/// Upper bound on worker threads used by parallel_for. Defaults to the number
/// of hardware threads; values < 1 reset to that default.
void set_worker_count(int workers);
int worker_count();

/// Calls body(i) for i in [0, count). Iterations are split into contiguous
/// chunks; body must only write state owned by index i. Small ranges run inline.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body,
                  std::size_t min_parallel = 256);

/// Pairwise (cascade) summation. The reduction tree depends only on the input
/// length, so results are reproducible regardless of worker count.
double pairwise_sum(std::span<const double> values);

} // namespace nshawkes
