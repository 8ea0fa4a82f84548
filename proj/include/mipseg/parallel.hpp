#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace mipseg {

// Process-wide worker count. Initialized from MIPSEG_THREADS when set,
// otherwise 1. Results of every operation are independent of this value.
int thread_count();
void set_thread_count(int n);

// Calls fn(begin, end) on disjoint chunks covering [0, n). Runs inline when
// n is below two grains.
void parallel_for(std::size_t n,
                  const std::function<void(std::size_t, std::size_t)>& fn,
                  std::size_t grain = 4096);

// Sum over a fixed block decomposition (independent of thread count),
// blocks combined pairwise. Bit-identical for any number of workers.
double stable_sum(std::size_t n, const std::function<double(std::size_t)>& term);
double stable_sum(std::span<const double> values);

}  // namespace mipseg
