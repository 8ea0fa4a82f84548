#include "mipseg/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace mipseg {
namespace {

constexpr std::size_t kBlock = 4096;

int initial_threads() {
  if (const char* env = std::getenv("MIPSEG_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (...) {
    }
  }
  return 1;
}

std::atomic<int>& threads() {
  static std::atomic<int> n{initial_threads()};
  return n;
}

double pairwise(std::vector<double>& partial) {
  if (partial.empty()) return 0.0;
  std::size_t n = partial.size();
  while (n > 1) {
    const std::size_t half = (n + 1) / 2;
    for (std::size_t i = 0; i + half < n; ++i) partial[i] += partial[i + half];
    n = half;
  }
  return partial[0];
}

}  // namespace

int thread_count() { return threads().load(); }

void set_thread_count(int n) { threads().store(std::max(1, n)); }

void parallel_for(std::size_t n,
                  const std::function<void(std::size_t, std::size_t)>& fn,
                  std::size_t grain) {
  grain = std::max<std::size_t>(grain, 1);
  const auto workers = static_cast<std::size_t>(thread_count());
  if (workers <= 1 || n < 2 * grain) {
    if (n > 0) fn(0, n);
    return;
  }
  const std::size_t chunks = std::min(workers, (n + grain - 1) / grain);
  const std::size_t step = (n + chunks - 1) / chunks;
  std::vector<std::thread> pool;
  pool.reserve(chunks);
  for (std::size_t c = 0; c < chunks; ++c) {
    const std::size_t b = c * step;
    const std::size_t e = std::min(n, b + step);
    if (b >= e) break;
    pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
  for (auto& t : pool) t.join();
}

double stable_sum(std::size_t n, const std::function<double(std::size_t)>& term) {
  const std::size_t blocks = (n + kBlock - 1) / kBlock;
  std::vector<double> partial(blocks, 0.0);
  parallel_for(blocks, [&](std::size_t b0, std::size_t b1) {
    for (std::size_t b = b0; b < b1; ++b) {
      double acc = 0.0;
      const std::size_t end = std::min(n, (b + 1) * kBlock);
      for (std::size_t i = b * kBlock; i < end; ++i) acc += term(i);
      partial[b] = acc;
    }
  }, 1);
  return pairwise(partial);
}

double stable_sum(std::span<const double> values) {
  return stable_sum(values.size(), [values](std::size_t i) { return values[i]; });
}

}  // namespace mipseg
