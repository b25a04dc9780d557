// Seeded random streams. Each replicate or sample block gets its own engine
// derived from (seed, stream index), so results do not depend on how work is
// scheduled across threads.
#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <future>
#include <random>
#include <thread>
#include <vector>

namespace wfsim {

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), 0x5eedu};
  return Rng(seq);
}

inline std::size_t worker_count(std::size_t tasks) {
  const std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  return std::max<std::size_t>(1, std::min(hw, tasks));
}

// Evaluates fn(index) for index in [0, count) on a small thread pool and
// returns the results in index order.
template <class Fn>
auto parallel_map(std::size_t count, Fn fn) -> std::vector<decltype(fn(std::size_t{}))> {
  using Result = decltype(fn(std::size_t{}));
  std::vector<Result> results(count);
  const std::size_t workers = worker_count(count);
  std::vector<std::future<void>> jobs;
  jobs.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    jobs.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t n = w; n < count; n += workers) results[n] = fn(n);
    }));
  }
  for (auto& job : jobs) job.get();
  return results;
}

}  // namespace wfsim
