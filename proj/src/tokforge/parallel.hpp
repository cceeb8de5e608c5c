#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace tokforge {

// Worker count: hardware concurrency, capped by TOKFORGE_THREADS when set.
inline std::size_t worker_count() {
  std::size_t n = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("TOKFORGE_THREADS")) {
    try {
      const long cap = std::stol(env);
      if (cap >= 1) n = std::min<std::size_t>(n, static_cast<std::size_t>(cap));
    } catch (const std::exception&) {
    }
  }
  return n;
}

// Splits [0, n) into contiguous chunks, runs `map(acc, begin, end)` on each
// with a fresh accumulator, then folds the partials left to right with
// `reduce(total, partial)`. The fold order is fixed, so associative
// reductions give the same result for any worker count.
template <class Acc, class Map, class Reduce>
Acc parallel_map_reduce(std::size_t n, Map map, Reduce reduce, std::size_t min_chunk = 256) {
  const std::size_t workers = std::min(worker_count(), std::max<std::size_t>(1, n / std::max<std::size_t>(1, min_chunk)));
  if (workers <= 1) {
    Acc acc{};
    map(acc, std::size_t{0}, n);
    return acc;
  }
  std::vector<Acc> partials(workers);
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> threads;
  threads.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = std::min(n, w * chunk);
    const std::size_t end = std::min(n, begin + chunk);
    threads.emplace_back([&, w, begin, end] {
      try {
        map(partials[w], begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  Acc total = std::move(partials[0]);
  for (std::size_t w = 1; w < workers; ++w) reduce(total, std::move(partials[w]));
  return total;
}

}  // namespace tokforge
