#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace lrmfg {

namespace detail {
inline std::atomic<unsigned>& thread_cap() {
  static std::atomic<unsigned> cap{0};
  return cap;
}
}  // namespace detail

/// Caps worker threads used by parallel passes. 0 means hardware concurrency.
inline void set_max_threads(unsigned n) noexcept { detail::thread_cap().store(n); }

inline unsigned max_threads() noexcept {
  unsigned cap = detail::thread_cap().load();
  return cap == 0 ? std::max(1u, std::thread::hardware_concurrency()) : cap;
}

/// Runs fn(i) for i in [0, n). Indices are split into contiguous blocks, one
/// per worker. If several calls throw, the exception of the lowest index is
/// rethrown, so error reporting does not depend on scheduling.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  unsigned workers = static_cast<unsigned>(std::min<std::size_t>(max_threads(), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::size_t> error_index(workers, n);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      std::size_t lo = n * w / workers, hi = n * (w + 1) / workers;
      pool.emplace_back([&, w, lo, hi] {
        for (std::size_t i = lo; i < hi; ++i) {
          try {
            fn(i);
          } catch (...) {
            errors[w] = std::current_exception();
            error_index[w] = i;
            return;
          }
        }
      });
    }
  }
  std::size_t first = n;
  std::exception_ptr err;
  for (unsigned w = 0; w < workers; ++w)
    if (errors[w] && error_index[w] < first) {
      first = error_index[w];
      err = errors[w];
    }
  if (err) std::rethrow_exception(err);
}

}  // namespace lrmfg
