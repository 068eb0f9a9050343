#pragma once
// Deterministic trial-pool parallelism.
//
// Trials are independent and own their RNG streams, so the only requirement
// for bit-reproducibility across worker counts is that each trial writes only
// to its own output slot and that reductions happen afterwards, in trial
// order, on one thread. This helper hands out trial indices from an atomic
// counter; callers keep the slot discipline.

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace cutlab {

template <class F>
inline void run_trials(size_t n_trials, size_t workers, F&& trial_fn) {
  if (workers <= 1 || n_trials <= 1) {
    for (size_t t = 0; t < n_trials; ++t) trial_fn(t);
    return;
  }
  if (workers > n_trials) workers = n_trials;

  std::atomic<size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto body = [&] {
    while (true) {
      size_t t = next.fetch_add(1, std::memory_order_relaxed);
      if (t >= n_trials) return;
      try {
        trial_fn(t);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
        next.store(n_trials, std::memory_order_relaxed);  // drain remaining work
        return;
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (size_t w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

// Worker count resolution: explicit value wins; 0 means "pick for me", which
// consults CUTLAB_WORKERS and falls back to the hardware concurrency.
inline size_t resolve_workers(size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("CUTLAB_WORKERS")) {
    char* end = nullptr;
    unsigned long v = std::strtoul(env, &end, 10);
    if (end && *end == '\0' && v > 0) return (size_t)v;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? hc : 1;
}

}  // namespace cutlab
