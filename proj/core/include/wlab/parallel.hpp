#pragma once

// Deterministic parallel map: work items are independent, results land in
// caller-owned slots indexed by item, so the merge order never depends on
// scheduling.

#include <atomic>
#include <thread>
#include <vector>

namespace wlab {

template <class F>
void parallel_for(int n_items, F&& f, unsigned n_threads = 0) {
  if (n_items <= 0) return;
  unsigned hw = n_threads ? n_threads : std::thread::hardware_concurrency();
  if (hw <= 1 || n_items < 32) {
    for (int i = 0; i < n_items; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      int i = next.fetch_add(1);
      if (i >= n_items) return;
      f(i);
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < hw; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
}

}  // namespace wlab
