#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace fedmuon {

// Threads to use when a caller asks for 0 ("auto"): FEDMUON_THREADS if set
// and positive, otherwise the hardware concurrency.
int default_thread_count();

// Explicit positive requests are honored as-is; 0 resolves to the default.
int resolve_threads(int requested);

// Runs fn(i) for i in [0, count) on up to `threads` threads using a static
// strided partition. The first exception (lowest index) is rethrown.
template <typename Fn>
void parallel_for(int count, int threads, Fn&& fn) {
  if (count <= 0) return;
  if (threads <= 1 || count == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  const int used = threads < count ? threads : count;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(used));
    for (int w = 0; w < used; ++w) {
      pool.emplace_back([&, w] {
        for (int i = w; i < count; i += used) {
          try {
            fn(i);
          } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace fedmuon
