#include "wmd/parallel.hpp"

#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "wmd/error.hpp"

namespace wmd {

std::size_t hardware_workers() noexcept {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

void run_workers(std::size_t workers, const std::function<void(std::size_t)>& fn) {
  if (workers == 0) throw ArgumentError("worker count must be at least 1");
  if (workers == 1) {
    fn(0);
    return;
  }

  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto guarded = [&](std::size_t w) {
    try {
      fn(w);
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
    }
  };

  {
    std::vector<std::jthread> threads;
    threads.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) threads.emplace_back(guarded, w);
    guarded(0);
  }
  if (first_error) std::rethrow_exception(first_error);
}

IndexRange split_range(std::size_t n, std::size_t workers, std::size_t w) noexcept {
  const std::size_t base = n / workers;
  const std::size_t extra = n % workers;
  const std::size_t begin = w * base + (w < extra ? w : extra);
  return {begin, begin + base + (w < extra ? 1 : 0)};
}

}  // namespace wmd
