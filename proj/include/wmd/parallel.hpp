#pragma once

#include <cstddef>
#include <functional>

namespace wmd {

/// Number of hardware threads, at least 1.
std::size_t hardware_workers() noexcept;

/// Runs fn(worker_id) for worker_id in [0, workers) and joins. Worker 0 runs
/// on the calling thread. The first exception thrown by any worker is
/// rethrown after every worker has finished.
void run_workers(std::size_t workers, const std::function<void(std::size_t)>& fn);

/// Even split of [0, n) for worker `w` of `workers`; the first n % workers
/// ranges are one element longer.
struct IndexRange {
  std::size_t begin;
  std::size_t end;
};
IndexRange split_range(std::size_t n, std::size_t workers, std::size_t w) noexcept;

}  // namespace wmd
