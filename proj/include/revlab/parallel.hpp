#pragma once

#include <cstddef>
#include <functional>

namespace revlab {

/// Worker count: REVLAB_THREADS when set and positive, otherwise hardware concurrency (≥ 1).
std::size_t default_thread_count();

/// Runs body(i) for i in [0, n) on up to `threads` workers. Each index runs exactly once;
/// the first exception thrown by any body is rethrown after all workers finish.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& body);

}  // namespace revlab
