#pragma once

#include <cstddef>
#include <functional>

namespace heatlab {

// Worker count: HEATLAB_THREADS when set to a positive integer, otherwise the
// hardware concurrency (at least 1).
std::size_t thread_limit();

// Runs body(0..count-1) on up to thread_limit() threads. Each index is
// handled exactly once; results must go to per-index slots. The first
// exception (lowest index) is rethrown after all workers finish.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace heatlab
