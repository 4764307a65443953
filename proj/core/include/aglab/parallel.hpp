#pragma once

#include <cstddef>
#include <functional>

namespace aglab {

/// Process-wide cap on worker threads (the CLI's --threads). Defaults to 1.
int thread_cap();
void set_thread_cap(int threads);

/// Runs fn(begin, end) over contiguous chunks of [0, count). Chunk boundaries
/// depend only on `count` and the thread cap; callers that reduce must do so
/// per item or in chunk order to stay deterministic.
void parallel_for(std::size_t count, const std::function<void(std::size_t, std::size_t)>& fn);

} // namespace aglab
