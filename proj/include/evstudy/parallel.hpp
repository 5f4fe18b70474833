#pragma once

#include <cstddef>
#include <functional>

namespace evstudy {

// Global cap on worker threads. 0 means "all available cores".
void set_thread_count(unsigned n);
unsigned thread_count();

// Runs body(i) for i in [0, n). Work is split into contiguous blocks, one per
// worker; body must only write to state owned by index i, which keeps every
// result independent of the number of threads. Nested calls from inside a
// worker run serially.
void parallel_for(std::size_t n, const std::function<void(std::size_t)> &body);

} // namespace evstudy
