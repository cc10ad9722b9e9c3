#pragma once

#include <cstddef>
#include <functional>

namespace rgdet {

/// Worker cap for library-internal parallel loops. 0 = hardware concurrency.
void set_thread_count(unsigned n);
unsigned thread_count();

/// Runs body(begin, end) over contiguous chunks of [0, n). Each index is
/// visited exactly once; callers write disjoint outputs so results never
/// depend on the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

} // namespace rgdet
