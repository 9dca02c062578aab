#pragma once

#include <cstddef>
#include <functional>

namespace psipde {

// Worker count for parallel loops. 0 means "not set": falls back to the
// PSI_PDE_THREADS environment variable, then to hardware concurrency.
void set_thread_count(int n);
int thread_count();

// Runs body(i) for i in [0, n). Each index is handled by exactly one worker;
// callers write results to per-index slots so output never depends on the
// worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace psipde
