#pragma once

#include <cstddef>

namespace fuselab::parallel {

/// Thread cap for the OpenMP kernels. Reads FUSELAB_THREADS once; falls
/// back to the OpenMP default when unset or invalid.
int max_threads();

/// Overrides the cap for the remainder of the process (tests, benchmarks).
void set_max_threads(int n);

/// True when called from inside an active parallel region.
bool in_parallel();

/// Threads to use for a loop with `work` scalar operations. Small loops and
/// nested regions run on the calling thread.
int threads_for(std::size_t work);

}  // namespace fuselab::parallel
