#include "fuselab/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace fuselab::parallel {

namespace {

int default_threads() {
    if (const char* env = std::getenv("FUSELAB_THREADS")) {
        try {
            int n = std::stoi(env);
            if (n >= 1) return n;
        } catch (...) {
        }
    }
#if defined(_OPENMP)
    return omp_get_max_threads();
#else
    return 1;
#endif
}

std::atomic<int>& cap() {
    static std::atomic<int> value{default_threads()};
    return value;
}

constexpr std::size_t kMinWorkPerThread = 1 << 15;

}  // namespace

int max_threads() { return cap().load(); }

void set_max_threads(int n) { cap().store(n < 1 ? 1 : n); }

bool in_parallel() {
#if defined(_OPENMP)
    return omp_in_parallel() != 0;
#else
    return false;
#endif
}

int threads_for(std::size_t work) {
    if (in_parallel()) return 1;
    std::size_t by_work = work / kMinWorkPerThread;
    if (by_work < 2) return 1;
    int limit = max_threads();
    return by_work < static_cast<std::size_t>(limit) ? static_cast<int>(by_work) : limit;
}

}  // namespace fuselab::parallel
