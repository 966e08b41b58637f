#include "lprnet/threading.hpp"

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace lprnet {

static int g_thread_cap = 0;  // 0 = uninitialized

static int read_cap() {
    const char* env = std::getenv("LPRNET_THREADS");
    int machine = 1;
#ifdef _OPENMP
    machine = omp_get_max_threads();
#endif
    if (env == nullptr) return machine;
    try {
        int n = std::stoi(env);
        if (n >= 1) return n;
    } catch (...) {
    }
    return machine;
}

void init_threading() {
    g_thread_cap = read_cap();
#ifdef _OPENMP
    omp_set_num_threads(g_thread_cap);
#endif
}

int effective_threads() {
    if (g_thread_cap == 0) init_threading();
    return g_thread_cap;
}

}  // namespace lprnet
