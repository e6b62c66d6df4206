#include "shotsort/parallel.hpp"

namespace shotsort::parallel {

namespace {
std::atomic<unsigned> g_max_threads{0};
}

void set_max_threads(unsigned n) { g_max_threads.store(n); }

unsigned max_threads() {
    const unsigned n = g_max_threads.load();
    if (n != 0) return n;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

} // namespace shotsort::parallel
