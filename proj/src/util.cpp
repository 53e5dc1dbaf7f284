#include "droid/util.hpp"

#include <cstdlib>
#include <thread>

namespace droid::util {

void parallel_for(size_t n, unsigned degree, const std::function<void(size_t)>& fn) {
    if (n == 0) return;
    if (degree <= 1 || n == 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    unsigned workers = std::min<size_t>(degree, n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::vector<std::exception_ptr> errors(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (size_t i = w; i < n; i += workers) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

unsigned resolve_parallelism(unsigned requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("DROID_PARALLELISM")) {
        long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<unsigned>(v);
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

} // namespace droid::util
