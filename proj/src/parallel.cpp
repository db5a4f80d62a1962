#include "ssrlab/parallel.hpp"

#include <cstdlib>
#include <string>

namespace ssrlab {

int resolve_workers(std::optional<int> requested) {
    if (requested && *requested >= 1) return *requested;
    if (const char* env = std::getenv("SSRLAB_WORKERS")) {
        try {
            const int w = std::stoi(env);
            if (w >= 1) return w;
        } catch (...) {
            // fall through to auto
        }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace ssrlab
