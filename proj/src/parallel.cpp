#include "fwda/parallel.hpp"

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fwda::parallel {

int max_threads() {
#ifdef _OPENMP
    static const int cached = [] {
        int budget = omp_get_max_threads();
        if (const char* env = std::getenv("FWDA_THREADS")) {
            try {
                const int cap = std::stoi(env);
                if (cap >= 1 && cap < budget) budget = cap;
            } catch (...) {
                // unparsable: keep the default
            }
        }
        return budget < 1 ? 1 : budget;
    }();
    return cached;
#else
    return 1;
#endif
}

}  // namespace fwda::parallel
