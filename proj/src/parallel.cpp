#include "harness/parallel.hpp"

#include <cstdlib>
#include <string>

namespace harness {

int thread_limit() {
  int available = 1;
#ifdef _OPENMP
  available = omp_get_max_threads();
#endif
  if (const char* env = std::getenv("HARNESS_LAB_THREADS")) {
    try {
      const int cap = std::stoi(env);
      if (cap > 0 && cap < available) return cap;
    } catch (const std::exception&) {
      // ignored: malformed values fall back to the runtime default
    }
  }
  return available;
}

}  // namespace harness
