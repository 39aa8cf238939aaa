#include "pyroclass/parallel.hpp"

#include <omp.h>

#include <charconv>
#include <cstdlib>
#include <cstring>

#include "pyroclass/log.hpp"

namespace pyroclass {

int configure_threads_from_env() {
  if (const char* env = std::getenv("PYROCLASS_THREADS"); env != nullptr && *env != '\0') {
    int n = 0;
    const auto* end = env + std::strlen(env);
    auto [ptr, ec] = std::from_chars(env, end, n);
    if (ec == std::errc() && ptr == end && n >= 1) {
      omp_set_num_threads(n);
    } else {
      warn(std::string("ignoring invalid PYROCLASS_THREADS value '") + env + "'");
    }
  }
  return omp_get_max_threads();
}

int max_threads() { return omp_get_max_threads(); }

}  // namespace pyroclass
