#include "sigvae/parallel.hpp"

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sigvae {

namespace {
int default_threads() {
#ifdef _OPENMP
  static const int n = omp_get_max_threads();
  return n;
#else
  return 1;
#endif
}
}  // namespace

void set_thread_cap(int threads) {
#ifdef _OPENMP
  const int def = default_threads();
  omp_set_num_threads(threads > 0 ? threads : def);
#else
  (void)threads;
#endif
}

void apply_thread_env() {
  const char* env = std::getenv("SIGVAE_THREADS");
  if (env == nullptr || *env == '\0') return;
  try {
    set_thread_cap(std::stoi(env));
  } catch (const std::exception&) {
    // Unparseable values leave the runtime default in place.
  }
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace sigvae
