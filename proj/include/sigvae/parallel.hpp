#pragma once

namespace sigvae {

/// Caps OpenMP worker threads; 0 restores the runtime default.
void set_thread_cap(int threads);
/// Reads SIGVAE_THREADS and applies it via set_thread_cap.
void apply_thread_env();
int max_threads();

}  // namespace sigvae
