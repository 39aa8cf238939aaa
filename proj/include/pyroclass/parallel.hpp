#pragma once

namespace pyroclass {

/// Applies the PYROCLASS_THREADS environment cap to the OpenMP runtime.
/// Unset or invalid values leave the default (hardware concurrency).
/// Returns the resulting maximum thread count.
int configure_threads_from_env();

int max_threads();

}  // namespace pyroclass
