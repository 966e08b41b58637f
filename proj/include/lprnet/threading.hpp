#pragma once

namespace lprnet {

// Worker count used by the OpenMP kernels. Defaults to the machine
// parallelism, capped by the LPRNET_THREADS environment variable.
int effective_threads();

// Installs the cap process-wide (reads LPRNET_THREADS once).
void init_threading();

}  // namespace lprnet
