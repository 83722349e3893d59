#pragma once

namespace fwda::parallel {

// Thread budget for the OpenMP kernels. FWDA_THREADS caps the OpenMP
// default; 0, unset, or unparsable means "use the default". Always 1 when
// built without OpenMP.
int max_threads();

}  // namespace fwda::parallel
