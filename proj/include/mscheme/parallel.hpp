#ifndef MSCHEME_PARALLEL_HPP
#define MSCHEME_PARALLEL_HPP

#include <functional>

namespace mscheme {

// Thread count for scan evaluation: MSCHEME_THREADS when set, otherwise the
// available hardware parallelism.
int scan_thread_count();

// Runs fn(0..n-1) across threads. Results must be written into
// index-addressed slots so assembly stays deterministic. If any call throws,
// the exception from the lowest failing index is rethrown.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace mscheme

#endif
