#pragma once

#include <cstddef>
#include <functional>

namespace raildelay {

// Global worker-count cap used by parallel_for. 0 means hardware
// concurrency. The CLI --threads flag sets this once at startup.
void set_max_threads(int n);
int max_threads();

// Runs fn(i) for i in [0, n). Workers write to disjoint slots chosen by the
// caller; there is no internal reduction, so results are identical for any
// thread count. Exceptions from workers are rethrown on the caller.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace raildelay
