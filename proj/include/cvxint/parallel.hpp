#pragma once

#include <cstddef>
#include <functional>

namespace cvxint {

// Worker count: CVXINT_THREADS if set, else hardware concurrency.
unsigned worker_count();

// Static contiguous chunks; fn(i) for i in [0, n). Callers that reduce
// must write per-index results and fold them in index order afterwards.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace cvxint
