#pragma once

#include <cstddef>
#include <functional>

namespace hopac {

/// Number of worker threads: `requested` if positive, else HOPAC_JOBS, else 1.
int resolve_jobs(int requested);

/// Calls body(i) for i in [0, count) on up to `jobs` threads. The first
/// exception thrown by any call is rethrown after all workers finish.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& body);

}  // namespace hopac
