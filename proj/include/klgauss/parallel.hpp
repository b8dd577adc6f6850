#pragma once

#include <cstddef>
#include <functional>

namespace klgauss {

/// Number of worker threads used by library loops. Defaults to the number of
/// logical cores; 1 runs everything on the calling thread.
int worker_count();
void set_worker_count(int jobs);

/// Runs body(i) for i in [0, count). Each index is processed exactly once;
/// callers write results into per-index slots so output order never depends
/// on scheduling. Exceptions from workers are rethrown on the calling thread
/// (the one with the lowest index wins).
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace klgauss
