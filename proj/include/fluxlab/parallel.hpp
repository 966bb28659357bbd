#pragma once

#include <cstddef>
#include <functional>

namespace fluxlab {

/// Runs fn(i) for i in [0, count) on up to `jobs` threads (jobs <= 1 runs inline).
/// Work is handed out by index; results must be written to per-index slots.
/// The first exception thrown by any worker is rethrown after all threads join.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn);

/// Worker count from a user value: 0 means hardware concurrency.
std::size_t resolve_jobs(std::size_t requested);

} // namespace fluxlab
