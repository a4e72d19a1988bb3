#pragma once

#include <cstddef>
#include <functional>

namespace deepbf {

/// Worker count: hardware concurrency, capped by DEEPBF_THREADS when set.
std::size_t worker_count();

/// Calls fn(i) for i in [0, count), possibly from several threads. Callers
/// give each index its own RNG substream and output slot, so results do not
/// depend on the worker count. The exception of the lowest failing index is
/// rethrown.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

} // namespace deepbf
