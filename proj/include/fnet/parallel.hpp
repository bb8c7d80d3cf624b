#pragma once

#include <cstddef>
#include <functional>

namespace fnet {

/// Caps the worker pool used by parallel_for. 0 selects the number of
/// logical cores. Safe to call between (not during) parallel regions.
void set_thread_count(std::size_t threads);
std::size_t thread_count();

/// Runs body(i) for every i in [0, n). Each index must write disjoint
/// output; callers get identical results for any thread count because the
/// work split never changes what a single index computes.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace fnet
