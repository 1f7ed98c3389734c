#pragma once

#include <cstddef>
#include <functional>

namespace specdeform {

/// Worker count: SPECTRAL_DEFORM_THREADS when set to a positive integer,
/// otherwise the hardware concurrency.
std::size_t thread_count();

/// Runs body(i) for i in [0, n). Each index is processed exactly once and
/// bodies must only write to per-index state, so results do not depend on
/// scheduling. The first exception thrown by any body is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace specdeform
