#pragma once

#include <functional>

namespace downscale {

// Number of workers to use: `requested` when positive, otherwise the
// DOWNSCALE_OP_THREADS environment variable, otherwise the hardware
// concurrency (at least 1).
int resolve_thread_count(int requested);

// Run body(i) for i in [0, count) on a bounded pool. Each index runs exactly
// once; results must go into index-addressed slots so that reductions stay
// deterministic regardless of completion order. The first exception thrown
// by any task is rethrown on the caller after all workers stop.
void parallel_for(int count, int threads, const std::function<void(int)>& body);

}  // namespace downscale
