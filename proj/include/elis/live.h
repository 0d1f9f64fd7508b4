#ifndef ELIS_LIVE_H_
#define ELIS_LIVE_H_

#include <span>

#include "elis/metrics.h"
#include "elis/scheduler.h"

namespace elis::scheduler {

struct LiveOptions {
  // Wall-clock seconds per simulated second; 0.001 replays a 1000 s
  // workload in one second.
  double time_scale = 0.001;
};

// Runs the scheduler with its sub-procedures (intake, prioritization,
// per-node batching and execution, output handling) as concurrent tasks that
// exchange work through the pool, the per-node buffers and an output queue.
// Window execution sleeps for the modelled duration. Timings are reported
// in simulated milliseconds and are not reproducible between runs.
metrics::ExperimentResult RunLive(std::span<const PromptSpec> prompts, const RunConfig& config,
                                  const LiveOptions& options = {});

}  // namespace elis::scheduler

#endif  // ELIS_LIVE_H_
