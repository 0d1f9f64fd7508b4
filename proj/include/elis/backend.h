#ifndef ELIS_BACKEND_H_
#define ELIS_BACKEND_H_

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "elis/types.h"

// Simulated continuous-batching worker: executes a batch one window at a
// time under a TTFT + TPOT latency model and evicts sequences when the KV
// capacity is exceeded.
namespace elis::backend {

class BatchTooLarge : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct WindowEntry {
  JobId id;
  TokenCount tokens = 0;
  bool finished = false;
};

struct WindowResult {
  std::vector<WindowEntry> entries;
  // Decode steps executed; every job in the batch advanced by this much.
  TokenCount tokens_processed = 0;
  SimTime duration;
  std::vector<JobId> preempted;
};

// Runs one window. The window stops after `window` tokens or as soon as the
// job with the fewest remaining tokens finishes, whichever comes first.
// Duration is the summed prefill of jobs that need one plus
// EffectiveTpot(|batch|) * tokens_processed. Jobs are not modified.
WindowResult ExecWindow(const WorkerProfile& profile, std::span<const Job* const> batch,
                        TokenCount window);

// A sequence holding KV cache on a worker.
struct Resident {
  JobId id;
  double priority = 0.0;
  SimTime arrival;
};

// Ids to evict so that at most profile.preempt_capacity sequences remain,
// lowest priority (largest key, then latest arrival, then largest id) first.
// The victims always form a suffix of the (key, arrival, id) order.
std::vector<JobId> MaybePreempt(const WorkerProfile& profile,
                                std::span<const Resident> resident);

struct BatchRamp {
  std::size_t start = 10;
  std::size_t step = 10;
  std::size_t max = 250;
};

// Sweeps the batch size over the ramp with a saturated job pool (the
// worker's batch is full and one more request is always waiting to be
// admitted) and returns the first size at which MaybePreempt evicts.
// nullopt means no preemption was observed within the ramp.
std::optional<std::size_t> ProfilePreemption(const WorkerProfile& profile,
                                             const BatchRamp& ramp = {});

}  // namespace elis::backend

#endif  // ELIS_BACKEND_H_
