#ifndef ELIS_TYPES_H_
#define ELIS_TYPES_H_

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "elis/sim_time.h"

namespace elis {

enum class JobId : std::uint64_t {};

constexpr std::uint64_t ToUnderlying(JobId id) {
  return static_cast<std::uint64_t>(id);
}

using WorkerIndex = std::size_t;
using TokenCount = std::uint32_t;

class PromptSpec;

namespace ground_truth {
// Declared here so PromptSpec can befriend it; include
// "elis/ground_truth.h" to call it.
TokenCount OutputLength(const PromptSpec& prompt);
}  // namespace ground_truth

// An arriving request. Immutable after construction. The true output length
// is not part of the public surface: only code that includes
// elis/ground_truth.h (oracle predictors, the backend, metrics) reads it.
class PromptSpec {
 public:
  PromptSpec(JobId id, SimTime arrival, TokenCount input_len,
             TokenCount true_output_len, std::string source_tag = {});

  JobId id() const { return id_; }
  SimTime arrival_time() const { return arrival_; }
  TokenCount input_len() const { return input_len_; }
  const std::string& source_tag() const { return source_tag_; }

 private:
  friend TokenCount ground_truth::OutputLength(const PromptSpec& prompt);

  JobId id_;
  SimTime arrival_;
  TokenCount input_len_;
  TokenCount true_output_len_;
  std::string source_tag_;
};

enum class JobState { kPooled, kBuffered, kRunning, kPreempted, kFinished };

std::string_view ToString(JobState state);

class IllegalTransition : public std::logic_error {
 public:
  IllegalTransition(JobId id, JobState from, JobState to);
};

// Scheduler-side record of one request.
struct Job {
  explicit Job(PromptSpec p);

  JobId id;
  PromptSpec prompt;
  std::optional<WorkerIndex> node;
  // Scheduling key; lower runs first. For ISRTF it is the predicted number of
  // remaining tokens.
  std::optional<double> priority;
  TokenCount generated = 0;
  JobState state = JobState::kPooled;

  SimTime t_arrival;
  std::optional<SimTime> t_first_exec;
  std::optional<SimTime> t_finish;
  SimTime queue_wait_accum;
  SimTime service_accum;
  SimTime state_since;

  std::uint32_t windows = 0;
  std::uint32_t preemptions = 0;
  // Window boundaries on the job's node seen while it sat in the buffer.
  std::uint32_t windows_waited = 0;
  // Set until the first prefill and again after each KV eviction.
  bool needs_prefill = true;
};

// Moves `job` along the lifecycle
//   Pooled -> Buffered -> Running -> {Pooled, Preempted, Finished}
//   Preempted -> Buffered
// and keeps the timestamp and wait/service accumulators in step with `now`.
// Throws IllegalTransition on any other edge, on a clock that runs
// backwards, or when the Finished/Pooled choice disagrees with the job's
// progress.
void Transition(Job& job, JobState next, SimTime now);

// Latency and capacity parameters of one backend model.
struct WorkerProfile {
  std::string name;
  std::string model_name;
  double ttft_ms = 0.0;
  double tpot_ms = 0.0;
  double batch_slowdown_coeff = 0.0;
  std::size_t max_batch = 4;
  std::size_t preempt_capacity = std::numeric_limits<std::size_t>::max();
  double avg_latency_ms = 0.0;

  // tpot_ms * (1 + c * (b - 1)).
  double EffectiveTpot(std::size_t batch_size) const;
};

// Per-worker bookkeeping visible to the load balancer.
struct GlobalState {
  explicit GlobalState(std::vector<WorkerProfile> workers);

  std::size_t worker_count() const { return profiles.size(); }
  std::size_t TotalAssigned() const;

  std::vector<WorkerProfile> profiles;
  // Jobs assigned to the worker and not yet finished.
  std::vector<std::size_t> assigned;
  // Jobs currently waiting in the worker's priority buffer.
  std::vector<std::size_t> queue_depth;
};

}  // namespace elis

#endif  // ELIS_TYPES_H_
