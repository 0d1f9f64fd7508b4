#ifndef ELIS_SCHEDULER_H_
#define ELIS_SCHEDULER_H_

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "elis/backend.h"
#include "elis/metrics.h"
#include "elis/predictor.h"
#include "elis/types.h"

namespace elis::scheduler {

enum class PolicyKind { kFcfs, kSjf, kIsrtf };

std::string_view ToString(PolicyKind kind);
PolicyKind ParsePolicy(std::string_view name);

// Starvation control: every `boost_after` windows spent waiting in the buffer
// lower the key by `boost_amount`, floored at zero.
struct Aging {
  std::uint32_t boost_after = 1;
  double boost_amount = 0.0;
};

struct Policy {
  PolicyKind kind = PolicyKind::kIsrtf;
  std::optional<Aging> aging;
};

struct SchedulerConfig {
  Policy policy;
  predictor::PredictorModel predictor;
  TokenCount window = predictor::kDefaultWindow;
  // Simulated cost of one scheduling decision, added before each window.
  SimTime decision_overhead;
};

class DuplicateId : public std::invalid_argument {
 public:
  explicit DuplicateId(JobId id);
};

class Deadlock : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Frontend scheduler state: the job pool, the load balancer, one priority
// buffer per worker node, the batcher and output handling. Single writer:
// callers serialize access.
class Scheduler {
 public:
  Scheduler(SchedulerConfig config, std::vector<WorkerProfile> workers);

  // Creates the job, assigns it to the least-loaded node (ties to the lowest
  // index) and pools it.
  Job& Submit(const PromptSpec& prompt);

  // Gives every pooled job a key under the active policy and moves it to
  // its node's buffer. Jobs whose prediction fails go to the dead-letter
  // list. Returns the number of jobs moved.
  std::size_t PrioritizePool(SimTime now);

  // Pops up to max_batch jobs for `node` in (key, arrival, id) order and
  // marks them Running. Empty when the node's buffer is empty.
  std::vector<JobId> FormBatch(WorkerIndex node, SimTime now);

  // Applies KV-capacity preemption to a formed batch. Victims go back to the
  // buffer with their progress and need a new prefill. Returns survivors.
  std::vector<JobId> ApplyPreemption(WorkerIndex node, std::span<const JobId> batch,
                                     SimTime now, std::vector<JobId>* victims = nullptr);

  // Applies a finished window: finished jobs complete, the rest return to
  // the pool for re-prioritization.
  void HandleOutput(const backend::WindowResult& result, SimTime now);

  Job& job(JobId id);
  const Job& job(JobId id) const;
  const std::vector<Job>& jobs() const { return jobs_; }
  std::vector<JobId> pool() const;
  std::size_t pool_size() const { return pool_.size(); }
  std::size_t buffer_size(WorkerIndex node) const { return buffers_.at(node).size(); }
  std::vector<JobId> buffer(WorkerIndex node) const;
  // Buffer contents in the order the batcher would take them now.
  std::vector<JobId> BufferOrder(WorkerIndex node) const;
  const GlobalState& global_state() const { return state_; }
  const std::vector<JobId>& dead_letters() const { return dead_letters_; }
  const metrics::OpCounts& ops() const { return ops_; }
  metrics::OpCounts& mutable_ops() { return ops_; }
  const SchedulerConfig& config() const { return config_; }

  std::size_t finished_count() const { return finished_; }
  std::size_t unresolved_count() const { return jobs_.size() - finished_ - dead_letters_.size(); }
  bool Idle() const;

  // Effective key: stored priority minus any aging boost.
  double EffectiveKey(const Job& job) const;
  // Checks the load accounting invariant; throws InvariantViolation.
  void CheckGlobalState() const;
  std::string DebugDump() const;

 private:
  double ComputePriority(Job& job);
  void SortBuffer(std::vector<std::size_t>& slots) const;
  std::size_t Slot(JobId id) const;

  SchedulerConfig config_;
  GlobalState state_;
  std::vector<Job> jobs_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
  std::deque<std::size_t> pool_;
  std::vector<std::vector<std::size_t>> buffers_;
  std::vector<JobId> dead_letters_;
  std::size_t finished_ = 0;
  mutable metrics::OpCounts ops_;
};

struct RunConfig {
  SchedulerConfig scheduler;
  std::vector<WorkerProfile> workers;
};

// Verifies end-of-run conservation (every produced token belongs to a
// finished job of the worker that produced it, no job lost or duplicated)
// and assembles the result.
metrics::ExperimentResult Collect(const Scheduler& sched, std::size_t submitted,
                                  std::vector<metrics::WorkerStats> workers);

// Discrete-event run to completion. Deterministic for a given input.
// Throws Deadlock if work remains but the clock cannot advance, and
// InvariantViolation if token conservation or load accounting break.
metrics::ExperimentResult Run(std::span<const PromptSpec> prompts, const RunConfig& config);

}  // namespace elis::scheduler

#endif  // ELIS_SCHEDULER_H_
