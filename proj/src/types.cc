#include "elis/types.h"

#include <numeric>
#include <sstream>
#include <utility>

#include "elis/ground_truth.h"

namespace elis {

namespace {

thread_local int deny_depth = 0;

bool Legal(JobState from, JobState to) {
  switch (from) {
    case JobState::kPooled:
      return to == JobState::kBuffered;
    case JobState::kBuffered:
      return to == JobState::kRunning;
    case JobState::kRunning:
      return to == JobState::kPooled || to == JobState::kPreempted ||
             to == JobState::kFinished;
    case JobState::kPreempted:
      return to == JobState::kBuffered;
    case JobState::kFinished:
      return false;
  }
  return false;
}

std::string TransitionMessage(JobId id, JobState from, JobState to) {
  std::ostringstream os;
  os << "illegal transition for job " << ToUnderlying(id) << ": "
     << ToString(from) << " -> " << ToString(to);
  return os.str();
}

}  // namespace

namespace ground_truth {

TokenCount OutputLength(const PromptSpec& prompt) {
#ifdef ELIS_GROUND_TRUTH_AUDIT
  if (deny_depth > 0) {
    throw LeakDetected("true output length of job " +
                       std::to_string(ToUnderlying(prompt.id())) +
                       " read inside a non-oracle scheduling decision");
  }
#endif
  return prompt.true_output_len_;
}

DenyScope::DenyScope() { ++deny_depth; }
DenyScope::~DenyScope() { --deny_depth; }

bool AuditEnabled() {
#ifdef ELIS_GROUND_TRUTH_AUDIT
  return true;
#else
  return false;
#endif
}

}  // namespace ground_truth

PromptSpec::PromptSpec(JobId id, SimTime arrival, TokenCount input_len,
                       TokenCount true_output_len, std::string source_tag)
    : id_(id),
      arrival_(arrival),
      input_len_(input_len),
      true_output_len_(true_output_len),
      source_tag_(std::move(source_tag)) {
  if (input_len_ < 1 || true_output_len_ < 1) {
    throw std::invalid_argument("prompt lengths must be at least one token");
  }
  if (!(arrival_.ms() >= 0.0)) {
    throw std::invalid_argument("prompt arrival time must be non-negative");
  }
}

std::string_view ToString(JobState state) {
  switch (state) {
    case JobState::kPooled:
      return "Pooled";
    case JobState::kBuffered:
      return "Buffered";
    case JobState::kRunning:
      return "Running";
    case JobState::kPreempted:
      return "Preempted";
    case JobState::kFinished:
      return "Finished";
  }
  return "?";
}

IllegalTransition::IllegalTransition(JobId id, JobState from, JobState to)
    : std::logic_error(TransitionMessage(id, from, to)) {}

Job::Job(PromptSpec p)
    : id(p.id()),
      prompt(std::move(p)),
      t_arrival(prompt.arrival_time()),
      state_since(prompt.arrival_time()) {}

void Transition(Job& job, JobState next, SimTime now) {
  if (!Legal(job.state, next) || now < job.state_since) {
    throw IllegalTransition(job.id, job.state, next);
  }
  const TokenCount total = ground_truth::OutputLength(job.prompt);
  if (job.generated > total) {
    throw IllegalTransition(job.id, job.state, next);
  }
  if (next == JobState::kFinished && job.generated != total) {
    throw IllegalTransition(job.id, job.state, next);
  }
  if (next == JobState::kPooled && job.generated == total) {
    throw IllegalTransition(job.id, job.state, next);
  }

  const SimTime spent = now - job.state_since;
  if (job.state == JobState::kRunning) {
    job.service_accum += spent;
  } else {
    job.queue_wait_accum += spent;
  }

  if (next == JobState::kRunning && !job.t_first_exec) {
    job.t_first_exec = now;
  }
  if (next == JobState::kFinished) {
    job.t_finish = now;
  }
  job.state = next;
  job.state_since = now;
}

double WorkerProfile::EffectiveTpot(std::size_t batch_size) const {
  const double extra = batch_size > 0 ? static_cast<double>(batch_size - 1) : 0.0;
  return tpot_ms * (1.0 + batch_slowdown_coeff * extra);
}

GlobalState::GlobalState(std::vector<WorkerProfile> workers)
    : profiles(std::move(workers)),
      assigned(profiles.size(), 0),
      queue_depth(profiles.size(), 0) {}

std::size_t GlobalState::TotalAssigned() const {
  return std::accumulate(assigned.begin(), assigned.end(), std::size_t{0});
}

}  // namespace elis
