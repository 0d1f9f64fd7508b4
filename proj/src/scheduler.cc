#include "elis/scheduler.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <queue>
#include <sstream>
#include <utility>

#include <fmt/format.h>

// Needed by the SJF oracle key and the end-of-run conservation check only.
#include "elis/ground_truth.h"

namespace elis::scheduler {

std::string_view ToString(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kFcfs:
      return "fcfs";
    case PolicyKind::kSjf:
      return "sjf";
    case PolicyKind::kIsrtf:
      return "isrtf";
  }
  return "?";
}

PolicyKind ParsePolicy(std::string_view name) {
  if (name == "fcfs") return PolicyKind::kFcfs;
  if (name == "sjf") return PolicyKind::kSjf;
  if (name == "isrtf") return PolicyKind::kIsrtf;
  throw std::invalid_argument(fmt::format("unknown policy '{}'", name));
}

DuplicateId::DuplicateId(JobId id)
    : std::invalid_argument(fmt::format("duplicate job id {}", ToUnderlying(id))) {}

Scheduler::Scheduler(SchedulerConfig config, std::vector<WorkerProfile> workers)
    : config_(std::move(config)), state_(std::move(workers)) {
  if (state_.worker_count() == 0) throw std::invalid_argument("at least one worker required");
  if (config_.window < 1) throw std::invalid_argument("window must be at least one token");
  for (const auto& p : state_.profiles) {
    if (p.max_batch < 1 || p.preempt_capacity < 1) {
      throw std::invalid_argument(
          fmt::format("worker {} needs max_batch and preempt_capacity >= 1", p.name));
    }
  }
  if (config_.policy.aging && config_.policy.aging->boost_after < 1) {
    throw std::invalid_argument("aging boost_after must be at least 1");
  }
  buffers_.resize(state_.worker_count());
}

Job& Scheduler::Submit(const PromptSpec& prompt) {
  const auto raw = ToUnderlying(prompt.id());
  if (index_.contains(raw)) throw DuplicateId(prompt.id());

  const auto least = std::min_element(state_.assigned.begin(), state_.assigned.end());
  const auto node = static_cast<WorkerIndex>(least - state_.assigned.begin());

  index_.emplace(raw, jobs_.size());
  Job& job = jobs_.emplace_back(prompt);
  job.node = node;
  ++state_.assigned[node];
  pool_.push_back(jobs_.size() - 1);
  ++ops_.pool_pushes;
  return job;
}

double Scheduler::ComputePriority(Job& job) {
  switch (config_.policy.kind) {
    case PolicyKind::kFcfs: {
      ground_truth::DenyScope deny;
      return job.t_arrival.ms();
    }
    case PolicyKind::kSjf:
      return static_cast<double>(ground_truth::OutputLength(job.prompt));
    case PolicyKind::kIsrtf: {
      std::optional<ground_truth::DenyScope> deny;
      if (!config_.predictor.ReadsGroundTruth()) deny.emplace();
      ++ops_.predictions;
      return job.priority ? config_.predictor.Iter(job) : config_.predictor.Init(job);
    }
  }
  return 0.0;
}

std::size_t Scheduler::PrioritizePool(SimTime now) {
  std::size_t moved = 0;
  while (!pool_.empty()) {
    const std::size_t slot = pool_.front();
    pool_.pop_front();
    Job& job = jobs_[slot];
    try {
      job.priority = ComputePriority(job);
    } catch (const predictor::MissingTracePrediction&) {
      dead_letters_.push_back(job.id);
      --state_.assigned[*job.node];
      continue;
    }
    Transition(job, JobState::kBuffered, now);
    buffers_[*job.node].push_back(slot);
    ++moved;
  }
  for (WorkerIndex n = 0; n < buffers_.size(); ++n) state_.queue_depth[n] = buffers_[n].size();
  return moved;
}

double Scheduler::EffectiveKey(const Job& job) const {
  const double base = job.priority.value_or(0.0);
  if (!config_.policy.aging) return base;
  const auto& aging = *config_.policy.aging;
  const double boosts = std::floor(static_cast<double>(job.windows_waited) / aging.boost_after);
  return std::max(0.0, base - aging.boost_amount * boosts);
}

void Scheduler::SortBuffer(std::vector<std::size_t>& slots) const {
  std::vector<std::pair<double, std::size_t>> keyed;
  keyed.reserve(slots.size());
  for (const std::size_t s : slots) keyed.emplace_back(EffectiveKey(jobs_[s]), s);
  std::sort(keyed.begin(), keyed.end(), [&](const auto& a, const auto& b) {
    ++ops_.comparisons;
    if (a.first != b.first) return a.first < b.first;
    const Job& ja = jobs_[a.second];
    const Job& jb = jobs_[b.second];
    if (ja.t_arrival != jb.t_arrival) return ja.t_arrival < jb.t_arrival;
    return ToUnderlying(ja.id) < ToUnderlying(jb.id);
  });
  for (std::size_t i = 0; i < keyed.size(); ++i) slots[i] = keyed[i].second;
}

std::vector<JobId> Scheduler::FormBatch(WorkerIndex node, SimTime now) {
  auto& buf = buffers_.at(node);
  if (buf.empty()) return {};
  SortBuffer(buf);
  const std::size_t take = std::min(buf.size(), state_.profiles[node].max_batch);
  std::vector<JobId> batch;
  batch.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    Job& job = jobs_[buf[i]];
    Transition(job, JobState::kRunning, now);
    job.windows_waited = 0;
    batch.push_back(job.id);
  }
  buf.erase(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(take));
  for (const std::size_t s : buf) ++jobs_[s].windows_waited;
  state_.queue_depth[node] = buf.size();
  ++ops_.batches;
  return batch;
}

std::vector<JobId> Scheduler::ApplyPreemption(WorkerIndex node, std::span<const JobId> batch,
                                              SimTime now, std::vector<JobId>* victims) {
  std::vector<backend::Resident> resident;
  resident.reserve(batch.size());
  for (const JobId id : batch) {
    const Job& j = job(id);
    resident.push_back({id, EffectiveKey(j), j.t_arrival});
  }
  const auto evicted = backend::MaybePreempt(state_.profiles[node], resident);
  if (evicted.empty()) return {batch.begin(), batch.end()};

  for (const JobId id : evicted) {
    Job& j = job(id);
    Transition(j, JobState::kPreempted, now);
    ++j.preemptions;
    j.needs_prefill = true;
    Transition(j, JobState::kBuffered, now);
    buffers_[node].push_back(Slot(id));
  }
  state_.queue_depth[node] = buffers_[node].size();
  if (victims) victims->insert(victims->end(), evicted.begin(), evicted.end());

  std::vector<JobId> survivors;
  for (const JobId id : batch) {
    if (std::find(evicted.begin(), evicted.end(), id) == evicted.end()) survivors.push_back(id);
  }
  return survivors;
}

void Scheduler::HandleOutput(const backend::WindowResult& result, SimTime now) {
  for (const auto& entry : result.entries) {
    Job& j = job(entry.id);
    j.generated += entry.tokens;
    ++j.windows;
    j.needs_prefill = false;
    if (entry.finished) {
      Transition(j, JobState::kFinished, now);
      --state_.assigned[*j.node];
      ++finished_;
    } else {
      Transition(j, JobState::kPooled, now);
      pool_.push_back(Slot(entry.id));
      ++ops_.pool_pushes;
    }
  }
}

std::size_t Scheduler::Slot(JobId id) const {
  const auto it = index_.find(ToUnderlying(id));
  if (it == index_.end()) {
    throw std::out_of_range(fmt::format("unknown job {}", ToUnderlying(id)));
  }
  return it->second;
}

Job& Scheduler::job(JobId id) { return jobs_[Slot(id)]; }
const Job& Scheduler::job(JobId id) const { return jobs_[Slot(id)]; }

std::vector<JobId> Scheduler::pool() const {
  std::vector<JobId> out;
  for (const std::size_t s : pool_) out.push_back(jobs_[s].id);
  return out;
}

std::vector<JobId> Scheduler::buffer(WorkerIndex node) const {
  std::vector<JobId> out;
  for (const std::size_t s : buffers_.at(node)) out.push_back(jobs_[s].id);
  return out;
}

std::vector<JobId> Scheduler::BufferOrder(WorkerIndex node) const {
  auto slots = buffers_.at(node);
  SortBuffer(slots);
  std::vector<JobId> out;
  for (const std::size_t s : slots) out.push_back(jobs_[s].id);
  return out;
}

bool Scheduler::Idle() const {
  return pool_.empty() &&
         std::all_of(buffers_.begin(), buffers_.end(), [](const auto& b) { return b.empty(); });
}

void Scheduler::CheckGlobalState() const {
  if (state_.TotalAssigned() != unresolved_count()) {
    throw InvariantViolation(fmt::format("load accounting drifted: assigned={} unresolved={}",
                                         state_.TotalAssigned(), unresolved_count()));
  }
}

std::string Scheduler::DebugDump() const {
  std::ostringstream os;
  os << "pool=" << pool_.size() << " finished=" << finished_
     << " dead=" << dead_letters_.size() << '\n';
  for (WorkerIndex n = 0; n < buffers_.size(); ++n) {
    os << "worker " << n << " (" << state_.profiles[n].name
       << "): assigned=" << state_.assigned[n] << " buffered=" << buffers_[n].size() << '\n';
  }
  for (const Job& j : jobs_) {
    if (j.state == JobState::kFinished) continue;
    os << "  job " << ToUnderlying(j.id) << " state=" << ToString(j.state)
       << " generated=" << j.generated << " node=" << j.node.value_or(0) << '\n';
  }
  return os.str();
}

metrics::ExperimentResult Run(std::span<const PromptSpec> prompts, const RunConfig& config) {
  Scheduler sched(config.scheduler, config.workers);
  const std::size_t workers = config.workers.size();

  std::vector<std::size_t> order(prompts.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return prompts[a].arrival_time() < prompts[b].arrival_time();
  });

  metrics::ExperimentResult result;
  result.workers.resize(workers);
  std::vector<backend::WindowResult> pending(workers);
  std::vector<bool> busy(workers, false);
  using Completion = std::pair<SimTime, WorkerIndex>;
  std::priority_queue<Completion, std::vector<Completion>, std::greater<>> completions;

  std::size_t next = 0;
  std::vector<const Job*> batch_jobs;
  while (next < order.size() || !completions.empty()) {
    SimTime now = SimTime::Infinite();
    if (!completions.empty()) now = completions.top().first;
    if (next < order.size()) now = std::min(now, prompts[order[next]].arrival_time());

    while (!completions.empty() && completions.top().first == now) {
      const WorkerIndex w = completions.top().second;
      completions.pop();
      for (const auto& e : pending[w].entries) result.workers[w].tokens += e.tokens;
      sched.HandleOutput(pending[w], now);
      busy[w] = false;
    }
    while (next < order.size() && prompts[order[next]].arrival_time() == now) {
      sched.Submit(prompts[order[next]]);
      ++next;
    }

    sched.PrioritizePool(now);
    for (WorkerIndex w = 0; w < workers; ++w) {
      if (busy[w]) continue;
      const auto formed = sched.FormBatch(w, now);
      if (formed.empty()) continue;
      std::vector<JobId> victims;
      const auto survivors = sched.ApplyPreemption(w, formed, now, &victims);
      if (survivors.empty()) continue;
      batch_jobs.clear();
      for (const JobId id : survivors) batch_jobs.push_back(&sched.job(id));
      pending[w] = backend::ExecWindow(config.workers[w], batch_jobs, config.scheduler.window);
      pending[w].preempted = std::move(victims);
      busy[w] = true;
      result.workers[w].busy_ms += pending[w].duration.ms();
      ++result.workers[w].windows;
      completions.emplace(now + config.scheduler.decision_overhead + pending[w].duration, w);
    }
    ++sched.mutable_ops().iterations;
    sched.CheckGlobalState();

    if (completions.empty() && next == order.size() && sched.unresolved_count() > 0) {
      throw Deadlock("simulation cannot advance with work remaining\n" + sched.DebugDump());
    }
  }

  return Collect(sched, prompts.size(), std::move(result.workers));
}

metrics::ExperimentResult Collect(const Scheduler& sched, std::size_t submitted,
                                  std::vector<metrics::WorkerStats> workers) {
  metrics::ExperimentResult result;
  result.workers = std::move(workers);
  std::vector<std::uint64_t> finished_tokens(result.workers.size(), 0);
  for (const Job& j : sched.jobs()) {
    if (j.state != JobState::kFinished) continue;
    const TokenCount truth = ground_truth::OutputLength(j.prompt);
    if (j.generated != truth) {
      throw InvariantViolation(
          fmt::format("job {} finished with {} tokens", ToUnderlying(j.id), j.generated));
    }
    finished_tokens.at(*j.node) += truth;
    result.jobs.push_back(metrics::RecordFor(j));
  }
  for (WorkerIndex w = 0; w < result.workers.size(); ++w) {
    if (result.workers[w].tokens != finished_tokens[w]) {
      throw InvariantViolation(fmt::format("worker {} produced {} tokens but finished jobs hold {}",
                                           w, result.workers[w].tokens, finished_tokens[w]));
    }
  }
  if (result.jobs.size() + sched.dead_letters().size() != submitted ||
      sched.jobs().size() != submitted) {
    throw InvariantViolation("jobs lost or duplicated during the run");
  }
  std::sort(result.jobs.begin(), result.jobs.end(), [](const auto& a, const auto& b) {
    return ToUnderlying(a.id) < ToUnderlying(b.id);
  });
  result.summary = metrics::Summarize(result.jobs);
  result.ops = sched.ops();
  result.dead_letters = sched.dead_letters();
  for (const auto& r : result.jobs) result.makespan_ms = std::max(result.makespan_ms, r.finish_ms);
  return result;
}

}  // namespace elis::scheduler
