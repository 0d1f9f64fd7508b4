#include "elis/live.h"

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>
#include <utility>
#include <vector>

namespace elis::scheduler {

namespace {

using Clock = std::chrono::steady_clock;

class LiveRun {
 public:
  LiveRun(std::span<const PromptSpec> prompts, const RunConfig& config, const LiveOptions& options)
      : prompts_(prompts),
        config_(config),
        scale_(options.time_scale),
        sched_(config.scheduler, config.workers),
        stats_(config.workers.size()) {
    if (!(scale_ > 0.0)) throw std::invalid_argument("live time scale must be positive");
  }

  metrics::ExperimentResult Execute() {
    start_ = Clock::now();
    if (prompts_.empty()) return Collect(sched_, 0, std::move(stats_));
    {
      std::vector<std::jthread> tasks;
      tasks.emplace_back([this] { Guard([this] { Intake(); }); });
      tasks.emplace_back([this] { Guard([this] { Prioritize(); }); });
      tasks.emplace_back([this] { Guard([this] { HandleOutputs(); }); });
      for (WorkerIndex w = 0; w < config_.workers.size(); ++w) {
        tasks.emplace_back([this, w] { Guard([this, w] { Work(w); }); });
      }
    }
    if (error_) std::rethrow_exception(error_);
    return Collect(sched_, prompts_.size(), std::move(stats_));
  }

 private:
  template <typename F>
  void Guard(F&& body) {
    try {
      body();
    } catch (...) {
      std::lock_guard lock(mu_);
      if (!error_) error_ = std::current_exception();
      stop_ = true;
      cv_.notify_all();
    }
  }

  // Must be called with mu_ held so that successive readings are ordered.
  SimTime Now() const {
    const std::chrono::duration<double> wall = Clock::now() - start_;
    return SimTime(wall.count() / scale_ * 1000.0);
  }

  Clock::duration Wall(SimTime t) const {
    return std::chrono::duration_cast<Clock::duration>(
        std::chrono::duration<double>(t.seconds() * scale_));
  }

  void Intake() {
    std::vector<std::size_t> order(prompts_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return prompts_[a].arrival_time() < prompts_[b].arrival_time();
    });
    for (const std::size_t i : order) {
      std::this_thread::sleep_until(start_ + Wall(prompts_[i].arrival_time()));
      std::lock_guard lock(mu_);
      if (stop_) return;
      Job& job = sched_.Submit(prompts_[i]);
      // JCT runs from the moment the frontend actually took the request in.
      job.t_arrival = Now();
      job.state_since = job.t_arrival;
      cv_.notify_all();
    }
    std::lock_guard lock(mu_);
    intake_done_ = true;
    cv_.notify_all();
  }

  void Prioritize() {
    std::unique_lock lock(mu_);
    while (true) {
      cv_.wait(lock, [this] { return stop_ || sched_.pool_size() > 0; });
      if (stop_) return;
      sched_.PrioritizePool(Now());
      ++sched_.mutable_ops().iterations;
      MaybeFinish();
      cv_.notify_all();
    }
  }

  void Work(WorkerIndex w) {
    std::unique_lock lock(mu_);
    std::vector<const Job*> batch_jobs;
    while (true) {
      cv_.wait(lock, [&] { return stop_ || sched_.buffer_size(w) > 0; });
      if (stop_) return;
      const SimTime now = Now();
      const auto formed = sched_.FormBatch(w, now);
      std::vector<JobId> victims;
      const auto survivors = sched_.ApplyPreemption(w, formed, now, &victims);
      if (survivors.empty()) continue;
      batch_jobs.clear();
      for (const JobId id : survivors) batch_jobs.push_back(&sched_.job(id));
      backend::WindowResult result =
          backend::ExecWindow(config_.workers[w], batch_jobs, config_.scheduler.window);
      result.preempted = std::move(victims);
      const SimTime busy = config_.scheduler.decision_overhead + result.duration;

      lock.unlock();
      std::this_thread::sleep_for(Wall(busy));
      lock.lock();

      stats_[w].busy_ms += result.duration.ms();
      ++stats_[w].windows;
      for (const auto& e : result.entries) stats_[w].tokens += e.tokens;
      outputs_.push_back(std::move(result));
      cv_.notify_all();
      // Let the returned jobs be re-prioritized before forming the next batch.
      cv_.wait(lock, [&] { return stop_ || (outputs_.empty() && sched_.pool_size() == 0); });
      if (stop_) return;
    }
  }

  void HandleOutputs() {
    std::unique_lock lock(mu_);
    while (true) {
      cv_.wait(lock, [this] { return stop_ || !outputs_.empty() || Done(); });
      if (stop_) return;
      while (!outputs_.empty()) {
        sched_.HandleOutput(outputs_.front(), Now());
        outputs_.pop_front();
      }
      MaybeFinish();
      cv_.notify_all();
    }
  }

  bool Done() const { return intake_done_ && sched_.unresolved_count() == 0; }

  void MaybeFinish() {
    if (Done()) stop_ = true;
  }

  std::span<const PromptSpec> prompts_;
  const RunConfig& config_;
  double scale_;
  Scheduler sched_;
  std::vector<metrics::WorkerStats> stats_;
  std::deque<backend::WindowResult> outputs_;

  std::mutex mu_;
  std::condition_variable cv_;
  Clock::time_point start_;
  bool intake_done_ = false;
  bool stop_ = false;
  std::exception_ptr error_;
};

}  // namespace

metrics::ExperimentResult RunLive(std::span<const PromptSpec> prompts, const RunConfig& config,
                                  const LiveOptions& options) {
  LiveRun run(prompts, config, options);
  return run.Execute();
}

}  // namespace elis::scheduler
