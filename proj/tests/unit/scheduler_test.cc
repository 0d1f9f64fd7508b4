#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "elis/ground_truth.h"
#include "elis/live.h"
#include "elis/rng.h"
#include "elis/scheduler.h"
#include "elis/workload.h"
#include "test_util.h"

namespace elis::scheduler {
namespace {

using testing::Config;
using testing::Prompt;
using testing::Worker;

SchedulerConfig Sched(PolicyKind kind, predictor::Variant model = predictor::Oracle{}) {
  SchedulerConfig c;
  c.policy.kind = kind;
  c.predictor = predictor::PredictorModel(std::move(model));
  return c;
}

std::vector<std::uint64_t> Raw(const std::vector<JobId>& ids) {
  std::vector<std::uint64_t> out;
  for (const JobId id : ids) out.push_back(ToUnderlying(id));
  return out;
}

// Runs one window on `node` and feeds the result back.
backend::WindowResult Step(Scheduler& s, WorkerIndex node, SimTime now) {
  const auto batch = s.FormBatch(node, now);
  std::vector<const Job*> jobs;
  for (const JobId id : batch) jobs.push_back(&s.job(id));
  auto r = backend::ExecWindow(s.global_state().profiles[node], jobs, s.config().window);
  s.HandleOutput(r, now + r.duration);
  return r;
}

TEST(Submit, PicksLeastLoadedWorker) {
  Scheduler s(Sched(PolicyKind::kFcfs), {Worker(2), Worker(2), Worker(2)});
  // Round-robin fill gives [3, 3, 3]; job 5 on worker 2 is long.
  for (std::uint64_t i = 0; i < 9; ++i) s.Submit(Prompt(i, 0, i == 5 ? 500 : 10));
  s.PrioritizePool(SimTime(0));
  Step(s, 1, SimTime(0));
  Step(s, 2, SimTime(0));
  EXPECT_EQ(s.global_state().assigned, (std::vector<std::size_t>{3, 1, 2}));
  EXPECT_EQ(*s.Submit(Prompt(100, 1, 10)).node, 1u);
}

TEST(Submit, TiesGoToLowestIndex) {
  Scheduler s(Sched(PolicyKind::kFcfs), {Worker(), Worker(), Worker()});
  for (std::uint64_t i = 0; i < 6; ++i) s.Submit(Prompt(i, 0, 10));
  EXPECT_EQ(s.global_state().assigned, (std::vector<std::size_t>{2, 2, 2}));
  EXPECT_EQ(*s.Submit(Prompt(6, 0, 10)).node, 0u);
}

TEST(Submit, BalancesUniformStream) {
  Scheduler s(Sched(PolicyKind::kFcfs), {Worker(), Worker(), Worker(), Worker()});
  for (std::uint64_t i = 0; i < 100; ++i) s.Submit(Prompt(i, 0, 10));
  EXPECT_EQ(s.global_state().assigned, (std::vector<std::size_t>{25, 25, 25, 25}));
}

TEST(Submit, RejectsDuplicateIds) {
  Scheduler s(Sched(PolicyKind::kFcfs), {Worker()});
  s.Submit(Prompt(1, 0, 10));
  EXPECT_THROW(s.Submit(Prompt(1, 0, 10)), DuplicateId);
}

TEST(PrioritizePool, IsrtfOrdersByRemaining) {
  Scheduler s(Sched(PolicyKind::kIsrtf), {Worker()});
  s.Submit(Prompt(1, 0, 30));
  s.Submit(Prompt(2, 0, 200));
  s.Submit(Prompt(3, 0, 10));
  EXPECT_EQ(s.PrioritizePool(SimTime(0)), 3u);
  EXPECT_EQ(s.pool_size(), 0u);
  EXPECT_EQ(Raw(s.BufferOrder(0)), (std::vector<std::uint64_t>{3, 1, 2}));
}

TEST(PrioritizePool, FcfsOrdersByArrival) {
  Scheduler s(Sched(PolicyKind::kFcfs), {Worker()});
  s.Submit(Prompt(5, 5000, 10));
  s.Submit(Prompt(1, 1000, 10));
  s.Submit(Prompt(3, 3000, 10));
  s.PrioritizePool(SimTime(5000));
  EXPECT_EQ(Raw(s.BufferOrder(0)), (std::vector<std::uint64_t>{1, 3, 5}));
}

TEST(PrioritizePool, SjfOrdersByTrueTotal) {
  Scheduler s(Sched(PolicyKind::kSjf), {Worker()});
  s.Submit(Prompt(1, 0, 300));
  s.Submit(Prompt(2, 0, 20));
  s.Submit(Prompt(3, 0, 90));
  s.PrioritizePool(SimTime(0));
  EXPECT_EQ(Raw(s.BufferOrder(0)), (std::vector<std::uint64_t>{2, 3, 1}));
}

TEST(PrioritizePool, NoisyOrderReplays) {
  auto order = [] {
    Scheduler s(Sched(PolicyKind::kIsrtf,
                      predictor::NoisyIterative{predictor::MaeSchedule::Default(), 42}),
                {Worker()});
    for (std::uint64_t i = 0; i < 50; ++i) s.Submit(Prompt(i, 0, 100));
    s.PrioritizePool(SimTime(0));
    return Raw(s.BufferOrder(0));
  };
  const auto first = order();
  EXPECT_EQ(first, order());
  std::vector<std::uint64_t> ids(50);
  std::iota(ids.begin(), ids.end(), 0);
  EXPECT_NE(first, ids);
}

TEST(PrioritizePool, TiesBreakByArrivalThenId) {
  Scheduler s(Sched(PolicyKind::kIsrtf, predictor::Constant{50}), {Worker()});
  s.Submit(Prompt(9, 10, 10));
  s.Submit(Prompt(4, 20, 10));
  s.Submit(Prompt(2, 20, 10));
  s.PrioritizePool(SimTime(20));
  EXPECT_EQ(Raw(s.BufferOrder(0)), (std::vector<std::uint64_t>{9, 2, 4}));
}

TEST(PrioritizePool, MissingPredictionGoesToDeadLetters) {
  std::istringstream in("job_id,step,predicted_total\n1,0,40\n");
  Scheduler s(Sched(PolicyKind::kIsrtf, predictor::ReadTraceDriven(in)), {Worker()});
  s.Submit(Prompt(1, 0, 40));
  s.Submit(Prompt(2, 0, 40));
  EXPECT_EQ(s.PrioritizePool(SimTime(0)), 1u);
  EXPECT_EQ(Raw(s.dead_letters()), (std::vector<std::uint64_t>{2}));
  EXPECT_EQ(s.global_state().TotalAssigned(), 1u);
  s.CheckGlobalState();
}

TEST(FormBatch, TakesPrefixOfOrder) {
  Scheduler s(Sched(PolicyKind::kIsrtf), {Worker(2)});
  s.Submit(Prompt(1, 0, 400));
  s.Submit(Prompt(2, 0, 30));
  s.Submit(Prompt(3, 0, 10));
  s.Submit(Prompt(4, 0, 200));
  s.PrioritizePool(SimTime(0));
  const auto batch = s.FormBatch(0, SimTime(0));
  EXPECT_EQ(Raw(batch), (std::vector<std::uint64_t>{3, 2}));
  for (const JobId id : batch) EXPECT_EQ(s.job(id).state, JobState::kRunning);
  EXPECT_EQ(s.buffer_size(0), 2u);
}

TEST(FormBatch, UnderfullBatch) {
  Scheduler s(Sched(PolicyKind::kFcfs), {Worker(4)});
  s.Submit(Prompt(1, 0, 10));
  s.PrioritizePool(SimTime(0));
  EXPECT_EQ(s.FormBatch(0, SimTime(0)).size(), 1u);
  EXPECT_TRUE(s.FormBatch(0, SimTime(0)).empty());
}

TEST(FormBatch, DrawsOnlyFromOwnNode) {
  Scheduler s(Sched(PolicyKind::kFcfs), {Worker(4), Worker(4)});
  for (std::uint64_t i = 0; i < 8; ++i) s.Submit(Prompt(i, static_cast<double>(i), 10));
  s.PrioritizePool(SimTime(8));
  for (WorkerIndex node : {0u, 1u}) {
    for (const JobId id : s.FormBatch(node, SimTime(8))) EXPECT_EQ(*s.job(id).node, node);
  }
}

TEST(FormBatch, ComparisonsAreLinearithmic) {
  for (const std::size_t n : {64u, 512u, 4096u}) {
    Scheduler s(Sched(PolicyKind::kIsrtf,
                      predictor::NoisyIterative{predictor::MaeSchedule({300.0}), 1}),
                {Worker(4)});
    for (std::uint64_t i = 0; i < n; ++i) s.Submit(Prompt(i, 0, 50 + (i * 7919) % 1000));
    s.PrioritizePool(SimTime(0));
    const auto before = s.ops().comparisons;
    s.FormBatch(0, SimTime(0));
    const double cmp = static_cast<double>(s.ops().comparisons - before);
    EXPECT_LE(cmp, 3.0 * n * std::log2(static_cast<double>(n))) << n;
    EXPECT_EQ(s.ops().predictions, n);
  }
}

TEST(HandleOutput, CompletionFinishesJob) {
  Scheduler s(Sched(PolicyKind::kFcfs), {Worker()});
  s.Submit(Prompt(1, 0, 40));
  s.PrioritizePool(SimTime(0));
  const auto r = Step(s, 0, SimTime(0));
  const Job& j = s.job(JobId{1});
  EXPECT_EQ(j.state, JobState::kFinished);
  EXPECT_EQ(j.generated, 40u);
  EXPECT_DOUBLE_EQ(j.t_finish->ms(), r.duration.ms());
  EXPECT_EQ(s.finished_count(), 1u);
}

TEST(HandleOutput, PartialJobReturnsToPool) {
  Scheduler s(Sched(PolicyKind::kIsrtf), {Worker()});
  s.Submit(Prompt(1, 0, 120));
  s.PrioritizePool(SimTime(0));
  Step(s, 0, SimTime(0));
  const Job& j = s.job(JobId{1});
  EXPECT_EQ(j.state, JobState::kPooled);
  EXPECT_EQ(j.generated, 50u);
  EXPECT_EQ(Raw(s.pool()), (std::vector<std::uint64_t>{1}));
  s.PrioritizePool(SimTime(3000));
  EXPECT_DOUBLE_EQ(*s.job(JobId{1}).priority, 70.0);
}

TEST(HandleOutput, EarlyFinisherInFullBatch) {
  Scheduler s(Sched(PolicyKind::kFcfs), {Worker(4)});
  s.Submit(Prompt(1, 0, 20));
  for (std::uint64_t i = 2; i <= 4; ++i) s.Submit(Prompt(i, 0, 300));
  s.PrioritizePool(SimTime(0));
  Step(s, 0, SimTime(0));
  EXPECT_EQ(s.finished_count(), 1u);
  EXPECT_EQ(s.pool_size(), 3u);
  for (std::uint64_t i = 2; i <= 4; ++i) EXPECT_EQ(s.job(JobId{i}).generated, 20u);
}

TEST(Aging, LowersKeyOfWaitingJobs) {
  SchedulerConfig c = Sched(PolicyKind::kIsrtf);
  c.policy.aging = Aging{2, 30.0};
  Scheduler s(c, {Worker(1)});
  s.Submit(Prompt(1, 0, 100));
  s.Submit(Prompt(2, 0, 10));
  s.Submit(Prompt(3, 0, 12));
  s.PrioritizePool(SimTime(0));
  s.FormBatch(0, SimTime(0));  // runs job 2; 1 and 3 wait one window
  s.FormBatch(0, SimTime(0));  // runs job 3; job 1 waits a second window
  const Job& waiting = s.job(JobId{1});
  EXPECT_EQ(waiting.windows_waited, 2u);
  EXPECT_DOUBLE_EQ(s.EffectiveKey(waiting), 70.0);
}

TEST(Aging, KeyFloorsAtZero) {
  SchedulerConfig c = Sched(PolicyKind::kIsrtf);
  c.policy.aging = Aging{1, 1000.0};
  Scheduler s(c, {Worker(1)});
  s.Submit(Prompt(1, 0, 100));
  s.Submit(Prompt(2, 0, 10));
  s.PrioritizePool(SimTime(0));
  s.FormBatch(0, SimTime(0));
  EXPECT_DOUBLE_EQ(s.EffectiveKey(s.job(JobId{1})), 0.0);
}

TEST(Run, EmptyWorkload) {
  const auto r = scheduler::Run({}, Config(PolicyKind::kIsrtf));
  EXPECT_TRUE(r.jobs.empty());
  EXPECT_EQ(r.ops.iterations, 0u);
  EXPECT_EQ(r.summary.jobs, 0u);
}

TEST(Run, SingleJobLatencyIsPrefillPlusDecode) {
  for (const PolicyKind kind : {PolicyKind::kFcfs, PolicyKind::kSjf, PolicyKind::kIsrtf}) {
    auto cfg = Config(kind);
    cfg.scheduler.decision_overhead = SimTime(2.0);
    const std::vector<PromptSpec> prompts = {Prompt(1, 1000, 120)};
    const auto r = scheduler::Run(prompts, cfg);
    ASSERT_EQ(r.jobs.size(), 1u);
    // Three windows of 50, 50 and 20 tokens, each preceded by the decision cost.
    EXPECT_DOUBLE_EQ(r.jobs[0].jct_ms, 100.0 + 50.0 * 120 + 3 * 2.0);
    EXPECT_EQ(r.jobs[0].windows, 3u);
  }
}

TEST(Run, IsrtfBeatsFcfsBehindLongHead) {
  std::vector<PromptSpec> prompts = {Prompt(0, 0, 500)};
  for (std::uint64_t i = 1; i <= 9; ++i) prompts.push_back(Prompt(i, 0, 10));
  const auto fcfs = scheduler::Run(prompts, Config(PolicyKind::kFcfs));
  const auto isrtf = scheduler::Run(prompts, Config(PolicyKind::kIsrtf));
  EXPECT_LT(isrtf.summary.avg_jct_ms, fcfs.summary.avg_jct_ms);
}

TEST(Run, OracleIsrtfMatchesSjfOnSingleWindowJobs) {
  CounterRng rng(6, 6);
  for (int round = 0; round < 50; ++round) {
    std::vector<PromptSpec> prompts;
    double t = 0.0;
    for (std::uint64_t i = 0; i < 40; ++i) {
      t += static_cast<double>(rng() % 3000);
      prompts.push_back(Prompt(i, t, 1 + static_cast<TokenCount>(rng() % 50)));
    }
    auto finish_order = [&](PolicyKind kind) {
      auto r = scheduler::Run(prompts, Config(kind, predictor::Oracle{}, {Worker(1)}));
      std::sort(r.jobs.begin(), r.jobs.end(), [](const auto& a, const auto& b) {
        return a.finish_ms != b.finish_ms ? a.finish_ms < b.finish_ms
                                          : ToUnderlying(a.id) < ToUnderlying(b.id);
      });
      std::vector<std::uint64_t> ids;
      for (const auto& j : r.jobs) ids.push_back(ToUnderlying(j.id));
      return ids;
    };
    EXPECT_EQ(finish_order(PolicyKind::kIsrtf), finish_order(PolicyKind::kSjf));
  }
}

// Exhaustive minimum average JCT over all job orders on one worker with
// batch 1 and simultaneous arrivals.
double BruteForceMinAvgJct(const std::vector<TokenCount>& lengths) {
  const WorkerProfile w = Worker();
  std::vector<std::size_t> perm(lengths.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = INFINITY;
  do {
    double clock = 0.0;
    double total = 0.0;
    for (const std::size_t i : perm) {
      clock += w.ttft_ms + w.tpot_ms * lengths[i];
      total += clock;
    }
    best = std::min(best, total / static_cast<double>(lengths.size()));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

TEST(Run, OracleIsrtfIsOptimalOnSmallInstances) {
  CounterRng rng(77, 0);
  for (int round = 0; round < 40; ++round) {
    const std::size_t n = 1 + rng() % 6;
    std::vector<TokenCount> lengths(n);
    std::vector<PromptSpec> prompts;
    for (std::size_t i = 0; i < n; ++i) {
      lengths[i] = 1 + static_cast<TokenCount>(rng() % 300);
      prompts.push_back(Prompt(i, 0, lengths[i]));
    }
    const auto r = scheduler::Run(prompts, Config(PolicyKind::kIsrtf));
    EXPECT_NEAR(r.summary.avg_jct_ms, BruteForceMinAvgJct(lengths), 1e-6);
  }
}

TEST(Run, QueueAndServiceReconcile) {
  const auto prompts = workload::SampleStream(
      {0.73, 10.41, 3, 40.0}, {workload::FixedLength{32}, workload::LogNormalLength{5.0, 1.0}},
      300);
  const auto r = scheduler::Run(prompts, Config(PolicyKind::kIsrtf,
                                     predictor::NoisyIterative{predictor::MaeSchedule::Default(), 1},
                                     {Worker(4), Worker(4)}));
  ASSERT_EQ(r.jobs.size(), 300u);
  for (const auto& j : r.jobs) {
    EXPECT_NEAR(j.jct_ms - j.queue_ms, j.service_ms, 1e-6);
    EXPECT_LE(j.queue_ms, j.jct_ms + 1e-9);
    EXPECT_LE(j.arrival_ms, j.first_exec_ms);
    EXPECT_LE(j.first_exec_ms, j.finish_ms);
  }
  double busy = 0.0;
  for (const auto& w : r.workers) {
    EXPECT_LE(w.busy_ms, r.makespan_ms);
    busy += w.busy_ms;
  }
  double service = 0.0;
  for (const auto& j : r.jobs) service += j.service_ms;
  // With c = 0 each window's time is charged in full to each batch member.
  EXPECT_GE(service + 1e-6, busy);
}

TEST(Run, SingleWorkerNeverIdlesWithQueuedWork) {
  std::vector<PromptSpec> prompts;
  double total = 0.0;
  for (std::uint64_t i = 0; i < 30; ++i) {
    const TokenCount len = 10 + static_cast<TokenCount>((i * 37) % 200);
    prompts.push_back(Prompt(i, 0, len));
    total += 100.0 + 50.0 * len;
  }
  for (const PolicyKind kind : {PolicyKind::kFcfs, PolicyKind::kSjf, PolicyKind::kIsrtf}) {
    const auto r = scheduler::Run(prompts, Config(kind));
    EXPECT_NEAR(r.makespan_ms, total, 1e-6);
  }
}

TEST(Run, ReplayIsIdentical) {
  const auto prompts = workload::SampleStream(
      {0.73, 10.41, 17, 30.0}, {workload::FixedLength{8}, workload::LogNormalLength{5.0, 1.0}},
      400);
  auto cfg = Config(PolicyKind::kIsrtf,
                    predictor::NoisyIterative{predictor::MaeSchedule::Default(), 5},
                    {Worker(4), Worker(4), Worker(4)});
  const auto a = scheduler::Run(prompts, cfg);
  const auto b = scheduler::Run(prompts, cfg);
  std::ostringstream ca, cb;
  metrics::WriteJobsCsv(ca, a.jobs);
  metrics::WriteJobsCsv(cb, b.jobs);
  EXPECT_EQ(ca.str(), cb.str());
}

TEST(Run, PreemptionConservesTokens) {
  const auto prompts = workload::SampleStream(
      {0.73, 10.41, 23, 200.0}, {workload::FixedLength{8}, workload::LogNormalLength{5.0, 1.0}},
      500);
  std::vector<WorkerProfile> workers = {Worker(8), Worker(8)};
  for (auto& w : workers) w.preempt_capacity = 5;
  const auto r = scheduler::Run(prompts, Config(PolicyKind::kIsrtf, predictor::Oracle{}, workers));
  EXPECT_EQ(r.jobs.size(), 500u);
  EXPECT_GT(r.summary.preemptions, 0u);
  std::uint64_t produced = 0;
  for (const auto& w : r.workers) produced += w.tokens;
  std::uint64_t expected = 0;
  for (const auto& p : prompts) expected += ground_truth::OutputLength(p);
  EXPECT_EQ(produced, expected);
}

TEST(Run, NonOraclePoliciesNeverReadHiddenLengths) {
  if (!ground_truth::AuditEnabled()) GTEST_SKIP() << "audit compiled out";
  const auto prompts = workload::SampleStream({0.73, 10.41, 2, 5.0}, {}, 100);
  EXPECT_NO_THROW(scheduler::Run(prompts, Config(PolicyKind::kFcfs)));
  EXPECT_NO_THROW(scheduler::Run(prompts, Config(PolicyKind::kIsrtf, predictor::Constant{64})));
}

TEST(Run, DeadLettersDoNotStallTheRun) {
  std::istringstream in("job_id,step,predicted_total\n0,0,40\n2,0,30\n");
  const std::vector<PromptSpec> prompts = {Prompt(0, 0, 40), Prompt(1, 0, 40), Prompt(2, 5, 30)};
  const auto r = scheduler::Run(prompts, Config(PolicyKind::kIsrtf, predictor::ReadTraceDriven(in)));
  EXPECT_EQ(r.jobs.size(), 2u);
  EXPECT_EQ(Raw(r.dead_letters), (std::vector<std::uint64_t>{1}));
}

TEST(RunLive, CompletesEveryJob) {
  const auto prompts = workload::SampleStream(
      {0.73, 10.41, 9, 20.0}, {workload::FixedLength{8}, workload::LogNormalLength{4.0, 0.8, 300}},
      40);
  auto cfg = Config(PolicyKind::kIsrtf,
                    predictor::NoisyIterative{predictor::MaeSchedule::Default(), 3},
                    {Worker(4), Worker(4)});
  for (auto& w : cfg.workers) w.tpot_ms = 5.0;
  const auto r = RunLive(prompts, cfg, {0.0005});
  ASSERT_EQ(r.jobs.size(), 40u);
  for (const auto& j : r.jobs) EXPECT_LE(j.arrival_ms, j.finish_ms);
  std::uint64_t produced = 0;
  for (const auto& w : r.workers) produced += w.tokens;
  std::uint64_t expected = 0;
  for (const auto& p : prompts) expected += ground_truth::OutputLength(p);
  EXPECT_EQ(produced, expected);
}

}  // namespace
}  // namespace elis::scheduler
