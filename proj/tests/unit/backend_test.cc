#include <algorithm>
#include <vector>

#include <gtest/gtest.h>

#include "elis/backend.h"
#include "elis/rng.h"
#include "test_util.h"

namespace elis::backend {
namespace {

using testing::Prompt;
using testing::Worker;

TEST(ExecWindow, SingleJobFirstWindow) {
  Job job(Prompt(1, 0, 120));
  const Job* batch[] = {&job};
  const auto r = ExecWindow(Worker(), batch, 50);
  EXPECT_EQ(r.tokens_processed, 50u);
  EXPECT_DOUBLE_EQ(r.duration.ms(), 2600.0);
  ASSERT_EQ(r.entries.size(), 1u);
  EXPECT_EQ(r.entries[0].tokens, 50u);
  EXPECT_FALSE(r.entries[0].finished);
}

TEST(ExecWindow, EndsWhenShortestJobFinishes) {
  Job a(Prompt(1, 0, 30));
  Job b(Prompt(2, 0, 200));
  const Job* batch[] = {&a, &b};
  const auto r = ExecWindow(Worker(2), batch, 50);
  EXPECT_EQ(r.tokens_processed, 30u);
  EXPECT_TRUE(r.entries[0].finished);
  EXPECT_EQ(r.entries[1].tokens, 30u);
  EXPECT_FALSE(r.entries[1].finished);
  EXPECT_DOUBLE_EQ(r.duration.ms(), 200.0 + 50.0 * 30);
}

TEST(ExecWindow, ServiceTelescopesAcrossWindows) {
  Job job(Prompt(1, 0, 120));
  double total = 0.0;
  while (job.generated < 120) {
    const Job* batch[] = {&job};
    const auto r = ExecWindow(Worker(), batch, 50);
    total += r.duration.ms();
    job.generated += r.entries[0].tokens;
    job.needs_prefill = false;
  }
  EXPECT_DOUBLE_EQ(total, 6100.0);
}

TEST(ExecWindow, BatchSlowdown) {
  WorkerProfile p = Worker(3);
  p.batch_slowdown_coeff = 0.5;
  Job a(Prompt(1, 0, 100)), b(Prompt(2, 0, 100)), c(Prompt(3, 0, 100));
  a.needs_prefill = b.needs_prefill = c.needs_prefill = false;
  const Job* batch[] = {&a, &b, &c};
  EXPECT_DOUBLE_EQ(ExecWindow(p, batch, 10).duration.ms(), 50.0 * 2.0 * 10);
}

TEST(ExecWindow, RejectsOversizedBatch) {
  Job a(Prompt(1, 0, 10)), b(Prompt(2, 0, 10));
  const Job* batch[] = {&a, &b};
  EXPECT_THROW(ExecWindow(Worker(1), batch, 50), BatchTooLarge);
}

TEST(ExecWindow, IndependentOfWindowCut) {
  CounterRng rng(8, 8);
  for (int round = 0; round < 200; ++round) {
    const TokenCount len = 1 + static_cast<TokenCount>(rng() % 700);
    const TokenCount window = 1 + static_cast<TokenCount>(rng() % 90);
    Job job(Prompt(1, 0, len));
    double total = 0.0;
    while (job.generated < len) {
      const Job* batch[] = {&job};
      const auto r = ExecWindow(Worker(), batch, window);
      ASSERT_GT(r.duration.ms(), 0.0);
      ASSERT_LE(r.tokens_processed, window);
      total += r.duration.ms();
      job.generated += r.entries[0].tokens;
      job.needs_prefill = false;
    }
    EXPECT_NEAR(total, 100.0 + 50.0 * len, 1e-6);
  }
}

std::vector<Resident> Residents(const std::vector<double>& keys) {
  std::vector<Resident> out;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    out.push_back({JobId{i}, keys[i], SimTime(static_cast<double>(i))});
  }
  return out;
}

TEST(MaybePreempt, EvictsLargestKeyAtCapacityPlusOne) {
  WorkerProfile p = Worker();
  p.preempt_capacity = 120;
  std::vector<double> keys(121);
  for (std::size_t i = 0; i < keys.size(); ++i) keys[i] = static_cast<double>((i * 37) % 121);
  const auto victims = MaybePreempt(p, Residents(keys));
  ASSERT_EQ(victims.size(), 1u);
  const auto max_it = std::max_element(keys.begin(), keys.end());
  EXPECT_EQ(victims[0], JobId{static_cast<std::uint64_t>(max_it - keys.begin())});
}

TEST(MaybePreempt, NoOpWithinCapacity) {
  WorkerProfile p = Worker();
  p.preempt_capacity = 4;
  EXPECT_TRUE(MaybePreempt(p, Residents({1, 2, 3, 4})).empty());
}

TEST(MaybePreempt, TiesEvictLaterArrivalFirst) {
  WorkerProfile p = Worker();
  p.preempt_capacity = 2;
  const auto victims = MaybePreempt(p, Residents({5, 9, 9, 1}));
  EXPECT_EQ(victims, (std::vector<JobId>{JobId{2}, JobId{1}}));
}

TEST(MaybePreempt, VictimsAreSuffixOfPriorityOrder) {
  CounterRng rng(31, 0);
  for (int round = 0; round < 500; ++round) {
    const std::size_t n = 1 + rng() % 30;
    std::vector<double> keys(n);
    for (auto& k : keys) k = static_cast<double>(rng() % 10);
    WorkerProfile p = Worker();
    p.preempt_capacity = 1 + rng() % 30;
    const auto res = Residents(keys);
    const auto victims = MaybePreempt(p, res);
    EXPECT_EQ(victims.size(), n > p.preempt_capacity ? n - p.preempt_capacity : 0);
    auto is_victim = [&](JobId id) {
      return std::find(victims.begin(), victims.end(), id) != victims.end();
    };
    for (const auto& v : res) {
      if (!is_victim(v.id)) continue;
      for (const auto& s : res) {
        if (is_victim(s.id)) continue;
        // Every survivor ranks strictly ahead of every victim.
        const bool ahead = s.priority < v.priority ||
                           (s.priority == v.priority && s.arrival < v.arrival);
        EXPECT_TRUE(ahead);
      }
    }
  }
}

TEST(ProfilePreemption, ReportsTableThresholds) {
  for (const std::size_t cap : {30u, 40u, 60u, 90u, 120u}) {
    WorkerProfile p = Worker();
    p.preempt_capacity = cap;
    EXPECT_EQ(ProfilePreemption(p), std::optional<std::size_t>(cap)) << cap;
  }
}

TEST(ProfilePreemption, CapacityAboveRampIsNotObserved) {
  WorkerProfile p = Worker();
  p.preempt_capacity = 260;
  EXPECT_EQ(ProfilePreemption(p), std::nullopt);
}

TEST(ProfilePreemption, OffGridCapacityRoundsUp) {
  WorkerProfile p = Worker();
  p.preempt_capacity = 125;
  EXPECT_EQ(ProfilePreemption(p), std::optional<std::size_t>(130));
}

}  // namespace
}  // namespace elis::backend
