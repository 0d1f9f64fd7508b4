#include <gtest/gtest.h>

#include "elis/ground_truth.h"
#include "elis/types.h"
#include "test_util.h"

namespace elis {
namespace {

using testing::Prompt;

TEST(PromptSpec, RejectsZeroLengths) {
  EXPECT_THROW(PromptSpec(JobId{1}, SimTime(0), 0, 5), std::invalid_argument);
  EXPECT_THROW(PromptSpec(JobId{1}, SimTime(0), 5, 0), std::invalid_argument);
  EXPECT_THROW(PromptSpec(JobId{1}, SimTime(-1), 5, 5), std::invalid_argument);
}

TEST(Transition, PooledToBuffered) {
  Job job(Prompt(1, 0, 120));
  Transition(job, JobState::kBuffered, SimTime(5));
  EXPECT_EQ(job.state, JobState::kBuffered);
  EXPECT_DOUBLE_EQ(job.queue_wait_accum.ms(), 5.0);
}

TEST(Transition, FinishedIsTerminal) {
  Job job(Prompt(1, 0, 10));
  Transition(job, JobState::kBuffered, SimTime(0));
  Transition(job, JobState::kRunning, SimTime(0));
  job.generated = 10;
  Transition(job, JobState::kFinished, SimTime(10));
  EXPECT_THROW(Transition(job, JobState::kRunning, SimTime(11)), IllegalTransition);
}

TEST(Transition, CompletionStampsFinishTime) {
  Job job(Prompt(1, 100, 120));
  Transition(job, JobState::kBuffered, SimTime(100));
  Transition(job, JobState::kRunning, SimTime(250));
  job.generated = 120;
  Transition(job, JobState::kFinished, SimTime(6350));
  ASSERT_TRUE(job.t_finish.has_value());
  EXPECT_DOUBLE_EQ(job.t_finish->ms(), 6350.0);
  EXPECT_DOUBLE_EQ(job.t_first_exec->ms(), 250.0);
  EXPECT_DOUBLE_EQ(job.queue_wait_accum.ms(), 150.0);
  EXPECT_DOUBLE_EQ(job.service_accum.ms(), 6100.0);
}

TEST(Transition, IllegalEdgesThrow) {
  const JobState all[] = {JobState::kPooled, JobState::kBuffered, JobState::kRunning,
                          JobState::kPreempted, JobState::kFinished};
  auto legal = [](JobState a, JobState b) {
    return (a == JobState::kPooled && b == JobState::kBuffered) ||
           (a == JobState::kBuffered && b == JobState::kRunning) ||
           (a == JobState::kRunning &&
            (b == JobState::kPooled || b == JobState::kPreempted || b == JobState::kFinished)) ||
           (a == JobState::kPreempted && b == JobState::kBuffered);
  };
  for (const JobState from : all) {
    for (const JobState to : all) {
      Job job(Prompt(7, 0, 10));
      job.state = from;
      job.generated = to == JobState::kFinished ? 10 : 5;
      if (legal(from, to)) {
        EXPECT_NO_THROW(Transition(job, to, SimTime(1))) << ToString(from) << "->" << ToString(to);
      } else {
        EXPECT_THROW(Transition(job, to, SimTime(1)), IllegalTransition)
            << ToString(from) << "->" << ToString(to);
      }
    }
  }
}

TEST(Transition, FinishRequiresFullOutput) {
  Job job(Prompt(1, 0, 10));
  job.state = JobState::kRunning;
  job.generated = 9;
  EXPECT_THROW(Transition(job, JobState::kFinished, SimTime(1)), IllegalTransition);
  job.generated = 10;
  EXPECT_THROW(Transition(job, JobState::kPooled, SimTime(1)), IllegalTransition);
}

TEST(Transition, ClockCannotRunBackwards) {
  Job job(Prompt(1, 50, 10));
  EXPECT_THROW(Transition(job, JobState::kBuffered, SimTime(49)), IllegalTransition);
}

TEST(GroundTruth, DenyScopeTrapsReads) {
  const PromptSpec p = Prompt(3, 0, 42);
  EXPECT_EQ(ground_truth::OutputLength(p), 42u);
  if (!ground_truth::AuditEnabled()) GTEST_SKIP() << "audit compiled out";
  {
    ground_truth::DenyScope deny;
    EXPECT_THROW(ground_truth::OutputLength(p), ground_truth::LeakDetected);
  }
  EXPECT_EQ(ground_truth::OutputLength(p), 42u);
}

TEST(WorkerProfile, EffectiveTpotScalesWithBatch) {
  WorkerProfile p = testing::Worker();
  p.batch_slowdown_coeff = 0.25;
  EXPECT_DOUBLE_EQ(p.EffectiveTpot(1), 50.0);
  EXPECT_DOUBLE_EQ(p.EffectiveTpot(4), 50.0 * 1.75);
}

}  // namespace
}  // namespace elis
