#ifndef ELIS_EXPERIMENT_H_
#define ELIS_EXPERIMENT_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "elis/config.h"
#include "elis/metrics.h"
#include "elis/scheduler.h"
#include "elis/workload.h"

namespace elis::experiment {

// Directory holding the bundled standard workload and profiles.
std::filesystem::path DataDir();
std::filesystem::path StandardWorkloadPath();

config::ProfileSet ResolveProfiles(const config::ExperimentConfig& cfg);
WorkerProfile ResolveProfile(const config::ExperimentConfig& cfg);

// Length records the workload draws from: `lengths_file`, or the bundled
// standard workload.
std::vector<workload::TraceRecord> LengthRecords(const config::ExperimentConfig& cfg);

// Seed shared by every policy, rate and batch cell of one repetition on one
// profile: the prompt shuffle and the Gamma arrivals derive from it.
std::uint64_t RepetitionSeed(std::uint64_t seed, std::size_t repetition,
                             const std::string& profile);

// The prompt stream of one run. An explicit trace is replayed as-is.
// Otherwise the length records are shuffled for the repetition (sampled
// with replacement when more prompts are requested than records exist)
// and timed by Gamma arrivals at rps_mult times the profile's derived
// request rate (or at rate_mult when set).
std::vector<PromptSpec> BuildWorkload(const config::ExperimentConfig& cfg,
                                      const WorkerProfile& profile);

scheduler::RunConfig BuildRunConfig(const config::ExperimentConfig& cfg,
                                    const WorkerProfile& profile);

metrics::ExperimentResult RunExperiment(const config::ExperimentConfig& cfg);
metrics::ExperimentResult RunExperiment(const config::ExperimentConfig& cfg,
                                        std::span<const PromptSpec> prompts);

nlohmann::json SummaryJson(const config::ExperimentConfig& cfg,
                           const metrics::ExperimentResult& result);

struct SweepPlan {
  std::vector<std::string> profiles = {"opt13", "opt6.7", "vic", "lam13", "lam7"};
  std::vector<std::string> policies = {"fcfs", "isrtf", "sjf"};
  std::vector<double> rps_mults = {1.0, 3.0, 5.0};
  std::vector<std::size_t> batches = {1, 2, 4};
  std::size_t repetitions = 3;
};

struct SweepCell {
  std::string profile;
  std::size_t batch = 0;
  double rps_mult = 0.0;
  std::string policy;
  // Means over repetitions of the per-run aggregates.
  double avg_jct_ms = 0.0;
  double avg_queue_ms = 0.0;
  double min_jct_ms = 0.0;
  double max_jct_ms = 0.0;
  bool failed = false;
  std::string error;
};

struct ImprovementCell {
  std::size_t batch = 0;
  double rps_mult = 0.0;
  // Mean over profiles of (FCFS - ISRTF) / FCFS * 100 on average JCT.
  double improvement_pct = 0.0;
};

struct SweepResult {
  std::vector<SweepCell> cells;
  std::vector<ImprovementCell> improvement;

  const SweepCell* Find(const std::string& profile, std::size_t batch, double rps_mult,
                        const std::string& policy) const;
};

// Runs every (profile x batch x rps x policy) cell for each repetition. A
// failing cell is marked and the sweep continues.
SweepResult RunSweep(const SweepPlan& plan, const config::ExperimentConfig& base);

void WriteSweepTable(std::ostream& out, const SweepResult& result);
void WriteImprovementMatrix(std::ostream& out, const SweepResult& result);

struct ScalePoint {
  std::size_t workers = 0;
  std::optional<double> peak_rps;  // nullopt: bound never met
};

// Peak throughput per worker count for the configured profile and policy.
// Each probe runs max(min_prompts, prompts_per_worker * workers) prompts.
struct ScaleOptions {
  metrics::PeakSearch search;
  std::size_t min_prompts = 1000;
  std::size_t prompts_per_worker = 40;
};

std::vector<ScalePoint> RunScale(const std::vector<std::size_t>& worker_counts,
                                 const config::ExperimentConfig& base,
                                 const ScaleOptions& options);

struct PreemptRow {
  std::string profile;
  std::string model_name;
  std::size_t preempt_capacity = 0;
  std::optional<std::size_t> threshold;
};

std::vector<PreemptRow> ProfilePreempt(const config::ProfileSet& profiles,
                                       const backend::BatchRamp& ramp = {});

struct WorkloadCheck {
  std::size_t samples = 0;
  double mean_s = 0.0;
  double variance_s2 = 0.0;
  double expected_mean_s = 0.0;
  double expected_variance_s2 = 0.0;
  double ks_statistic = 0.0;
  bool mean_ok = false;
  bool variance_ok = false;
  bool ks_ok = false;
};

// Draws `samples` intervals and compares them with the analytic Gamma
// moments (5% / 10% tolerance) and CDF (KS < 0.01).
WorkloadCheck ValidateWorkload(const workload::GammaArrivalConfig& cfg, std::size_t samples);

}  // namespace elis::experiment

#endif  // ELIS_EXPERIMENT_H_
