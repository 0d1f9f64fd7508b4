#include "elis/experiment.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>

#include <boost/math/special_functions/gamma.hpp>
#include <fmt/format.h>

#include "elis/live.h"
#include "elis/rng.h"

#ifndef ELIS_DATA_DIR
#define ELIS_DATA_DIR "data"
#endif

namespace elis::experiment {

std::filesystem::path DataDir() {
  if (const char* env = std::getenv("ELIS_DATA_DIR"); env && *env) return env;
  return ELIS_DATA_DIR;
}

std::filesystem::path StandardWorkloadPath() { return DataDir() / "standard_workload.csv"; }

config::ProfileSet ResolveProfiles(const config::ExperimentConfig& cfg) {
  if (cfg.profiles_file.empty()) return config::BuiltinProfiles();
  return config::LoadProfiles(cfg.profiles_file);
}

WorkerProfile ResolveProfile(const config::ExperimentConfig& cfg) {
  const auto profiles = ResolveProfiles(cfg);
  const auto it = profiles.find(cfg.profile);
  if (it == profiles.end()) throw config::ConfigError("unknown profile '" + cfg.profile + "'");
  WorkerProfile p = it->second;
  p.max_batch = cfg.max_batch;
  if (cfg.preempt_capacity > 0) p.preempt_capacity = cfg.preempt_capacity;
  return p;
}

std::vector<workload::TraceRecord> LengthRecords(const config::ExperimentConfig& cfg) {
  const std::filesystem::path path =
      cfg.lengths_file.empty() ? StandardWorkloadPath() : std::filesystem::path(cfg.lengths_file);
  std::ifstream in(path);
  if (!in) throw config::ConfigError("cannot open workload " + path.string());
  return workload::ReadTraceRecords(in);
}

std::uint64_t RepetitionSeed(std::uint64_t seed, std::size_t repetition,
                             const std::string& profile) {
  return Mix(Mix(seed, repetition), HashName(profile));
}

std::vector<PromptSpec> BuildWorkload(const config::ExperimentConfig& cfg,
                                      const WorkerProfile& profile) {
  if (!cfg.trace.empty()) return workload::LoadTrace(cfg.trace);
  if (cfg.prompts == 0) return {};

  const std::uint64_t seed = RepetitionSeed(cfg.seed, cfg.repetition, profile.name);
  auto records = LengthRecords(cfg);
  if (cfg.prompts <= records.size()) {
    workload::Shuffle(records, seed);
    records.resize(cfg.prompts);
  } else {
    CounterRng rng(seed, 0x7);
    std::vector<workload::TraceRecord> drawn(cfg.prompts);
    for (auto& r : drawn) r = records[rng() % records.size()];
    records = std::move(drawn);
  }

  workload::GammaArrivalConfig gamma{cfg.gamma_alpha, cfg.gamma_beta, seed, 1.0};
  if (cfg.rate_mult > 0.0) {
    gamma.rate_multiplier = cfg.rate_mult;
  } else {
    // The derived rate is per worker; a pool of workers is offered the sum.
    const double target = cfg.rps_mult * static_cast<double>(cfg.count) *
                          workload::DeriveRequestRate(profile, cfg.max_batch);
    gamma.rate_multiplier = workload::RateMultiplierFor(gamma, target);
  }
  return workload::Retime(records, gamma, "standard");
}

scheduler::RunConfig BuildRunConfig(const config::ExperimentConfig& cfg,
                                    const WorkerProfile& profile) {
  scheduler::RunConfig run;
  run.scheduler.policy.kind = scheduler::ParsePolicy(cfg.policy);
  if (cfg.aging_boost_after > 0) {
    run.scheduler.policy.aging = scheduler::Aging{cfg.aging_boost_after, cfg.aging_boost_amount};
  }
  const std::uint64_t noise_seed = Mix(RepetitionSeed(cfg.seed, cfg.repetition, profile.name), 0xabc);
  run.scheduler.predictor = predictor::ParseSpec(
      cfg.predictor, predictor::ParseSchedule(cfg.mae_schedule), noise_seed, cfg.window);
  run.scheduler.window = cfg.window;
  run.scheduler.decision_overhead = SimTime(cfg.decision_overhead_ms);
  run.workers.assign(cfg.count, profile);
  for (std::size_t i = 0; i < run.workers.size(); ++i) {
    if (cfg.count > 1) run.workers[i].name = fmt::format("{}#{}", profile.name, i);
  }
  return run;
}

metrics::ExperimentResult RunExperiment(const config::ExperimentConfig& cfg,
                                        std::span<const PromptSpec> prompts) {
  cfg.Validate();
  const WorkerProfile profile = ResolveProfile(cfg);
  const auto run = BuildRunConfig(cfg, profile);
  if (cfg.mode == "live") {
    return scheduler::RunLive(prompts, run, {cfg.live_time_scale});
  }
  return scheduler::Run(prompts, run);
}

metrics::ExperimentResult RunExperiment(const config::ExperimentConfig& cfg) {
  cfg.Validate();
  const auto prompts = BuildWorkload(cfg, ResolveProfile(cfg));
  return RunExperiment(cfg, prompts);
}

nlohmann::json SummaryJson(const config::ExperimentConfig& cfg,
                           const metrics::ExperimentResult& result) {
  const auto& s = result.summary;
  nlohmann::json j;
  j["config"] = config::ToJson(cfg);
  j["seed"] = cfg.seed;
  j["summary"] = {{"jobs", s.jobs},
                  {"avg_jct_ms", s.avg_jct_ms},
                  {"min_jct_ms", s.min_jct_ms},
                  {"max_jct_ms", s.max_jct_ms},
                  {"avg_queue_ms", s.avg_queue_ms},
                  {"avg_service_ms", s.avg_service_ms},
                  {"throughput_rps", s.throughput_rps},
                  {"windows", s.windows},
                  {"preemptions", s.preemptions},
                  {"makespan_ms", result.makespan_ms}};
  j["ops"] = {{"iterations", result.ops.iterations},
              {"predictions", result.ops.predictions},
              {"comparisons", result.ops.comparisons},
              {"batches", result.ops.batches},
              {"pool_pushes", result.ops.pool_pushes}};
  j["workers"] = nlohmann::json::array();
  for (const auto& w : result.workers) {
    const double util = result.makespan_ms > 0.0 ? w.busy_ms / result.makespan_ms : 0.0;
    j["workers"].push_back(
        {{"busy_ms", w.busy_ms}, {"tokens", w.tokens}, {"windows", w.windows}, {"utilization", util}});
  }
  j["dead_letters"] = nlohmann::json::array();
  for (const JobId id : result.dead_letters) j["dead_letters"].push_back(ToUnderlying(id));
  return j;
}

const SweepCell* SweepResult::Find(const std::string& profile, std::size_t batch, double rps_mult,
                                   const std::string& policy) const {
  for (const auto& c : cells) {
    if (c.profile == profile && c.batch == batch && c.rps_mult == rps_mult && c.policy == policy) {
      return &c;
    }
  }
  return nullptr;
}

SweepResult RunSweep(const SweepPlan& plan, const config::ExperimentConfig& base) {
  if (plan.repetitions == 0) throw config::ConfigError("sweep needs at least one repetition");
  SweepResult out;
  for (const auto& profile : plan.profiles) {
    for (const std::size_t batch : plan.batches) {
      for (const double mult : plan.rps_mults) {
        for (const auto& policy : plan.policies) {
          SweepCell cell;
          cell.profile = profile;
          cell.batch = batch;
          cell.rps_mult = mult;
          cell.policy = policy;
          try {
            for (std::size_t rep = 0; rep < plan.repetitions; ++rep) {
              config::ExperimentConfig cfg = base;
              cfg.profile = profile;
              cfg.max_batch = batch;
              cfg.rps_mult = mult;
              cfg.rate_mult = 0.0;
              cfg.policy = policy;
              cfg.repetition = rep;
              const auto r = RunExperiment(cfg);
              cell.avg_jct_ms += r.summary.avg_jct_ms;
              cell.avg_queue_ms += r.summary.avg_queue_ms;
              cell.min_jct_ms += r.summary.min_jct_ms;
              cell.max_jct_ms += r.summary.max_jct_ms;
            }
            const double n = static_cast<double>(plan.repetitions);
            cell.avg_jct_ms /= n;
            cell.avg_queue_ms /= n;
            cell.min_jct_ms /= n;
            cell.max_jct_ms /= n;
          } catch (const std::exception& e) {
            cell.failed = true;
            cell.error = e.what();
          }
          out.cells.push_back(std::move(cell));
        }
      }
    }
  }

  for (const std::size_t batch : plan.batches) {
    for (const double mult : plan.rps_mults) {
      double total = 0.0;
      std::size_t n = 0;
      for (const auto& profile : plan.profiles) {
        const SweepCell* f = out.Find(profile, batch, mult, "fcfs");
        const SweepCell* i = out.Find(profile, batch, mult, "isrtf");
        if (!f || !i || f->failed || i->failed) continue;
        total += metrics::ImprovementPercent(f->avg_jct_ms, i->avg_jct_ms);
        ++n;
      }
      if (n > 0) out.improvement.push_back({batch, mult, total / static_cast<double>(n)});
    }
  }
  return out;
}

void WriteSweepTable(std::ostream& out, const SweepResult& result) {
  out << "profile,batch,rps_mult,policy,avg_jct_s,avg_queue_s,min_jct_s,max_jct_s,status\n";
  for (const auto& c : result.cells) {
    if (c.failed) {
      out << fmt::format("{},{},{},{},,,,,failed: {}\n", c.profile, c.batch, c.rps_mult, c.policy,
                         c.error.substr(0, c.error.find('\n')));
      continue;
    }
    out << fmt::format("{},{},{},{},{:.2f},{:.2f},{:.2f},{:.2f},ok\n", c.profile, c.batch,
                       c.rps_mult, c.policy, c.avg_jct_ms / 1000.0, c.avg_queue_ms / 1000.0,
                       c.min_jct_ms / 1000.0, c.max_jct_ms / 1000.0);
  }
}

void WriteImprovementMatrix(std::ostream& out, const SweepResult& result) {
  out << "batch,rps_mult,isrtf_improvement_pct\n";
  for (const auto& c : result.improvement) {
    out << fmt::format("{},{},{:.2f}\n", c.batch, c.rps_mult, c.improvement_pct);
  }
}

std::vector<ScalePoint> RunScale(const std::vector<std::size_t>& worker_counts,
                                 const config::ExperimentConfig& base,
                                 const ScaleOptions& options) {
  std::vector<ScalePoint> points;
  const WorkerProfile profile = ResolveProfile(base);
  for (const std::size_t count : worker_counts) {
    if (count == 0) throw config::ConfigError("worker count must be positive");
    config::ExperimentConfig cfg = base;
    cfg.count = count;
    cfg.prompts = std::max(options.min_prompts, options.prompts_per_worker * count);
    cfg.trace.clear();

    metrics::PeakSearch search = options.search;
    const double capacity =
        static_cast<double>(count) * workload::DeriveRequestRate(profile, cfg.max_batch);
    search.max_rps = std::max(search.min_rps * 2.0, capacity);

    const workload::GammaArrivalConfig gamma{cfg.gamma_alpha, cfg.gamma_beta, 0, 1.0};
    const metrics::RateProbe probe = [&](double rate, std::size_t rep) {
      config::ExperimentConfig c = cfg;
      c.repetition = rep;
      c.rate_mult = workload::RateMultiplierFor(gamma, rate);
      return RunExperiment(c).summary;
    };
    ScalePoint point{count, std::nullopt};
    try {
      point.peak_rps = metrics::PeakThroughput(probe, search);
    } catch (const metrics::BoundNeverMet&) {
    }
    points.push_back(point);
  }
  return points;
}

std::vector<PreemptRow> ProfilePreempt(const config::ProfileSet& profiles,
                                       const backend::BatchRamp& ramp) {
  std::vector<PreemptRow> rows;
  for (const auto& [name, p] : profiles) {
    rows.push_back({name, p.model_name, p.preempt_capacity, backend::ProfilePreemption(p, ramp)});
  }
  return rows;
}

WorkloadCheck ValidateWorkload(const workload::GammaArrivalConfig& cfg, std::size_t samples) {
  if (samples < 2) throw config::ConfigError("need at least two samples");
  auto xs = workload::SampleIntervals(cfg, samples);
  WorkloadCheck check;
  check.samples = samples;
  const double n = static_cast<double>(samples);
  double sum = 0.0;
  for (const double x : xs) sum += x;
  check.mean_s = sum / n;
  double ss = 0.0;
  for (const double x : xs) ss += (x - check.mean_s) * (x - check.mean_s);
  check.variance_s2 = ss / (n - 1.0);

  const double scale = cfg.beta / cfg.rate_multiplier;
  check.expected_mean_s = cfg.alpha * scale;
  check.expected_variance_s2 = cfg.alpha * scale * scale;

  std::sort(xs.begin(), xs.end());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = boost::math::gamma_p(cfg.alpha, xs[i] / scale);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  check.ks_statistic = d;
  check.mean_ok = std::fabs(check.mean_s - check.expected_mean_s) <= 0.05 * check.expected_mean_s;
  check.variance_ok =
      std::fabs(check.variance_s2 - check.expected_variance_s2) <= 0.10 * check.expected_variance_s2;
  check.ks_ok = check.ks_statistic < 0.01;
  return check;
}

}  // namespace elis::experiment
