// elis: experiment driver for the iterative LLM scheduler simulator.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "elis/config.h"
#include "elis/experiment.h"
#include "elis/metrics.h"
#include "elis/scheduler.h"
#include "elis/workload.h"

namespace {

namespace fs = std::filesystem;
using elis::config::ConfigError;
using elis::config::ExperimentConfig;

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

// Values given on the command line; applied over the config file.
struct Overrides {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::string out_dir = "out";

  std::optional<std::string> policy;
  std::optional<std::string> profile;
  std::optional<std::string> profiles_file;
  std::optional<double> rps_mult;
  std::optional<double> rate_mult;
  std::optional<std::string> gamma;
  std::optional<std::size_t> batch;
  std::optional<std::size_t> workers;
  std::optional<std::size_t> prompts;
  std::optional<std::string> trace;
  std::optional<std::string> predictor;
  std::optional<std::string> mae_schedule;
  std::optional<std::size_t> repetition;
};

template <typename T>
void Apply(const std::optional<T>& v, T& field) {
  if (v) field = *v;
}

ExperimentConfig Resolve(const Overrides& o) {
  ExperimentConfig cfg;
  if (o.config_path) cfg = elis::config::LoadIni(*o.config_path);
  Apply(o.seed, cfg.seed);
  Apply(o.mode, cfg.mode);
  Apply(o.policy, cfg.policy);
  Apply(o.profile, cfg.profile);
  Apply(o.profiles_file, cfg.profiles_file);
  Apply(o.rps_mult, cfg.rps_mult);
  Apply(o.rate_mult, cfg.rate_mult);
  Apply(o.batch, cfg.max_batch);
  Apply(o.workers, cfg.count);
  Apply(o.prompts, cfg.prompts);
  Apply(o.trace, cfg.trace);
  Apply(o.predictor, cfg.predictor);
  Apply(o.mae_schedule, cfg.mae_schedule);
  Apply(o.repetition, cfg.repetition);
  if (o.gamma) {
    double a = 0.0;
    double b = 0.0;
    char comma = 0;
    std::istringstream in(*o.gamma);
    if (!(in >> a >> comma >> b) || comma != ',' || !in.eof()) {
      throw ConfigError("--gamma expects alpha,beta");
    }
    cfg.gamma_alpha = a;
    cfg.gamma_beta = b;
  }
  cfg.Validate();
  return cfg;
}

fs::path OutDir(const Overrides& o) {
  fs::path dir(o.out_dir);
  fs::create_directories(dir);
  return dir;
}

std::ofstream OpenOut(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void WriteAudit(const fs::path& dir, const ExperimentConfig& cfg) {
  OpenOut(dir / "config.ini") << elis::config::ToIni(cfg);
}

int CmdRun(const Overrides& o) {
  const ExperimentConfig cfg = Resolve(o);
  const auto result = elis::experiment::RunExperiment(cfg);
  const fs::path dir = OutDir(o);
  {
    auto out = OpenOut(dir / "jobs.csv");
    elis::metrics::WriteJobsCsv(out, result.jobs);
  }
  OpenOut(dir / "summary.json") << elis::experiment::SummaryJson(cfg, result).dump(2) << "\n";
  WriteAudit(dir, cfg);
  const auto& s = result.summary;
  std::cout << fmt::format(
      "policy={} profile={} jobs={} avg_jct_s={:.3f} min_jct_s={:.3f} max_jct_s={:.3f} "
      "avg_queue_s={:.3f} throughput_rps={:.4f}\n",
      cfg.policy, cfg.profile, s.jobs, s.avg_jct_ms / 1000.0, s.min_jct_ms / 1000.0,
      s.max_jct_ms / 1000.0, s.avg_queue_ms / 1000.0, s.throughput_rps);
  if (!result.dead_letters.empty()) {
    std::cerr << result.dead_letters.size() << " job(s) dropped: prediction unavailable\n";
  }
  return 0;
}

std::vector<std::string> SplitList(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct SweepFlags {
  std::optional<std::string> profiles;
  std::optional<std::string> policies;
  std::optional<std::vector<double>> rps_mults;
  std::optional<std::vector<std::size_t>> batches;
  std::optional<std::size_t> repetitions;
};

int CmdSweep(const Overrides& o, const SweepFlags& f) {
  const ExperimentConfig cfg = Resolve(o);
  elis::experiment::SweepPlan plan;
  if (f.profiles) plan.profiles = SplitList(*f.profiles);
  if (f.policies) plan.policies = SplitList(*f.policies);
  if (f.rps_mults) plan.rps_mults = *f.rps_mults;
  if (f.batches) plan.batches = *f.batches;
  if (f.repetitions) plan.repetitions = *f.repetitions;
  for (const auto& p : plan.policies) elis::scheduler::ParsePolicy(p);

  const auto result = elis::experiment::RunSweep(plan, cfg);
  const fs::path dir = OutDir(o);
  {
    auto out = OpenOut(dir / "sweep.csv");
    elis::experiment::WriteSweepTable(out, result);
  }
  {
    auto out = OpenOut(dir / "improvement.csv");
    elis::experiment::WriteImprovementMatrix(out, result);
  }
  WriteAudit(dir, cfg);
  elis::experiment::WriteSweepTable(std::cout, result);
  std::cout << "\n";
  elis::experiment::WriteImprovementMatrix(std::cout, result);
  std::size_t failed = 0;
  for (const auto& c : result.cells) failed += c.failed ? 1 : 0;
  if (failed > 0) std::cerr << failed << " cell(s) failed\n";
  return 0;
}

int CmdScale(const Overrides& o, const std::vector<std::size_t>& counts,
             elis::experiment::ScaleOptions options) {
  const ExperimentConfig cfg = Resolve(o);
  const auto points = elis::experiment::RunScale(counts, cfg, options);
  const fs::path dir = OutDir(o);
  auto out = OpenOut(dir / "scale.csv");
  const std::string header = "workers,peak_rps\n";
  out << header;
  std::cout << header;
  for (const auto& p : points) {
    const std::string line =
        p.peak_rps ? fmt::format("{},{:.2f}\n", p.workers, *p.peak_rps)
                   : fmt::format("{},bound not met\n", p.workers);
    out << line;
    std::cout << line;
  }
  WriteAudit(dir, cfg);
  return 0;
}

int CmdProfilePreempt(const Overrides& o) {
  const ExperimentConfig cfg = Resolve(o);
  const auto rows = elis::experiment::ProfilePreempt(elis::experiment::ResolveProfiles(cfg));
  std::cout << "profile,model,threshold\n";
  for (const auto& r : rows) {
    std::cout << r.profile << "," << r.model_name << ","
              << (r.threshold ? std::to_string(*r.threshold) : std::string("not observed"))
              << "\n";
  }
  return 0;
}

int CmdValidateWorkload(const Overrides& o, std::size_t samples) {
  const ExperimentConfig cfg = Resolve(o);
  elis::workload::GammaArrivalConfig gamma{cfg.gamma_alpha, cfg.gamma_beta, cfg.seed,
                                           cfg.rate_mult > 0.0 ? cfg.rate_mult : 1.0};
  const auto c = elis::experiment::ValidateWorkload(gamma, samples);
  std::cout << fmt::format("samples={}\n", c.samples)
            << fmt::format("mean_s={:.4f} expected={:.4f} {}\n", c.mean_s, c.expected_mean_s,
                           c.mean_ok ? "ok" : "FAIL")
            << fmt::format("variance_s2={:.4f} expected={:.4f} {}\n", c.variance_s2,
                           c.expected_variance_s2, c.variance_ok ? "ok" : "FAIL")
            << fmt::format("ks={:.5f} {}\n", c.ks_statistic, c.ks_ok ? "ok" : "FAIL");
  return c.mean_ok && c.variance_ok && c.ks_ok ? 0 : kExitRuntime;
}

struct SaveTraceFlags {
  std::string output = "trace.csv";
  bool synthetic = false;
  double input_mu = 3.52;
  double input_sigma = 1.2;
  double output_mu = 4.868;
  double output_sigma = 1.0;
  elis::TokenCount max_tokens = 2048;
};

int CmdSaveTrace(const Overrides& o, const SaveTraceFlags& f) {
  const ExperimentConfig cfg = Resolve(o);
  std::vector<elis::PromptSpec> prompts;
  if (f.synthetic) {
    elis::workload::GammaArrivalConfig gamma{cfg.gamma_alpha, cfg.gamma_beta, cfg.seed,
                                             cfg.rate_mult > 0.0 ? cfg.rate_mult : 1.0};
    elis::workload::LengthDistributionConfig lengths{
        elis::workload::LogNormalLength{f.input_mu, f.input_sigma, f.max_tokens},
        elis::workload::LogNormalLength{f.output_mu, f.output_sigma, f.max_tokens}};
    prompts = elis::workload::SampleStream(gamma, lengths, cfg.prompts);
  } else {
    prompts = elis::experiment::BuildWorkload(cfg, elis::experiment::ResolveProfile(cfg));
  }
  elis::workload::SaveTrace(f.output, prompts);
  std::cout << "wrote " << prompts.size() << " prompts to " << f.output << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Iterative LLM scheduling simulator"};
  app.require_subcommand(1);
  Overrides o;
  app.add_option("--config", o.config_path, "INI experiment config");
  app.add_option("--seed", o.seed, "Master seed");
  app.add_option("--out-dir", o.out_dir, "Directory for output artifacts");
  app.add_option("--mode", o.mode, "sim or live")->check(CLI::IsMember({"sim", "live"}));
  app.add_option("--profiles", o.profiles_file, "INI file with worker profiles");

  auto add_run_flags = [&o](CLI::App* cmd) {
    cmd->add_option("--policy", o.policy, "fcfs, sjf or isrtf");
    cmd->add_option("--profile", o.profile, "Worker profile name");
    cmd->add_option("--rps-mult", o.rps_mult, "Multiple of the derived request rate");
    cmd->add_option("--rate-mult", o.rate_mult, "Raw Gamma rate multiplier");
    cmd->add_option("--gamma", o.gamma, "Gamma shape and scale, as alpha,beta");
    cmd->add_option("--batch", o.batch, "Max batch size");
    cmd->add_option("--workers", o.workers, "Number of worker nodes");
    cmd->add_option("--prompts", o.prompts, "Number of prompts");
    cmd->add_option("--trace", o.trace, "Replay arrivals from a trace CSV");
    cmd->add_option("--predictor", o.predictor, "oracle, constant:<c>, noisy or trace:<path>");
    cmd->add_option("--mae-schedule", o.mae_schedule, "Per-step MAE list");
    cmd->add_option("--repetition", o.repetition, "Repetition index");
  };

  auto* run = app.add_subcommand("run", "Run one experiment");
  add_run_flags(run);

  SweepFlags sweep_flags;
  auto* sweep = app.add_subcommand("sweep", "Policy comparison over profiles, rates and batches");
  add_run_flags(sweep);
  sweep->add_option("--profile-list", sweep_flags.profiles, "Comma-separated profiles");
  sweep->add_option("--policies", sweep_flags.policies, "Comma-separated policies");
  sweep->add_option("--rps-mults", sweep_flags.rps_mults, "Rate multiples")->delimiter(',');
  sweep->add_option("--batches", sweep_flags.batches, "Batch sizes")->delimiter(',');
  sweep->add_option("--repetitions", sweep_flags.repetitions, "Repetitions per cell");

  std::vector<std::size_t> counts = {10, 20, 30, 40, 50};
  elis::experiment::ScaleOptions scale_options;
  auto* scale = app.add_subcommand("scale", "Peak throughput per worker count");
  add_run_flags(scale);
  scale->add_option("--counts", counts, "Worker counts")->delimiter(',');
  scale->add_option("--delay-bound", scale_options.search.delay_bound_s,
                    "Queuing delay bound in seconds");
  scale->add_option("--min-prompts", scale_options.min_prompts, "Minimum prompts per probe");
  scale->add_option("--prompts-per-worker", scale_options.prompts_per_worker,
                    "Prompts per worker per probe");
  scale->add_option("--search-reps", scale_options.search.repetitions, "Repetitions per probe");

  auto* preempt = app.add_subcommand("profile-preempt", "Report preemption thresholds");

  std::size_t samples = 100000;
  auto* validate = app.add_subcommand("validate-workload", "Check Gamma arrival statistics");
  add_run_flags(validate);
  validate->add_option("--samples", samples, "Number of intervals to draw");

  SaveTraceFlags save_flags;
  auto* save = app.add_subcommand("save-trace", "Write a trace CSV");
  add_run_flags(save);
  save->add_option("--output,-o", save_flags.output, "Output path");
  save->add_flag("--synthetic", save_flags.synthetic, "Draw lognormal lengths instead of the bundled workload");
  save->add_option("--input-mu", save_flags.input_mu);
  save->add_option("--input-sigma", save_flags.input_sigma);
  save->add_option("--output-mu", save_flags.output_mu);
  save->add_option("--output-sigma", save_flags.output_sigma);
  save->add_option("--max-tokens", save_flags.max_tokens);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return CmdRun(o);
    if (*sweep) return CmdSweep(o, sweep_flags);
    if (*scale) return CmdScale(o, counts, scale_options);
    if (*preempt) return CmdProfilePreempt(o);
    if (*validate) return CmdValidateWorkload(o, samples);
    if (*save) return CmdSaveTrace(o, save_flags);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const elis::workload::ParseError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
