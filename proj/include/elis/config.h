#ifndef ELIS_CONFIG_H_
#define ELIS_CONFIG_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "elis/types.h"

namespace elis::config {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Fully resolved experiment settings. Serializes to the same INI layout it
// is read from, so an emitted config reproduces its run.
struct ExperimentConfig {
  // [policy]
  std::string policy = "isrtf";
  std::uint32_t aging_boost_after = 0;  // 0 disables aging
  double aging_boost_amount = 0.0;

  // [predictor]
  std::string predictor = "noisy";
  std::string mae_schedule = "19.9,16,12.5,9.5,7,5";
  TokenCount window = 50;

  // [workers]
  std::string profile = "lam13";
  std::string profiles_file;  // empty: built-in profiles
  std::size_t count = 1;
  std::size_t max_batch = 4;
  std::size_t preempt_capacity = 0;  // 0: keep the profile's value

  // [workload]
  std::string trace;           // explicit arrivals; overrides the generator
  std::string lengths_file;    // empty: bundled standard workload
  std::size_t prompts = 200;
  double gamma_alpha = 0.73;
  double gamma_beta = 10.41;
  double rps_mult = 1.0;       // multiple of the profile's derived request rate
  double rate_mult = 0.0;      // raw Gamma rate multiplier; > 0 overrides rps_mult

  // [run]
  std::uint64_t seed = 1;
  std::size_t repetition = 0;
  std::string mode = "sim";
  double decision_overhead_ms = 0.0;
  double live_time_scale = 0.001;  // wall seconds per simulated second

  void Validate() const;
};

// Reads INI text and overlays it on `base`. Unknown keys are errors.
ExperimentConfig ParseIni(std::istream& in, ExperimentConfig base = {});
ExperimentConfig LoadIni(const std::filesystem::path& path, ExperimentConfig base = {});
std::string ToIni(const ExperimentConfig& cfg);
nlohmann::json ToJson(const ExperimentConfig& cfg);

using ProfileSet = std::map<std::string, WorkerProfile>;

// Shipped profiles: average latencies from the reference hardware, KV
// capacities from the preemption profiling, and synthetic TTFT/TPOT
// back-solved against the standard workload's mean response length.
ProfileSet BuiltinProfiles();

// One INI section per profile with keys model_name, ttft_ms, tpot_ms, c,
// max_batch, preempt_capacity, avg_latency_ms.
ProfileSet ParseProfiles(std::istream& in);
ProfileSet LoadProfiles(const std::filesystem::path& path);
void WriteProfiles(std::ostream& out, const ProfileSet& profiles);

// Mean response length the built-in profiles were calibrated against.
double CalibrationMeanOutput();

// Builds a profile with ttft = 5% of avg latency and the remaining 95% spread
// over `mean_output_len` decode steps.
WorkerProfile SyntheticProfile(std::string name, std::string model_name, double avg_latency_ms,
                               std::size_t preempt_capacity, double mean_output_len);

}  // namespace elis::config

#endif  // ELIS_CONFIG_H_
