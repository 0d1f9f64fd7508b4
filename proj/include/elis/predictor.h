#ifndef ELIS_PREDICTOR_H_
#define ELIS_PREDICTOR_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "elis/types.h"

namespace elis::predictor {

inline constexpr TokenCount kDefaultWindow = 50;

class MissingTracePrediction : public std::runtime_error {
 public:
  explicit MissingTracePrediction(JobId id);
};

class InvalidModel : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Per-step absolute-error scale; steps past the end reuse the last entry.
class MaeSchedule {
 public:
  // Calibrated stand-in: starts at the trained predictor's reported MAE of
  // ~19.9 tokens and decays as partial output accumulates.
  static MaeSchedule Default();

  explicit MaeSchedule(std::vector<double> per_step);

  double At(std::size_t step) const;
  const std::vector<double>& values() const { return per_step_; }
  bool NonIncreasing() const;

 private:
  std::vector<double> per_step_;
};

struct Oracle {};

struct Constant {
  double tokens = 100.0;
};

// Externally produced predictions, keyed by (job id, step). A step without an
// entry falls back to the latest earlier step of the same job.
struct TraceDriven {
  std::map<std::uint64_t, std::map<std::size_t, double>> predicted_total;
};

// Synthetic predictor: the true length plus a Laplace error whose scale is
// the schedule entry for the current step. The draw for (job id, step) is a
// pure function of the seed.
struct NoisyIterative {
  MaeSchedule schedule = MaeSchedule::Default();
  std::uint64_t seed = 0;
};

using Variant = std::variant<Oracle, Constant, TraceDriven, NoisyIterative>;

class PredictorModel {
 public:
  PredictorModel() = default;
  explicit PredictorModel(Variant v, TokenCount window = kDefaultWindow);

  // Estimate for a job that has produced nothing yet.
  double Init(const Job& job) const;
  // Estimate of the remaining tokens once the job has produced some output.
  double Iter(const Job& job) const;

  // Step index used for a job with `generated` tokens: generated / window.
  std::size_t StepFor(TokenCount generated) const { return generated / window_; }

  TokenCount window() const { return window_; }
  const Variant& variant() const { return variant_; }
  // True for models that consult the hidden response length.
  bool ReadsGroundTruth() const;
  std::string Describe() const;

 private:
  double Remaining(const Job& job) const;

  Variant variant_ = Oracle{};
  TokenCount window_ = kDefaultWindow;
};

// Parses "job_id,step,predicted_total" rows (header required, '#' comments).
TraceDriven ReadTraceDriven(std::istream& in);
TraceDriven LoadTraceDriven(const std::filesystem::path& path);

// "oracle", "constant:<c>", "noisy", "trace:<path>".
PredictorModel ParseSpec(const std::string& spec, const MaeSchedule& schedule,
                         std::uint64_t seed, TokenCount window = kDefaultWindow);

// Comma-separated non-negative numbers.
MaeSchedule ParseSchedule(const std::string& text);

}  // namespace elis::predictor

#endif  // ELIS_PREDICTOR_H_
