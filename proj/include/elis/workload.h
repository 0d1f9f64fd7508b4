#ifndef ELIS_WORKLOAD_H_
#define ELIS_WORKLOAD_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "elis/rng.h"
#include "elis/types.h"

namespace elis::workload {

class InvalidConfig : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class EmptyTrace : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inter-arrival times ~ Gamma(alpha, beta) seconds, divided by
// rate_multiplier. Defaults are the production-trace fit.
struct GammaArrivalConfig {
  double alpha = 0.73;
  double beta = 10.41;
  std::uint64_t seed = 0;
  double rate_multiplier = 1.0;

  double MeanIntervalSeconds() const { return alpha * beta / rate_multiplier; }
  void Validate() const;
};

struct FixedLength {
  TokenCount tokens = 1;
};

struct LogNormalLength {
  double mu = 0.0;
  double sigma = 1.0;
  TokenCount max_tokens = 4096;
};

// Draws uniformly (with replacement) from observed lengths.
struct EmpiricalLength {
  std::vector<TokenCount> values;
};

using LengthDistribution =
    std::variant<FixedLength, LogNormalLength, EmpiricalLength>;

struct LengthDistributionConfig {
  LengthDistribution input = FixedLength{64};
  LengthDistribution output = FixedLength{128};
};

TokenCount SampleLength(const LengthDistribution& dist, CounterRng& rng);

// n Gamma inter-arrival draws in seconds, already scaled by 1/m. Draw i
// depends only on (seed, i).
std::vector<double> SampleIntervals(const GammaArrivalConfig& cfg,
                                    std::size_t n);

// n prompts with ids 0..n-1 whose arrival times are the running sums of the
// Gamma draws. Arrival times are strictly increasing.
std::vector<PromptSpec> SampleStream(const GammaArrivalConfig& cfg,
                                     const LengthDistributionConfig& lengths,
                                     std::size_t n);

// One row of a trace file: the gap since the previous request, then lengths.
struct TraceRecord {
  double interval_s = 0.0;
  TokenCount input_len = 1;
  TokenCount output_len = 1;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

enum class TraceFormat { kCsv };

inline constexpr std::string_view kTraceHeader = "interval_s,input_len,output_len";

std::vector<TraceRecord> ReadTraceRecords(std::istream& in);
void WriteTraceRecords(std::ostream& out, std::span<const TraceRecord> records);

std::vector<PromptSpec> PromptsFromRecords(std::span<const TraceRecord> records,
                                           const std::string& source_tag = {});
std::vector<TraceRecord> RecordsFromPrompts(std::span<const PromptSpec> prompts);

std::vector<PromptSpec> LoadTrace(const std::filesystem::path& path,
                                  TraceFormat format = TraceFormat::kCsv);
void SaveTrace(const std::filesystem::path& path,
               std::span<const PromptSpec> prompts);

// Lengths of `records` in the given order, re-timed with fresh Gamma
// arrivals from `cfg`.
std::vector<PromptSpec> Retime(std::span<const TraceRecord> records,
                               const GammaArrivalConfig& cfg,
                               const std::string& source_tag = {});

// Fisher-Yates with a counter-based stream, so the permutation is the same
// on every standard library.
template <typename T>
void Shuffle(std::vector<T>& items, std::uint64_t seed) {
  CounterRng rng(seed, 0x5f3759df);
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(items[i - 1], items[j]);
  }
}

// Average request rate a worker sustains at the given batch size:
// (1000 / avg_latency_ms) * batch_size requests per second.
double DeriveRequestRate(const WorkerProfile& profile, std::size_t batch_size);

// Gamma rate multiplier that makes the mean arrival rate equal target_rps.
double RateMultiplierFor(const GammaArrivalConfig& cfg, double target_rps);

}  // namespace elis::workload

#endif  // ELIS_WORKLOAD_H_
