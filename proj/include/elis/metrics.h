#ifndef ELIS_METRICS_H_
#define ELIS_METRICS_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "elis/types.h"

namespace elis::metrics {

class IncompleteRun : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BoundNeverMet : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct JobRecord {
  JobId id;
  double arrival_ms = 0.0;
  double first_exec_ms = 0.0;
  double finish_ms = 0.0;
  double jct_ms = 0.0;
  double queue_ms = 0.0;
  double service_ms = 0.0;
  std::uint32_t windows = 0;
  std::uint32_t preemptions = 0;
  TokenCount output_len = 0;
  WorkerIndex node = 0;
};

// Builds the record of a finished job. Throws IncompleteRun otherwise.
JobRecord RecordFor(const Job& job);

struct Aggregates {
  std::size_t jobs = 0;
  double avg_jct_ms = 0.0;
  double min_jct_ms = 0.0;
  double max_jct_ms = 0.0;
  double avg_queue_ms = 0.0;
  double avg_service_ms = 0.0;
  // Completed requests per second over [first arrival, last finish].
  double throughput_rps = 0.0;
  std::uint64_t windows = 0;
  std::uint64_t preemptions = 0;
};

// Counters of scheduler work, used as the overhead proxy in simulation.
struct OpCounts {
  std::uint64_t iterations = 0;
  std::uint64_t predictions = 0;
  std::uint64_t comparisons = 0;
  std::uint64_t batches = 0;
  std::uint64_t pool_pushes = 0;
};

struct WorkerStats {
  double busy_ms = 0.0;
  std::uint64_t tokens = 0;
  std::uint64_t windows = 0;
};

struct ExperimentResult {
  std::vector<JobRecord> jobs;
  Aggregates summary;
  OpCounts ops;
  std::vector<WorkerStats> workers;
  std::vector<JobId> dead_letters;
  double makespan_ms = 0.0;
};

Aggregates Summarize(std::span<const JobRecord> records);

// (baseline - candidate) / baseline * 100.
double ImprovementPercent(double baseline, double candidate);

struct Decomposition {
  double jct_reduction_pct = 0.0;
  double queue_reduction_pct = 0.0;
  // |jct - queue| in percentage points.
  double gap_pp = 0.0;
};

Decomposition Decompose(const Aggregates& baseline, const Aggregates& candidate);

inline constexpr std::string_view kJobsCsvHeader =
    "id,arrival_ms,first_exec_ms,finish_ms,jct_ms,queue_ms,windows,preemptions";

// Rows are written in id order with shortest round-trip formatting, so
// identical runs give identical bytes.
void WriteJobsCsv(std::ostream& out, std::span<const JobRecord> records);

struct PeakSearch {
  double delay_bound_s = 0.5;
  double min_rps = 0.01;
  double max_rps = 100.0;
  double resolution_rps = 0.01;
  std::size_t repetitions = 3;
};

// Measures a system at `rate_rps` for repetition `rep`.
using RateProbe = std::function<Aggregates(double rate_rps, std::size_t rep)>;

// Highest request rate (to resolution_rps) at which the repetition-averaged
// mean queuing delay stays within the bound, found by bisection. With an
// infinite bound, returns the measured throughput at max_rps instead.
// Throws BoundNeverMet when even min_rps violates the bound.
double PeakThroughput(const RateProbe& probe, const PeakSearch& search);

}  // namespace elis::metrics

#endif  // ELIS_METRICS_H_
