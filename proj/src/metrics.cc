#include "elis/metrics.h"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "elis/ground_truth.h"

namespace elis::metrics {

JobRecord RecordFor(const Job& job) {
  if (job.state != JobState::kFinished || !job.t_finish || !job.t_first_exec) {
    throw IncompleteRun(fmt::format("job {} has not finished", ToUnderlying(job.id)));
  }
  JobRecord r;
  r.id = job.id;
  r.arrival_ms = job.t_arrival.ms();
  r.first_exec_ms = job.t_first_exec->ms();
  r.finish_ms = job.t_finish->ms();
  r.jct_ms = r.finish_ms - r.arrival_ms;
  r.queue_ms = job.queue_wait_accum.ms();
  r.service_ms = job.service_accum.ms();
  r.windows = job.windows;
  r.preemptions = job.preemptions;
  r.output_len = ground_truth::OutputLength(job.prompt);
  r.node = job.node.value_or(0);
  return r;
}

Aggregates Summarize(std::span<const JobRecord> records) {
  Aggregates a;
  a.jobs = records.size();
  if (records.empty()) return a;
  double jct = 0.0, queue = 0.0, service = 0.0;
  double first_arrival = records.front().arrival_ms;
  double last_finish = records.front().finish_ms;
  a.min_jct_ms = records.front().jct_ms;
  a.max_jct_ms = records.front().jct_ms;
  for (const auto& r : records) {
    if (!(r.finish_ms >= r.arrival_ms)) {
      throw IncompleteRun(fmt::format("job {} has no valid finish time", ToUnderlying(r.id)));
    }
    jct += r.jct_ms;
    queue += r.queue_ms;
    service += r.service_ms;
    a.min_jct_ms = std::min(a.min_jct_ms, r.jct_ms);
    a.max_jct_ms = std::max(a.max_jct_ms, r.jct_ms);
    first_arrival = std::min(first_arrival, r.arrival_ms);
    last_finish = std::max(last_finish, r.finish_ms);
    a.windows += r.windows;
    a.preemptions += r.preemptions;
  }
  const double n = static_cast<double>(records.size());
  a.avg_jct_ms = jct / n;
  a.avg_queue_ms = queue / n;
  a.avg_service_ms = service / n;
  const double span_ms = last_finish - first_arrival;
  a.throughput_rps = span_ms > 0.0 ? n / span_ms * 1000.0 : 0.0;
  return a;
}

double ImprovementPercent(double baseline, double candidate) {
  if (baseline == 0.0) return 0.0;
  return (baseline - candidate) / baseline * 100.0;
}

Decomposition Decompose(const Aggregates& baseline, const Aggregates& candidate) {
  Decomposition d;
  d.jct_reduction_pct = ImprovementPercent(baseline.avg_jct_ms, candidate.avg_jct_ms);
  d.queue_reduction_pct = ImprovementPercent(baseline.avg_queue_ms, candidate.avg_queue_ms);
  d.gap_pp = std::fabs(d.jct_reduction_pct - d.queue_reduction_pct);
  return d;
}

void WriteJobsCsv(std::ostream& out, std::span<const JobRecord> records) {
  std::vector<const JobRecord*> sorted;
  sorted.reserve(records.size());
  for (const auto& r : records) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(), [](const JobRecord* a, const JobRecord* b) {
    return ToUnderlying(a->id) < ToUnderlying(b->id);
  });
  out << kJobsCsvHeader << '\n';
  for (const JobRecord* r : sorted) {
    out << fmt::format("{},{},{},{},{},{},{},{}\n", ToUnderlying(r->id), r->arrival_ms,
                       r->first_exec_ms, r->finish_ms, r->jct_ms, r->queue_ms, r->windows,
                       r->preemptions);
  }
}

double PeakThroughput(const RateProbe& probe, const PeakSearch& search) {
  if (!(search.min_rps > 0.0) || !(search.max_rps > search.min_rps) ||
      search.repetitions == 0 || !(search.resolution_rps > 0.0)) {
    throw std::invalid_argument("invalid peak-throughput search range");
  }
  auto mean_over_reps = [&](double rate, auto field) {
    double total = 0.0;
    for (std::size_t rep = 0; rep < search.repetitions; ++rep) {
      total += field(probe(rate, rep));
    }
    return total / static_cast<double>(search.repetitions);
  };
  auto queue_s = [](const Aggregates& a) { return a.avg_queue_ms / 1000.0; };

  if (std::isinf(search.delay_bound_s)) {
    return mean_over_reps(search.max_rps,
                          [](const Aggregates& a) { return a.throughput_rps; });
  }
  auto within = [&](double rate) {
    return mean_over_reps(rate, queue_s) <= search.delay_bound_s;
  };

  double lo = search.min_rps;
  double hi = search.max_rps;
  if (!within(lo)) {
    throw BoundNeverMet(fmt::format("mean queuing delay exceeds {} s even at {} req/s",
                                    search.delay_bound_s, lo));
  }
  if (within(hi)) return hi;
  while (hi - lo > search.resolution_rps) {
    const double mid = 0.5 * (lo + hi);
    (within(mid) ? lo : hi) = mid;
  }
  const double snapped =
      std::floor(lo / search.resolution_rps + 1e-9) * search.resolution_rps;
  return std::max(snapped, search.min_rps);
}

}  // namespace elis::metrics
