#include "elis/backend.h"

#include <algorithm>
#include <limits>

#include <fmt/format.h>

#include "elis/ground_truth.h"

namespace elis::backend {

WindowResult ExecWindow(const WorkerProfile& profile, std::span<const Job* const> batch,
                        TokenCount window) {
  if (batch.empty()) throw std::invalid_argument("cannot execute an empty batch");
  if (batch.size() > profile.max_batch) {
    throw BatchTooLarge(fmt::format("batch of {} exceeds max_batch {} on {}", batch.size(),
                                    profile.max_batch, profile.name));
  }
  if (window < 1) throw std::invalid_argument("window must be at least one token");

  TokenCount shortest = std::numeric_limits<TokenCount>::max();
  double prefill_ms = 0.0;
  for (const Job* job : batch) {
    const TokenCount remaining = ground_truth::OutputLength(job->prompt) - job->generated;
    if (remaining == 0) {
      throw std::logic_error(
          fmt::format("job {} has nothing left to generate", ToUnderlying(job->id)));
    }
    shortest = std::min(shortest, remaining);
    if (job->needs_prefill) prefill_ms += profile.ttft_ms;
  }

  WindowResult result;
  result.tokens_processed = std::min(window, shortest);
  result.duration = SimTime(prefill_ms + profile.EffectiveTpot(batch.size()) *
                                             static_cast<double>(result.tokens_processed));
  result.entries.reserve(batch.size());
  for (const Job* job : batch) {
    const TokenCount remaining = ground_truth::OutputLength(job->prompt) - job->generated;
    const TokenCount produced = std::min(result.tokens_processed, remaining);
    result.entries.push_back({job->id, produced, produced == remaining});
  }
  return result;
}

std::vector<JobId> MaybePreempt(const WorkerProfile& profile,
                                std::span<const Resident> resident) {
  if (resident.size() <= profile.preempt_capacity) return {};
  std::vector<Resident> order(resident.begin(), resident.end());
  std::sort(order.begin(), order.end(), [](const Resident& a, const Resident& b) {
    if (a.priority != b.priority) return a.priority < b.priority;
    if (a.arrival != b.arrival) return a.arrival < b.arrival;
    return ToUnderlying(a.id) < ToUnderlying(b.id);
  });
  std::vector<JobId> victims;
  const std::size_t excess = order.size() - profile.preempt_capacity;
  victims.reserve(excess);
  for (std::size_t i = 0; i < excess; ++i) victims.push_back(order[order.size() - 1 - i].id);
  return victims;
}

std::optional<std::size_t> ProfilePreemption(const WorkerProfile& profile,
                                             const BatchRamp& ramp) {
  if (ramp.step == 0) throw std::invalid_argument("ramp step must be positive");
  std::vector<Resident> resident;
  for (std::size_t batch = ramp.start; batch <= ramp.max; batch += ramp.step) {
    // Full batch plus the next pooled request being admitted.
    const std::size_t offered = batch + 1;
    resident.clear();
    for (std::size_t i = 0; i < offered; ++i) {
      resident.push_back({JobId{i}, static_cast<double>(i), SimTime(static_cast<double>(i))});
    }
    if (!MaybePreempt(profile, resident).empty()) return batch;
  }
  return std::nullopt;
}

}  // namespace elis::backend
