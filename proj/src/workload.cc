#include "elis/workload.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string_view>

#include <fmt/format.h>

#include "elis/ground_truth.h"

namespace elis::workload {

namespace {

constexpr std::uint64_t kIntervalStream = 0x1;
constexpr std::uint64_t kInputStream = 0x2;
constexpr std::uint64_t kOutputStream = 0x3;

std::string_view Trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

template <typename T>
bool ParseNumber(std::string_view field, T& out) {
  field = Trim(field);
  if (field.empty()) return false;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
  return ec == std::errc() && ptr == field.data() + field.size();
}

TraceRecord ParseRow(std::string_view row, std::size_t line) {
  std::string_view fields[3];
  std::size_t count = 0;
  while (true) {
    const auto comma = row.find(',');
    if (count == 3) throw ParseError(line, "expected 3 fields");
    fields[count++] = row.substr(0, comma);
    if (comma == std::string_view::npos) break;
    row.remove_prefix(comma + 1);
  }
  if (count != 3) throw ParseError(line, "expected 3 fields");

  TraceRecord rec;
  std::int64_t input = 0;
  std::int64_t output = 0;
  if (!ParseNumber(fields[0], rec.interval_s) || !std::isfinite(rec.interval_s) ||
      rec.interval_s < 0.0) {
    throw ParseError(line, "interval_s must be a finite number >= 0");
  }
  if (!ParseNumber(fields[1], input) || input < 1 || input > UINT32_MAX) {
    throw ParseError(line, "input_len must be an integer >= 1");
  }
  if (!ParseNumber(fields[2], output) || output < 1 || output > UINT32_MAX) {
    throw ParseError(line, "output_len must be an integer >= 1");
  }
  rec.input_len = static_cast<TokenCount>(input);
  rec.output_len = static_cast<TokenCount>(output);
  return rec;
}

std::vector<PromptSpec> Build(std::span<const TraceRecord> records,
                              std::span<const double> intervals_s,
                              const std::string& tag, bool strictly_increasing) {
  std::vector<PromptSpec> prompts;
  prompts.reserve(records.size());
  double clock_ms = 0.0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    double next = clock_ms + intervals_s[i] * 1000.0;
    if (strictly_increasing && i > 0 && next <= clock_ms) {
      next = std::nextafter(clock_ms, INFINITY);
    }
    prompts.emplace_back(JobId{i}, SimTime(next), records[i].input_len,
                         records[i].output_len, tag);
    clock_ms = next;
  }
  return prompts;
}

}  // namespace

ParseError::ParseError(std::size_t line, const std::string& what)
    : std::runtime_error(fmt::format("trace line {}: {}", line, what)), line_(line) {}

void GammaArrivalConfig::Validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw InvalidConfig("gamma shape must be positive");
  }
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw InvalidConfig("gamma scale must be positive");
  }
  if (!(rate_multiplier > 0.0) || !std::isfinite(rate_multiplier)) {
    throw InvalidConfig("rate multiplier must be positive");
  }
}

TokenCount SampleLength(const LengthDistribution& dist, CounterRng& rng) {
  struct Visitor {
    CounterRng& rng;
    TokenCount operator()(const FixedLength& f) const {
      return f.tokens < 1 ? 1 : f.tokens;
    }
    TokenCount operator()(const LogNormalLength& l) const {
      const double x = std::exp(l.mu + l.sigma * rng.Normal());
      const double r = std::round(x);
      if (r < 1.0) return 1;
      if (r > l.max_tokens) return l.max_tokens;
      return static_cast<TokenCount>(r);
    }
    TokenCount operator()(const EmpiricalLength& e) const {
      if (e.values.empty()) throw InvalidConfig("empirical length set is empty");
      const TokenCount v = e.values[rng() % e.values.size()];
      return v < 1 ? 1 : v;
    }
  };
  return std::visit(Visitor{rng}, dist);
}

std::vector<double> SampleIntervals(const GammaArrivalConfig& cfg, std::size_t n) {
  cfg.Validate();
  const std::uint64_t base = Mix(cfg.seed, kIntervalStream);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    CounterRng rng(base, i);
    out[i] = SampleGamma(rng, cfg.alpha, cfg.beta) / cfg.rate_multiplier;
  }
  return out;
}

std::vector<PromptSpec> SampleStream(const GammaArrivalConfig& cfg,
                                     const LengthDistributionConfig& lengths,
                                     std::size_t n) {
  if (n < 1) throw InvalidConfig("stream length must be at least 1");
  const auto intervals = SampleIntervals(cfg, n);
  const std::uint64_t in_base = Mix(cfg.seed, kInputStream);
  const std::uint64_t out_base = Mix(cfg.seed, kOutputStream);

  std::vector<PromptSpec> prompts;
  prompts.reserve(n);
  double clock_ms = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double next = clock_ms + intervals[i] * 1000.0;
    // Tiny Gamma draws can vanish in the sum; keep arrivals strictly ordered.
    if (i > 0 && next <= clock_ms) next = std::nextafter(clock_ms, INFINITY);
    CounterRng in_rng(in_base, i);
    CounterRng out_rng(out_base, i);
    prompts.emplace_back(JobId{i}, SimTime(next), SampleLength(lengths.input, in_rng),
                         SampleLength(lengths.output, out_rng), "gamma");
    clock_ms = next;
  }
  return prompts;
}

std::vector<TraceRecord> ReadTraceRecords(std::istream& in) {
  std::vector<TraceRecord> records;
  std::string raw;
  std::size_t line = 0;
  bool header_seen = false;
  while (std::getline(in, raw)) {
    ++line;
    std::string_view row = Trim(raw);
    if (row.empty() || row.front() == '#') continue;
    if (!header_seen) {
      header_seen = true;
      if (row == kTraceHeader) continue;
      throw ParseError(line, fmt::format("expected header '{}'", kTraceHeader));
    }
    records.push_back(ParseRow(row, line));
  }
  if (records.empty()) throw EmptyTrace("trace contains no records");
  return records;
}

void WriteTraceRecords(std::ostream& out, std::span<const TraceRecord> records) {
  out << kTraceHeader << '\n';
  for (const auto& r : records) {
    out << fmt::format("{:.6f},{},{}\n", r.interval_s, r.input_len, r.output_len);
  }
}

std::vector<PromptSpec> PromptsFromRecords(std::span<const TraceRecord> records,
                                           const std::string& source_tag) {
  std::vector<double> intervals;
  intervals.reserve(records.size());
  for (const auto& r : records) intervals.push_back(r.interval_s);
  return Build(records, intervals, source_tag, false);
}

std::vector<TraceRecord> RecordsFromPrompts(std::span<const PromptSpec> prompts) {
  std::vector<TraceRecord> records;
  records.reserve(prompts.size());
  SimTime prev = SimTime::Zero();
  for (const auto& p : prompts) {
    records.push_back({(p.arrival_time() - prev).seconds(), p.input_len(),
                       ground_truth::OutputLength(p)});
    prev = p.arrival_time();
  }
  return records;
}

std::vector<PromptSpec> LoadTrace(const std::filesystem::path& path, TraceFormat format) {
  if (format != TraceFormat::kCsv) throw InvalidConfig("unsupported trace format");
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace " + path.string());
  const auto records = ReadTraceRecords(in);
  return PromptsFromRecords(records, path.filename().string());
}

void SaveTrace(const std::filesystem::path& path, std::span<const PromptSpec> prompts) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace " + path.string());
  const auto records = RecordsFromPrompts(prompts);
  WriteTraceRecords(out, records);
}

std::vector<PromptSpec> Retime(std::span<const TraceRecord> records,
                               const GammaArrivalConfig& cfg,
                               const std::string& source_tag) {
  const auto intervals = SampleIntervals(cfg, records.size());
  return Build(records, intervals, source_tag, true);
}

double DeriveRequestRate(const WorkerProfile& profile, std::size_t batch_size) {
  if (!(profile.avg_latency_ms > 0.0)) {
    throw InvalidConfig("profile avg_latency_ms must be positive");
  }
  if (batch_size < 1) throw InvalidConfig("batch size must be at least 1");
  return 1000.0 / profile.avg_latency_ms * static_cast<double>(batch_size);
}

double RateMultiplierFor(const GammaArrivalConfig& cfg, double target_rps) {
  if (!(target_rps > 0.0)) throw InvalidConfig("target rate must be positive");
  return target_rps * cfg.alpha * cfg.beta;
}

}  // namespace elis::workload
