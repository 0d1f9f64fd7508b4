#include "elis/predictor.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

#include <fmt/format.h>

#include "elis/ground_truth.h"
#include "elis/rng.h"

namespace elis::predictor {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double ParseDouble(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw InvalidModel(fmt::format("not a number: '{}'", s));
  }
  return v;
}

}  // namespace

MissingTracePrediction::MissingTracePrediction(JobId id)
    : std::runtime_error(
          fmt::format("no trace prediction for job {}", ToUnderlying(id))) {}

MaeSchedule MaeSchedule::Default() {
  return MaeSchedule({19.9, 16.0, 12.5, 9.5, 7.0, 5.0});
}

MaeSchedule::MaeSchedule(std::vector<double> per_step) : per_step_(std::move(per_step)) {
  if (per_step_.empty()) throw InvalidModel("MAE schedule must not be empty");
  for (const double v : per_step_) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw InvalidModel("MAE schedule entries must be finite and >= 0");
    }
  }
}

double MaeSchedule::At(std::size_t step) const {
  return per_step_[std::min(step, per_step_.size() - 1)];
}

bool MaeSchedule::NonIncreasing() const {
  return std::is_sorted(per_step_.rbegin(), per_step_.rend());
}

PredictorModel::PredictorModel(Variant v, TokenCount window)
    : variant_(std::move(v)), window_(window) {
  if (window_ < 1) throw InvalidModel("window must be at least one token");
  if (const auto* c = std::get_if<Constant>(&variant_)) {
    if (!(c->tokens >= 0.0) || !std::isfinite(c->tokens)) {
      throw InvalidModel("constant prediction must be finite and >= 0");
    }
  }
}

double PredictorModel::Init(const Job& job) const {
  if (job.generated != 0) {
    throw std::invalid_argument("Init called on a job that already produced output");
  }
  return Remaining(job);
}

double PredictorModel::Iter(const Job& job) const { return Remaining(job); }

double PredictorModel::Remaining(const Job& job) const {
  const double generated = job.generated;
  const std::size_t step = StepFor(job.generated);
  return std::visit(
      Overloaded{
          [&](const Oracle&) {
            return static_cast<double>(ground_truth::OutputLength(job.prompt)) - generated;
          },
          [&](const Constant& c) { return std::max(0.0, c.tokens - generated); },
          [&](const TraceDriven& t) {
            const auto it = t.predicted_total.find(ToUnderlying(job.id));
            if (it == t.predicted_total.end() || it->second.empty()) {
              throw MissingTracePrediction(job.id);
            }
            auto s = it->second.upper_bound(step);
            if (s == it->second.begin()) throw MissingTracePrediction(job.id);
            --s;
            return std::max(0.0, s->second - generated);
          },
          [&](const NoisyIterative& n) {
            CounterRng rng(Mix(n.seed, ToUnderlying(job.id)), step);
            const double truth = ground_truth::OutputLength(job.prompt);
            const double total =
                std::max(0.0, std::round(truth + rng.Laplace(n.schedule.At(step))));
            return std::max(0.0, total - generated);
          },
      },
      variant_);
}

bool PredictorModel::ReadsGroundTruth() const {
  return std::holds_alternative<Oracle>(variant_) ||
         std::holds_alternative<NoisyIterative>(variant_);
}

std::string PredictorModel::Describe() const {
  return std::visit(
      Overloaded{
          [](const Oracle&) { return std::string("oracle"); },
          [](const Constant& c) { return fmt::format("constant:{}", c.tokens); },
          [](const TraceDriven& t) {
            return fmt::format("trace({} jobs)", t.predicted_total.size());
          },
          [](const NoisyIterative& n) {
            return fmt::format("noisy(seed={}, mae=[{}])", n.seed,
                               fmt::join(n.schedule.values(), ","));
          },
      },
      variant_);
}

TraceDriven ReadTraceDriven(std::istream& in) {
  TraceDriven out;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view row(line);
    while (!row.empty() && (row.back() == '\r' || row.back() == ' ')) row.remove_suffix(1);
    if (row.empty() || row.front() == '#') continue;
    if (!header) {
      header = true;
      if (row != "job_id,step,predicted_total") {
        throw InvalidModel(fmt::format("line {}: expected header job_id,step,predicted_total",
                                       lineno));
      }
      continue;
    }
    std::vector<std::string_view> fields;
    for (std::size_t pos = 0;;) {
      const auto comma = row.find(',', pos);
      fields.push_back(row.substr(pos, comma - pos));
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    if (fields.size() != 3) {
      throw InvalidModel(fmt::format("line {}: expected 3 fields", lineno));
    }
    try {
      const double id = ParseDouble(fields[0]);
      const double step = ParseDouble(fields[1]);
      const double total = ParseDouble(fields[2]);
      if (id < 0 || step < 0 || total < 0 || id != std::floor(id) || step != std::floor(step)) {
        throw InvalidModel("negative or fractional field");
      }
      out.predicted_total[static_cast<std::uint64_t>(id)][static_cast<std::size_t>(step)] =
          total;
    } catch (const InvalidModel& e) {
      throw InvalidModel(fmt::format("line {}: {}", lineno, e.what()));
    }
  }
  return out;
}

TraceDriven LoadTraceDriven(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open prediction trace " + path.string());
  return ReadTraceDriven(in);
}

PredictorModel ParseSpec(const std::string& spec, const MaeSchedule& schedule,
                         std::uint64_t seed, TokenCount window) {
  if (spec == "oracle") return PredictorModel(Oracle{}, window);
  if (spec == "noisy") return PredictorModel(NoisyIterative{schedule, seed}, window);
  if (spec.rfind("constant:", 0) == 0) {
    return PredictorModel(Constant{ParseDouble(spec.substr(9))}, window);
  }
  if (spec.rfind("trace:", 0) == 0) {
    return PredictorModel(LoadTraceDriven(spec.substr(6)), window);
  }
  throw InvalidModel("unknown predictor '" + spec + "'");
}

MaeSchedule ParseSchedule(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) values.push_back(ParseDouble(item));
  return MaeSchedule(std::move(values));
}

}  // namespace elis::predictor
