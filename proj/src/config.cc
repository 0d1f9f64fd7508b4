#include "elis/config.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

namespace elis::config {

namespace {

namespace pt = boost::property_tree;

template <typename T>
T ParseValue(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw ConfigError(fmt::format("invalid value '{}' for {}", text, key));
  }
  return value;
}

struct Field {
  std::string section;
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T>
Field Number(std::string section, std::string key, T ExperimentConfig::*member) {
  const std::string full = section + "." + key;
  return {section, key,
          [member, full](ExperimentConfig& c, const std::string& v) {
            c.*member = ParseValue<T>(full, v);
          },
          [member](const ExperimentConfig& c) { return fmt::format("{}", c.*member); }};
}

Field Text(std::string section, std::string key, std::string ExperimentConfig::*member) {
  return {section, key,
          [member](ExperimentConfig& c, const std::string& v) { c.*member = v; },
          [member](const ExperimentConfig& c) { return c.*member; }};
}

const std::vector<Field>& Fields() {
  static const std::vector<Field> fields = {
      Text("policy", "kind", &ExperimentConfig::policy),
      Number("policy", "aging_boost_after", &ExperimentConfig::aging_boost_after),
      Number("policy", "aging_boost_amount", &ExperimentConfig::aging_boost_amount),
      Text("predictor", "kind", &ExperimentConfig::predictor),
      Text("predictor", "mae_schedule", &ExperimentConfig::mae_schedule),
      Number("predictor", "window", &ExperimentConfig::window),
      Text("workers", "profile", &ExperimentConfig::profile),
      Text("workers", "profiles_file", &ExperimentConfig::profiles_file),
      Number("workers", "count", &ExperimentConfig::count),
      Number("workers", "max_batch", &ExperimentConfig::max_batch),
      Number("workers", "preempt_capacity", &ExperimentConfig::preempt_capacity),
      Text("workload", "trace", &ExperimentConfig::trace),
      Text("workload", "lengths_file", &ExperimentConfig::lengths_file),
      Number("workload", "prompts", &ExperimentConfig::prompts),
      Number("workload", "gamma_alpha", &ExperimentConfig::gamma_alpha),
      Number("workload", "gamma_beta", &ExperimentConfig::gamma_beta),
      Number("workload", "rps_mult", &ExperimentConfig::rps_mult),
      Number("workload", "rate_mult", &ExperimentConfig::rate_mult),
      Number("run", "seed", &ExperimentConfig::seed),
      Number("run", "repetition", &ExperimentConfig::repetition),
      Text("run", "mode", &ExperimentConfig::mode),
      Number("run", "decision_overhead_ms", &ExperimentConfig::decision_overhead_ms),
      Number("run", "live_time_scale", &ExperimentConfig::live_time_scale),
  };
  return fields;
}

pt::ptree ReadIni(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(e.what());
  }
  return tree;
}

}  // namespace

void ExperimentConfig::Validate() const {
  if (policy != "fcfs" && policy != "sjf" && policy != "isrtf") {
    throw ConfigError("policy.kind must be fcfs, sjf or isrtf");
  }
  if (window < 1) throw ConfigError("predictor.window must be >= 1");
  if (count < 1) throw ConfigError("workers.count must be >= 1");
  if (max_batch < 1) throw ConfigError("workers.max_batch must be >= 1");
  if (!(gamma_alpha > 0.0) || !(gamma_beta > 0.0)) {
    throw ConfigError("workload gamma parameters must be positive");
  }
  if (!(rps_mult > 0.0) || rate_mult < 0.0) {
    throw ConfigError("workload rate multipliers must be positive");
  }
  if (mode != "sim" && mode != "live") throw ConfigError("run.mode must be sim or live");
  if (decision_overhead_ms < 0.0) throw ConfigError("run.decision_overhead_ms must be >= 0");
  if (!(live_time_scale > 0.0)) throw ConfigError("run.live_time_scale must be positive");
}

ExperimentConfig ParseIni(std::istream& in, ExperimentConfig base) {
  const pt::ptree tree = ReadIni(in);
  for (const auto& [section, body] : tree) {
    for (const auto& [key, value] : body) {
      const auto& fields = Fields();
      const auto it = std::find_if(fields.begin(), fields.end(), [&](const Field& f) {
        return f.section == section && f.key == key;
      });
      if (it == fields.end()) throw ConfigError(fmt::format("unknown key {}.{}", section, key));
      it->set(base, value.get_value<std::string>());
    }
  }
  base.Validate();
  return base;
}

ExperimentConfig LoadIni(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return ParseIni(in, std::move(base));
}

std::string ToIni(const ExperimentConfig& cfg) {
  std::string out;
  std::string section;
  for (const Field& f : Fields()) {
    if (f.section != section) {
      if (!section.empty()) out += '\n';
      section = f.section;
      out += fmt::format("[{}]\n", section);
    }
    out += fmt::format("{} = {}\n", f.key, f.get(cfg));
  }
  return out;
}

nlohmann::json ToJson(const ExperimentConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const Field& f : Fields()) j[f.section][f.key] = f.get(cfg);
  return j;
}

double CalibrationMeanOutput() { return 211.925; }

WorkerProfile SyntheticProfile(std::string name, std::string model_name, double avg_latency_ms,
                               std::size_t preempt_capacity, double mean_output_len) {
  WorkerProfile p;
  p.name = std::move(name);
  p.model_name = std::move(model_name);
  p.avg_latency_ms = avg_latency_ms;
  p.ttft_ms = 0.05 * avg_latency_ms;
  p.tpot_ms = 0.95 * avg_latency_ms / mean_output_len;
  p.batch_slowdown_coeff = 0.0;
  p.max_batch = 4;
  p.preempt_capacity = preempt_capacity;
  return p;
}

ProfileSet BuiltinProfiles() {
  const double mean = CalibrationMeanOutput();
  ProfileSet set;
  auto add = [&](const char* name, const char* model, double latency, std::size_t capacity) {
    set.emplace(name, SyntheticProfile(name, model, latency, capacity, mean));
  };
  add("opt6.7", "OPT-6.7B", 1315.5, 30);
  add("opt13", "OPT-13B", 2643.2, 60);
  add("lam7", "LlaMA2-7B", 6522.2, 40);
  add("lam13", "LlaMA2-13B", 8610.2, 120);
  add("vic", "Vicuna-13B", 2964.9, 90);
  return set;
}

ProfileSet ParseProfiles(std::istream& in) {
  const pt::ptree tree = ReadIni(in);
  ProfileSet set;
  for (const auto& [name, body] : tree) {
    WorkerProfile p;
    p.name = name;
    p.model_name = name;
    for (const auto& [key, node] : body) {
      const std::string v = node.get_value<std::string>();
      const std::string full = name + "." + key;
      if (key == "model_name") {
        p.model_name = v;
      } else if (key == "ttft_ms") {
        p.ttft_ms = ParseValue<double>(full, v);
      } else if (key == "tpot_ms") {
        p.tpot_ms = ParseValue<double>(full, v);
      } else if (key == "c") {
        p.batch_slowdown_coeff = ParseValue<double>(full, v);
      } else if (key == "max_batch") {
        p.max_batch = ParseValue<std::size_t>(full, v);
      } else if (key == "preempt_capacity") {
        p.preempt_capacity = ParseValue<std::size_t>(full, v);
      } else if (key == "avg_latency_ms") {
        p.avg_latency_ms = ParseValue<double>(full, v);
      } else {
        throw ConfigError("unknown profile key " + full);
      }
    }
    if (!(p.ttft_ms > 0.0) || !(p.tpot_ms > 0.0) || !(p.avg_latency_ms > 0.0) ||
        p.batch_slowdown_coeff < 0.0 || p.max_batch < 1 || p.preempt_capacity < 1) {
      throw ConfigError("profile " + name + " has non-positive latencies or capacities");
    }
    set.emplace(name, std::move(p));
  }
  return set;
}

ProfileSet LoadProfiles(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open profiles " + path.string());
  return ParseProfiles(in);
}

void WriteProfiles(std::ostream& out, const ProfileSet& profiles) {
  bool first = true;
  for (const auto& [name, p] : profiles) {
    if (!first) out << '\n';
    first = false;
    out << fmt::format(
        "[{}]\nmodel_name = {}\nttft_ms = {}\ntpot_ms = {}\nc = {}\nmax_batch = {}\n"
        "preempt_capacity = {}\navg_latency_ms = {}\n",
        name, p.model_name, p.ttft_ms, p.tpot_ms, p.batch_slowdown_coeff, p.max_batch,
        p.preempt_capacity, p.avg_latency_ms);
  }
}

}  // namespace elis::config
