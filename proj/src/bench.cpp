#include "spinsched/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "spinsched/error.hpp"

namespace spinsched {
namespace {

using nlohmann::json;

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    auto t = trim(item);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

std::uint64_t to_unsigned(const std::string& key, const std::string& value, std::size_t line) {
  try {
    std::size_t used = 0;
    if (!value.empty() && value[0] == '-') throw std::invalid_argument(value);
    const auto v = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ParseError(key + " expects a non-negative integer, got '" + value + "'", line);
  }
}

double to_real(const std::string& key, const std::string& value, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ParseError(key + " expects a real number, got '" + value + "'", line);
  }
}

bool to_bool(const std::string& key, const std::string& value, std::size_t line) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ParseError(key + " expects true or false, got '" + value + "'", line);
}

CloudSource parse_cloud_source(const std::string& value, std::size_t line) {
  CloudSource c;
  const auto parts = split(value, ':');
  if (parts.size() == 3 && parts[0] == "synth") {
    c.synthetic = true;
    c.kind = parse_synth_kind(parts[1]);
    c.count = to_unsigned("cloud", parts[2], line);
    return c;
  }
  if (parts.size() >= 2 && parts[0] == "file") {
    c.synthetic = false;
    std::string path = parts[1];
    c.format = CloudFormat::kXyzn;
    if (parts.size() >= 3) c.format = parse_cloud_format(parts.back());
    for (std::size_t i = 2; i + 1 < parts.size(); ++i) path += ":" + parts[i];
    c.file = path;
    return c;
  }
  throw ParseError("cloud expects synth:<kind>:<count> or file:<path>[:<format>]", line);
}

DelayMode parse_delay_mode(const std::string& value, std::size_t line) {
  if (value == "auto") return DelayMode::kAuto;
  if (value == "busy") return DelayMode::kBusyWait;
  if (value == "sleep") return DelayMode::kSleep;
  throw ParseError("delay_mode expects auto, busy or sleep", line);
}

PointCloud materialize(const CloudSource& source, std::uint64_t seed) {
  if (source.synthetic) return synth_cloud(source.kind, source.count, seed);
  return load_point_cloud(source.file, source.format);
}

double interpolate(const std::vector<double>& sorted, double p) {
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

json stats_to_json(const DescriptiveStats& s) {
  return {{"min", s.min}, {"max", s.max}, {"mean", s.mean},
          {"median", s.median}, {"q1", s.q1}, {"q3", s.q3}};
}

}  // namespace

double parallel_cost(std::size_t workers, double parallel_time_s) {
  return static_cast<double>(workers) * parallel_time_s;
}

LoadImbalance load_imbalance(std::span<const double> finishing_times) {
  if (finishing_times.empty()) throw ValidationError("no finishing times");
  for (double t : finishing_times) {
    if (!(t > 0.0)) throw ValidationError("finishing times must be positive");
  }
  const double n = static_cast<double>(finishing_times.size());
  const double mean = std::accumulate(finishing_times.begin(), finishing_times.end(), 0.0) / n;
  double ss = 0.0;
  for (double t : finishing_times) ss += (t - mean) * (t - mean);
  const double max = *std::max_element(finishing_times.begin(), finishing_times.end());
  return {max / mean, std::sqrt(ss / n) / mean};
}

DescriptiveStats describe(std::span<const double> values) {
  if (values.empty()) throw ValidationError("no values to describe");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  DescriptiveStats s;
  s.min = sorted.front();
  s.max = sorted.back();
  s.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(sorted.size());
  s.median = interpolate(sorted, 0.5);
  s.q1 = interpolate(sorted, 0.25);
  s.q3 = interpolate(sorted, 0.75);
  return s;
}

void ExperimentSpec::validate() const {
  if (worker_counts.empty()) throw ValidationError("worker_counts must not be empty");
  for (std::size_t i = 0; i < worker_counts.size(); ++i) {
    if (worker_counts[i] == 0) throw ValidationError("worker counts must be positive");
    if (i > 0 && worker_counts[i] <= worker_counts[i - 1]) {
      throw ValidationError("worker_counts must be strictly increasing");
    }
  }
  if (kinds.empty()) throw ValidationError("kinds must not be empty");
  if (repetitions < 1) throw ValidationError("repetitions must be at least 1");
  for (double s : slowdowns) {
    if (!(s >= 1.0)) throw ValidationError("slowdowns must be >= 1.0");
  }
  if (mode == ScalingMode::kWeak) {
    if (images_per_worker_group == 0) throw ValidationError("weak mode needs images_per_worker_group");
    if (group_size == 0) throw ValidationError("group_size must be positive");
    for (auto p : worker_counts) {
      if (p % group_size != 0) {
        throw ValidationError("worker count " + std::to_string(p) + " is not a multiple of group_size");
      }
    }
  } else if (total_n == 0) {
    throw ValidationError("strong mode needs total_n");
  }
  if (!(heavy_fraction >= 0.0 && heavy_fraction <= 1.0)) {
    throw ValidationError("heavy_fraction must lie in [0, 1]");
  }
  if (!(run.work.base_seconds >= 0.0) || !(heavy_cost_s >= 0.0)) {
    throw ValidationError("emulated costs must be non-negative");
  }
  params.validate();
}

std::size_t ExperimentSpec::images_for(std::size_t workers) const {
  return mode == ScalingMode::kWeak ? images_per_worker_group * (workers / group_size) : total_n;
}

ExperimentSpec parse_experiment_spec(std::istream& in) {
  ExperimentSpec spec;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (auto hash = text.find('#'); hash != std::string::npos) text.erase(hash);
    if (trim(text).empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", line);
    const std::string key = trim(std::string_view(text).substr(0, eq));
    const std::string value = trim(std::string_view(text).substr(eq + 1));

    // Name lookups throw UsageError; report those against the offending line.
    try {
      if (key == "mode") {
        if (value == "weak") spec.mode = ScalingMode::kWeak;
        else if (value == "strong") spec.mode = ScalingMode::kStrong;
        else throw ParseError("mode expects weak or strong", line);
      } else if (key == "worker_counts") {
        spec.worker_counts.clear();
        for (const auto& v : split(value, ',')) spec.worker_counts.push_back(to_unsigned(key, v, line));
      } else if (key == "images_per_worker_group") {
        spec.images_per_worker_group = to_unsigned(key, value, line);
      } else if (key == "group_size") {
        spec.group_size = to_unsigned(key, value, line);
      } else if (key == "total_n") {
        spec.total_n = to_unsigned(key, value, line);
      } else if (key == "kinds") {
        spec.kinds.clear();
        for (const auto& v : split(value, ',')) spec.kinds.push_back(parse_scheduler_kind(v));
      } else if (key == "slowdowns") {
        spec.slowdowns.clear();
        for (const auto& v : split(value, ',')) spec.slowdowns.push_back(to_real(key, v, line));
      } else if (key == "repetitions") {
        spec.repetitions = to_unsigned(key, value, line);
      } else if (key == "cloud") {
        spec.cloud = parse_cloud_source(value, line);
      } else if (key == "seed") {
        spec.seed = to_unsigned(key, value, line);
      } else if (key == "width") {
        spec.params.width = static_cast<std::uint32_t>(to_unsigned(key, value, line));
      } else if (key == "bin_size") {
        spec.params.bin_size = to_real(key, value, line);
      } else if (key == "support_angle") {
        spec.params.support_angle = to_real(key, value, line);
      } else if (key == "verify_cap") {
        spec.verify_cap = to_unsigned(key, value, line);
      } else if (key == "dispatch_threads") {
        spec.run.dispatch_threads = to_unsigned(key, value, line);
      } else if (key == "base_cost_s") {
        spec.run.work.base_seconds = to_real(key, value, line);
      } else if (key == "heavy_fraction") {
        spec.heavy_fraction = to_real(key, value, line);
      } else if (key == "heavy_cost_s") {
        spec.heavy_cost_s = to_real(key, value, line);
      } else if (key == "delay_mode") {
        spec.run.work.mode = parse_delay_mode(value, line);
      } else if (key == "ordered_start") {
        spec.run.ordered_start = to_bool(key, value, line);
      } else {
        throw ParseError("unknown key '" + key + "'", line);
      }
    } catch (const UsageError& e) {
      throw ParseError(e.what(), line);
    }
  }
  spec.validate();
  return spec;
}

ExperimentSpec load_experiment_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_experiment_spec(in);
}

MetricRow make_metric_row(const RunReport& report, std::size_t rep) {
  MetricRow row;
  row.kind = report.kind;
  row.workers = report.worker_count;
  row.rep = rep;
  row.n = report.n;
  row.t_par_s = report.parallel_time_s;
  row.cost = parallel_cost(report.worker_count, report.parallel_time_s);
  const auto imbalance = load_imbalance(report.finishing_times());
  row.max_over_mean = imbalance.max_over_mean;
  row.cov = imbalance.cov;
  return row;
}

std::vector<StatsRow> aggregate(std::span<const MetricRow> rows) {
  std::vector<StatsRow> out;
  std::vector<std::pair<std::size_t, SchedulerKind>> order;
  std::map<std::pair<std::size_t, SchedulerKind>, std::vector<double>> times;
  std::map<std::pair<std::size_t, SchedulerKind>, std::uint64_t> sizes;
  for (const auto& r : rows) {
    const auto key = std::make_pair(r.workers, r.kind);
    if (!times.count(key)) order.push_back(key);
    times[key].push_back(r.t_par_s);
    sizes[key] = r.n;
  }
  for (const auto& key : order) {
    out.push_back({key.second, key.first, sizes[key], describe(times[key])});
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentSpec& spec, const ProgressFn& progress) {
  spec.validate();
  const PointCloud cloud = materialize(spec.cloud, spec.seed);
  for (auto p : spec.worker_counts) {
    if (spec.images_for(p) > cloud.size()) {
      throw ValidationError("experiment needs " + std::to_string(spec.images_for(p)) +
                            " images but the cloud has " + std::to_string(cloud.size()) + " points");
    }
  }

  RunOptions options = spec.run;
  if (spec.heavy_fraction > 0.0 && spec.heavy_cost_s > 0.0) {
    options.work.extra_seconds = random_extra_work(spec.seed, spec.heavy_fraction, spec.heavy_cost_s);
  }

  ExperimentResult result;
  std::map<std::size_t, std::vector<SpinImage>> oracles;
  for (auto p : spec.worker_counts) {
    const std::size_t n = spec.images_for(p);
    const auto workers = make_worker_configs(p, spec.slowdowns);
    for (auto kind : spec.kinds) {
      for (std::size_t rep = 0; rep < spec.repetitions; ++rep) {
        auto run = run_local(cloud, n, spec.params, kind, workers, options);
        if (n > 0 && n <= spec.verify_cap) {
          auto it = oracles.find(n);
          if (it == oracles.end()) {
            it = oracles.emplace(n, generate_all_sequential(cloud, n, spec.params)).first;
          }
          if (run.images != it->second) {
            throw RunError(std::string(to_string(kind)) + " run with " + std::to_string(p) +
                           " workers diverged from the serial reference");
          }
        }
        result.rows.push_back(make_metric_row(run.report, rep));
        if (progress) progress(result.rows.back());
      }
    }
  }
  result.stats = aggregate(result.rows);
  return result;
}

void write_csv(std::ostream& out, std::span<const MetricRow> rows) {
  out << "kind,P,rep,N,t_par_s,cost,max_over_mean,cov\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%llu,%.17g,%.17g,%.17g,%.17g\n",
                  std::string(to_string(r.kind)).c_str(), r.workers, r.rep,
                  static_cast<unsigned long long>(r.n), r.t_par_s, r.cost, r.max_over_mean, r.cov);
    out << buf;
  }
}

void write_json(std::ostream& out, const ExperimentResult& result) {
  json rows = json::array();
  for (const auto& r : result.rows) {
    rows.push_back({{"kind", std::string(to_string(r.kind))},
                    {"P", r.workers},
                    {"rep", r.rep},
                    {"N", r.n},
                    {"t_par_s", r.t_par_s},
                    {"cost", r.cost},
                    {"max_over_mean", r.max_over_mean},
                    {"cov", r.cov}});
  }
  json stats = json::array();
  for (const auto& s : result.stats) {
    stats.push_back({{"kind", std::string(to_string(s.kind))},
                     {"P", s.workers},
                     {"N", s.n},
                     {"stats", stats_to_json(s.t_par_s)}});
  }
  out << json{{"rows", rows}, {"stats", stats}}.dump(2) << '\n';
}

ExperimentResult read_json_report(std::istream& in) {
  ExperimentResult result;
  try {
    const json doc = json::parse(in);
    for (const auto& r : doc.at("rows")) {
      MetricRow row;
      row.kind = parse_scheduler_kind(r.at("kind").get<std::string>());
      row.workers = r.at("P").get<std::size_t>();
      row.rep = r.at("rep").get<std::size_t>();
      row.n = r.at("N").get<std::uint64_t>();
      row.t_par_s = r.at("t_par_s").get<double>();
      row.cost = r.at("cost").get<double>();
      row.max_over_mean = r.at("max_over_mean").get<double>();
      row.cov = r.at("cov").get<double>();
      result.rows.push_back(row);
    }
    for (const auto& s : doc.at("stats")) {
      StatsRow st;
      st.kind = parse_scheduler_kind(s.at("kind").get<std::string>());
      st.workers = s.at("P").get<std::size_t>();
      st.n = s.at("N").get<std::uint64_t>();
      const auto& d = s.at("stats");
      st.t_par_s = {d.at("min").get<double>(), d.at("max").get<double>(),
                    d.at("mean").get<double>(), d.at("median").get<double>(),
                    d.at("q1").get<double>(), d.at("q3").get<double>()};
      result.stats.push_back(st);
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed report: ") + e.what());
  }
  return result;
}

void emit_report(const ExperimentResult& result, ReportFormat format, const std::filesystem::path& path) {
  if (result.rows.empty()) throw ValidationError("report has no rows");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  if (format == ReportFormat::kCsv) write_csv(out, result.rows);
  else write_json(out, result);
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace spinsched
