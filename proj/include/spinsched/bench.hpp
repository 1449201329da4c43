#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "spinsched/geometry.hpp"
#include "spinsched/runtime.hpp"
#include "spinsched/scheduling.hpp"
#include "spinsched/spinimage.hpp"

namespace spinsched {

// Worker count times parallel wall time, in worker-seconds.
double parallel_cost(std::size_t workers, double parallel_time_s);

struct LoadImbalance {
  double max_over_mean = 1.0;
  double cov = 0.0;  // population standard deviation / mean
};

// Throws ValidationError for an empty list or a non-positive time.
LoadImbalance load_imbalance(std::span<const double> finishing_times);

struct DescriptiveStats {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;

  friend bool operator==(const DescriptiveStats&, const DescriptiveStats&) = default;
};

// Quartiles by inclusive linear interpolation: position (n - 1) * p.
DescriptiveStats describe(std::span<const double> values);

enum class ScalingMode { kWeak, kStrong };

struct CloudSource {
  bool synthetic = true;
  SynthKind kind = SynthKind::kSphere;
  std::size_t count = 2000;
  std::filesystem::path file;
  CloudFormat format = CloudFormat::kXyzn;
};

/// One scaling experiment. Weak mode runs images_per_worker_group images per
/// group of group_size workers (N grows with P); strong mode runs total_n
/// images at every worker count.
struct ExperimentSpec {
  ScalingMode mode = ScalingMode::kStrong;
  std::vector<std::size_t> worker_counts;
  std::size_t images_per_worker_group = 0;
  std::size_t group_size = 1;
  std::size_t total_n = 0;
  std::vector<SchedulerKind> kinds;
  std::vector<double> slowdowns;  // by worker id, starting at id 1; absent ids run at 1.0
  std::size_t repetitions = 5;
  CloudSource cloud;
  SpinImageParams params;
  std::uint64_t seed = 1;
  std::size_t verify_cap = 10000;  // runs with N above this skip the oracle comparison
  RunOptions run;
  double heavy_fraction = 0.0;  // per-image variance injection, seeded by `seed`
  double heavy_cost_s = 0.0;

  void validate() const;
  std::size_t images_for(std::size_t workers) const;
};

/// Parses the "key = value" experiment format ('#' starts a comment):
///
///   mode = weak | strong
///   worker_counts = 2,4,8
///   images_per_worker_group = 100     (weak)
///   group_size = 1                    (weak, workers per group)
///   total_n = 8000                    (strong)
///   kinds = static,ss,gss,fac
///   slowdowns = 4.0,1,1,1
///   repetitions = 5
///   cloud = synth:sphere:2000 | file:path/to/cloud.xyzn:xyzn
///   seed = 42
///   width = 5 / bin_size = 0.1 / support_angle = 6.283185307179586
///   verify_cap = 10000
///   dispatch_threads = 4
///   base_cost_s = 0.002
///   heavy_fraction = 0.1 / heavy_cost_s = 0.01
///   delay_mode = auto | busy | sleep
///   ordered_start = true | false
ExperimentSpec parse_experiment_spec(std::istream& in);
ExperimentSpec load_experiment_spec(const std::filesystem::path& path);

struct MetricRow {
  SchedulerKind kind = SchedulerKind::kStatic;
  std::size_t workers = 0;
  std::size_t rep = 0;
  std::uint64_t n = 0;
  double t_par_s = 0.0;
  double cost = 0.0;
  double max_over_mean = 0.0;
  double cov = 0.0;

  friend bool operator==(const MetricRow&, const MetricRow&) = default;
};

// Descriptive statistics of parallel time over the repetitions of one
// (kind, worker count) cell.
struct StatsRow {
  SchedulerKind kind = SchedulerKind::kStatic;
  std::size_t workers = 0;
  std::uint64_t n = 0;
  DescriptiveStats t_par_s;

  friend bool operator==(const StatsRow&, const StatsRow&) = default;
};

struct ExperimentResult {
  std::vector<MetricRow> rows;
  std::vector<StatsRow> stats;

  friend bool operator==(const ExperimentResult&, const ExperimentResult&) = default;
};

MetricRow make_metric_row(const RunReport& report, std::size_t rep);
std::vector<StatsRow> aggregate(std::span<const MetricRow> rows);

using ProgressFn = std::function<void(const MetricRow&)>;

/// Runs every (worker count, kind, repetition) in sequence. Outputs with
/// N <= verify_cap are compared against the serial reference; a mismatch
/// throws RunError.
ExperimentResult run_experiment(const ExperimentSpec& spec, const ProgressFn& progress = {});

enum class ReportFormat { kCsv, kJson };

// CSV columns: kind,P,rep,N,t_par_s,cost,max_over_mean,cov
void write_csv(std::ostream& out, std::span<const MetricRow> rows);
void write_json(std::ostream& out, const ExperimentResult& result);
ExperimentResult read_json_report(std::istream& in);

// Throws ValidationError for empty rows and IoError for an unwritable path.
void emit_report(const ExperimentResult& result, ReportFormat format, const std::filesystem::path& path);

}  // namespace spinsched
