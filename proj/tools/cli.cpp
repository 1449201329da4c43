#include "cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "spinsched/bench.hpp"
#include "spinsched/error.hpp"
#include "spinsched/geometry.hpp"
#include "spinsched/runtime.hpp"
#include "spinsched/scheduling.hpp"
#include "spinsched/socket.hpp"
#include "spinsched/spinimage.hpp"

namespace spinsched::cli {
namespace {

struct ImageArgs {
  std::uint32_t width = 5;
  double bin_size = 0.1;
  double support_angle = 2.0 * std::numbers::pi;

  SpinImageParams params() const {
    SpinImageParams p{width, bin_size, support_angle};
    p.validate();
    return p;
  }
};

struct CloudArgs {
  std::string input;
  std::string format = "xyzn";
  std::string synth;
  std::size_t m = 0;
  std::uint64_t seed = 1;
  std::optional<std::size_t> n;
  std::optional<double> n_fraction;
};

struct RunArgs {
  std::string kind = "static";
  std::size_t workers = 4;
  std::vector<double> slowdowns;
  std::size_t dispatch_threads = 4;
  double base_cost = 0.0;
  std::string delay_mode = "auto";
};

void add_image_flags(CLI::App* app, ImageArgs& a) {
  app->add_option("--w", a.width, "image width in pixels")->capture_default_str();
  app->add_option("--b", a.bin_size, "bin size in model units")->capture_default_str();
  app->add_option("--s", a.support_angle, "support angle in radians")->capture_default_str();
}

void add_cloud_flags(CLI::App* app, CloudArgs& a) {
  auto* input = app->add_option("--input", a.input, "point cloud file");
  app->add_option("--format", a.format, "input format: xyzn or off")->capture_default_str();
  auto* synth = app->add_option("--synth", a.synth, "synthetic cloud: sphere, torus or uniform_box");
  app->add_option("--m", a.m, "synthetic point count");
  app->add_option("--seed", a.seed, "synthetic cloud seed")->capture_default_str();
  auto* n = app->add_option("--n", a.n, "number of spin images (default ceil(0.1 M))");
  auto* frac = app->add_option("--n-fraction", a.n_fraction, "images as a fraction of M");
  input->excludes(synth);
  n->excludes(frac);
}

void add_run_flags(CLI::App* app, RunArgs& a, bool with_workers) {
  app->add_option("--kind", a.kind, "scheduler: static, ss, gss or fac")->capture_default_str();
  if (with_workers) {
    app->add_option("--workers", a.workers, "worker count")->capture_default_str();
    app->add_option("--slowdowns", a.slowdowns, "comma-separated slowdown per worker id")
        ->delimiter(',');
    app->add_option("--base-cost", a.base_cost, "emulated seconds per image")->capture_default_str();
    app->add_option("--delay-mode", a.delay_mode, "auto, busy or sleep")->capture_default_str();
  }
  app->add_option("--dispatch-threads", a.dispatch_threads, "master dispatch threads")
      ->capture_default_str();
}

DelayMode parse_mode(const std::string& s) {
  if (s == "auto") return DelayMode::kAuto;
  if (s == "busy") return DelayMode::kBusyWait;
  if (s == "sleep") return DelayMode::kSleep;
  throw UsageError("unknown delay mode '" + s + "' (expected auto, busy or sleep)");
}

PointCloud make_cloud(const CloudArgs& a) {
  if (!a.synth.empty()) {
    if (a.m == 0) throw UsageError("--synth needs --m <count>");
    return synth_cloud(parse_synth_kind(a.synth), a.m, a.seed);
  }
  if (a.input.empty()) throw UsageError("give --input <file> or --synth <kind>");
  return load_point_cloud(a.input, parse_cloud_format(a.format));
}

std::size_t image_count(const CloudArgs& a, std::size_t m) {
  if (a.n) return *a.n;
  if (a.n_fraction) {
    const double f = *a.n_fraction;
    if (!(f > 0.0 && f <= 1.0)) throw UsageError("--n-fraction must lie in (0, 1]");
    return static_cast<std::size_t>(std::ceil(f * static_cast<double>(m) - 1e-9));
  }
  return default_image_count(m);
}

void write_images(const std::string& path, const std::vector<SpinImage>& images) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  write_spin_images(out, images);
  if (!out.flush()) throw IoError("failed writing " + path);
}

void summarize(std::ostream& out, const RunResult& r, const std::string& path) {
  out << "wrote " << r.images.size() << " spin images to " << path << " (" << to_string(r.report.kind)
      << ", " << r.report.worker_count << " workers, " << r.report.assign_messages
      << " chunks, T_par " << r.report.parallel_time_s << " s)\n";
}

void warn_params(std::ostream& err, const SpinImageParams& p) {
  if (!p.bin_size_in_usual_range()) err << "warning: bin size " << p.bin_size << " is above 10\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spin-image generation with dynamic loop scheduling", "spinsched"};
  app.require_subcommand(1);

  CloudArgs gen_cloud;
  ImageArgs gen_image;
  RunArgs gen_run;
  std::string gen_output = "out.spin";
  auto* generate = app.add_subcommand("generate", "generate spin images with a local master-worker run");
  add_cloud_flags(generate, gen_cloud);
  add_image_flags(generate, gen_image);
  add_run_flags(generate, gen_run, true);
  generate->add_option("--output", gen_output, "spin-image output file")->capture_default_str();

  std::string trace_kind;
  std::int64_t trace_n = 0;
  std::int64_t trace_p = 0;
  auto* trace = app.add_subcommand("schedule-trace", "print the chunk sequence of a scheduler");
  trace->add_option("--kind", trace_kind, "static, ss, gss or fac")->required();
  trace->add_option("--n", trace_n, "iterations")->required();
  trace->add_option("--p", trace_p, "workers")->required();

  std::string bench_spec;
  std::string bench_out;
  auto* bench = app.add_subcommand("bench", "run a scaling experiment");
  bench->add_option("--spec", bench_spec, "experiment spec file")->required();
  bench->add_option("--out", bench_out, "output directory")->required();

  std::string inspect_file;
  std::size_t inspect_index = 0;
  auto* inspect = app.add_subcommand("inspect", "print one spin image from a file");
  inspect->add_option("--file", inspect_file, "spin-image file")->required();
  inspect->add_option("--index", inspect_index, "origin index")->capture_default_str();

  CloudArgs serve_cloud;
  ImageArgs serve_image;
  RunArgs serve_run;
  std::string serve_listen = "127.0.0.1:5555";
  std::size_t serve_workers = 1;
  std::string serve_output = "out.spin";
  int serve_timeout_ms = 30000;
  auto* serve = app.add_subcommand("serve", "act as master for remote workers");
  add_cloud_flags(serve, serve_cloud);
  add_image_flags(serve, serve_image);
  add_run_flags(serve, serve_run, false);
  serve->add_option("--listen", serve_listen, "host:port")->capture_default_str();
  serve->add_option("--workers", serve_workers, "expected worker count")->capture_default_str();
  serve->add_option("--timeout-ms", serve_timeout_ms, "wait for workers")->capture_default_str();
  serve->add_option("--output", serve_output, "spin-image output file")->capture_default_str();

  std::string worker_connect;
  ImageArgs worker_image;
  double worker_slowdown = 1.0;
  double worker_base_cost = 0.0;
  std::string worker_mode = "busy";
  auto* worker = app.add_subcommand("worker", "connect to a master and compute assigned chunks");
  worker->add_option("--connect", worker_connect, "master host:port")->required();
  add_image_flags(worker, worker_image);
  worker->add_option("--slowdown", worker_slowdown, "slowdown multiplier")->capture_default_str();
  worker->add_option("--base-cost", worker_base_cost, "emulated seconds per image")
      ->capture_default_str();
  worker->add_option("--delay-mode", worker_mode, "busy or sleep")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kOk;
    }
    err << "error: " << e.what() << '\n' << app.help();
    return kUsageError;
  }

  try {
    if (generate->parsed()) {
      const PointCloud cloud = make_cloud(gen_cloud);
      const auto params = gen_image.params();
      warn_params(err, params);
      const std::size_t n = image_count(gen_cloud, cloud.size());
      if (n == 0 || n > cloud.size()) throw UsageError("image count must lie in [1, M]");
      RunOptions options;
      options.dispatch_threads = gen_run.dispatch_threads;
      options.work.base_seconds = gen_run.base_cost;
      options.work.mode = parse_mode(gen_run.delay_mode);
      const auto workers = make_worker_configs(gen_run.workers, gen_run.slowdowns);
      auto result = run_local(cloud, n, params, parse_scheduler_kind(gen_run.kind), workers, options);
      write_images(gen_output, result.images);
      summarize(out, result, gen_output);
    } else if (trace->parsed()) {
      for (const auto& c : chunk_sequence(parse_scheduler_kind(trace_kind), trace_n, trace_p)) {
        out << c.start << ' ' << c.end << ' ' << c.size() << '\n';
      }
    } else if (bench->parsed()) {
      const auto spec = load_experiment_spec(bench_spec);
      std::filesystem::create_directories(bench_out);
      auto result = run_experiment(spec, [&](const MetricRow& r) {
        out << to_string(r.kind) << " P=" << r.workers << " rep=" << r.rep << " N=" << r.n
            << " t_par=" << r.t_par_s << "s cov=" << r.cov << '\n';
      });
      const std::filesystem::path dir(bench_out);
      emit_report(result, ReportFormat::kCsv, dir / "report.csv");
      emit_report(result, ReportFormat::kJson, dir / "report.json");
      out << "wrote " << (dir / "report.csv").string() << " and " << (dir / "report.json").string()
          << '\n';
    } else if (inspect->parsed()) {
      std::ifstream in(inspect_file);
      if (!in) throw IoError("cannot open " + inspect_file);
      const auto images = read_spin_images(in);
      auto it = std::find_if(images.begin(), images.end(),
                             [&](const SpinImage& s) { return s.origin_index() == inspect_index; });
      if (it == images.end()) {
        throw UsageError("no spin image with origin index " + std::to_string(inspect_index));
      }
      write_spin_images(out, std::span(&*it, 1));
    } else if (serve->parsed()) {
      const PointCloud cloud = make_cloud(serve_cloud);
      const auto params = serve_image.params();
      warn_params(err, params);
      const std::size_t n = image_count(serve_cloud, cloud.size());
      if (n == 0 || n > cloud.size()) throw UsageError("image count must lie in [1, M]");
      DistributedOptions options;
      options.expected_workers = serve_workers;
      options.accept_timeout = std::chrono::milliseconds(serve_timeout_ms);
      options.run.dispatch_threads = serve_run.dispatch_threads;
      DistributedMaster master(parse_endpoint(serve_listen));
      err << "listening on " << master.endpoint().to_string() << '\n';
      auto result = master.run(cloud, n, params, parse_scheduler_kind(serve_run.kind), options);
      write_images(serve_output, result.images);
      summarize(out, result, serve_output);
    } else if (worker->parsed()) {
      WorkModel work;
      work.base_seconds = worker_base_cost;
      work.mode = parse_mode(worker_mode);
      const auto stats = run_remote_worker(parse_endpoint(worker_connect), worker_image.params(),
                                           WorkerConfig{1, worker_slowdown}, work);
      out << "computed " << stats.images << " images in " << stats.chunks.size() << " chunks\n";
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kOk;
}

}  // namespace spinsched::cli
