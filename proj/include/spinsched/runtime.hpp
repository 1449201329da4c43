#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "spinsched/geometry.hpp"
#include "spinsched/protocol.hpp"
#include "spinsched/scheduling.hpp"
#include "spinsched/socket.hpp"
#include "spinsched/spinimage.hpp"

namespace spinsched {

struct WorkerConfig {
  std::size_t id = 1;     // 1-based, unique within a run
  double slowdown = 1.0;  // >= 1; multiplies the time spent per image
};

// Builds configs with ids 1..n from a slowdown list (missing entries are 1.0).
std::vector<WorkerConfig> make_worker_configs(std::size_t count, std::span<const double> slowdowns = {});

enum class DelayMode {
  kAuto,      // busy-wait if every worker can have its own core, otherwise sleep
  kBusyWait,  // spin on the clock; occupies a core like real compute
  kSleep,     // yields the core; lets slow workers be emulated on few cores
};

/// Per-image cost emulation applied by every worker.
///
/// After computing image i in c seconds of thread CPU time, a worker with
/// slowdown s additionally waits
///     (s - 1) * c + s * (base_seconds + extra_seconds(i))
/// so its total time per image is s times that of a reference worker.
struct WorkModel {
  double base_seconds = 0.0;
  std::function<double(std::size_t)> extra_seconds;
  DelayMode mode = DelayMode::kAuto;
};

// Deterministic per-image extra work: with probability `heavy_fraction`
// image i costs `heavy_seconds` extra, otherwise nothing.
std::function<double(std::size_t)> random_extra_work(std::uint64_t seed, double heavy_fraction,
                                                     double heavy_seconds);

struct RunOptions {
  std::size_t dispatch_threads = 4;  // master threads serving requests
  bool ordered_start = true;         // local runs: first requests arrive in worker listing order
  WorkModel work;
};

enum class Direction { kToMaster, kToWorker };

struct LogEntry {
  std::uint64_t seq = 0;
  std::size_t worker = 0;  // worker id
  Direction direction = Direction::kToMaster;
  MessageTag tag = MessageTag::kWorkRequest;
  ChunkRange range;           // Assign only
  std::size_t image_count = 0;  // Results only
  double time_s = 0.0;        // since scheduling start
};

struct WorkerReport {
  std::size_t id = 0;
  double finishing_time_s = 0.0;  // scheduling start to receipt of its Results
  std::vector<ChunkRange> chunks;
  std::size_t images_computed = 0;
};

struct RunReport {
  SchedulerKind kind = SchedulerKind::kStatic;
  std::uint64_t n = 0;
  std::size_t worker_count = 0;
  double parallel_time_s = 0.0;
  std::vector<WorkerReport> workers;  // in worker id order
  std::vector<LogEntry> log;          // every message the master sent or handled, in order
  std::size_t assign_messages = 0;
  std::size_t terminate_messages = 0;

  std::vector<double> finishing_times() const;
};

struct RunResult {
  std::vector<SpinImage> images;  // origin index order
  RunReport report;
};

/// Worker's side of a connection to the master.
class WorkerLink {
 public:
  virtual ~WorkerLink() = default;
  virtual void send(Message message) = 0;
  // Throws RunError if the master is gone.
  virtual Message receive() = 0;
};

struct WorkerStats {
  std::vector<ChunkRange> chunks;
  std::size_t images = 0;
  double busy_seconds = 0.0;  // wall time spent computing, including emulated delay
};

/// Request-compute loop. Sends WorkRequest, computes each Assign, and answers
/// Terminate with a single Results message holding every image it computed.
/// `work.mode` must not be kAuto.
WorkerStats run_worker(WorkerLink& link, const PointCloud& cloud, const SpinImageParams& params,
                       const WorkerConfig& config, const WorkModel& work = {});

/// In-process run: one thread per worker, channel transport, and a master
/// serving requests from `options.dispatch_threads` threads.
///
/// Throws ValidationError for an empty or invalid worker list or n > M, and
/// RunError / ProtocolError if the run aborts.
RunResult run_local(const PointCloud& cloud, std::size_t n, const SpinImageParams& params,
                    SchedulerKind kind, std::span<const WorkerConfig> workers,
                    const RunOptions& options = {});

struct DistributedOptions {
  RunOptions run;
  std::size_t expected_workers = 1;
  std::chrono::milliseconds accept_timeout{30000};
};

/// Master over TCP. Binding happens at construction so callers can learn the
/// port before workers connect.
class DistributedMaster {
 public:
  explicit DistributedMaster(const Endpoint& listen);

  Endpoint endpoint() const { return listener_.endpoint(); }

  // Accepts the expected workers, streams the cloud to each, then schedules.
  RunResult run(const PointCloud& cloud, std::size_t n, const SpinImageParams& params,
                SchedulerKind kind, const DistributedOptions& options);

 private:
  Listener listener_;
};

RunResult run_distributed(const PointCloud& cloud, std::size_t n, const SpinImageParams& params,
                          SchedulerKind kind, const Endpoint& listen,
                          const DistributedOptions& options);

/// Connects, receives the cloud, then runs the worker loop. `work.mode`
/// kAuto resolves to busy-wait.
WorkerStats run_remote_worker(const Endpoint& master, const SpinImageParams& params,
                              const WorkerConfig& config, const WorkModel& work = {});

// Socket-backed WorkerLink, for callers that drive the exchange themselves.
class SocketWorkerLink : public WorkerLink {
 public:
  explicit SocketWorkerLink(Socket socket) : socket_(std::move(socket)) {}
  void send(Message message) override { socket_.send_message(message); }
  Message receive() override;
  Socket& socket() { return socket_; }

 private:
  Socket socket_;
};

}  // namespace spinsched
