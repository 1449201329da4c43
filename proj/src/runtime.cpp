#include "spinsched/runtime.hpp"

#include <time.h>

#include <algorithm>
#include <condition_variable>
#include <exception>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <thread>

#include "spinsched/channel.hpp"
#include "spinsched/error.hpp"

namespace spinsched {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double thread_cpu_seconds() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) + 1e-9 * static_cast<double>(ts.tv_nsec);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

DelayMode resolve_mode(DelayMode mode, std::size_t concurrent_workers) {
  if (mode != DelayMode::kAuto) return mode;
  const unsigned cores = std::thread::hardware_concurrency();
  return cores >= concurrent_workers + 1 ? DelayMode::kBusyWait : DelayMode::kSleep;
}

std::string format_ranges(const std::vector<ChunkRange>& ranges) {
  if (ranges.empty()) return "none";
  std::string out;
  for (const auto& r : ranges) {
    if (!out.empty()) out += ' ';
    out += '[' + std::to_string(r.start) + ',' + std::to_string(r.end) + ')';
  }
  return out;
}

void validate_workers(std::span<const WorkerConfig> workers) {
  if (workers.empty()) throw ValidationError("at least one worker is required");
  std::set<std::size_t> ids;
  for (const auto& w : workers) {
    if (!(w.slowdown >= 1.0)) {
      throw ValidationError("worker " + std::to_string(w.id) + " slowdown must be >= 1.0");
    }
    if (!ids.insert(w.id).second) {
      throw ValidationError("duplicate worker id " + std::to_string(w.id));
    }
  }
}

void validate_run(const PointCloud& cloud, std::size_t n, const SpinImageParams& params) {
  params.validate();
  if (n > cloud.size()) {
    throw ValidationError("image count " + std::to_string(n) + " exceeds cloud size " +
                          std::to_string(cloud.size()));
  }
}

/// Transport-independent master: an inbox of worker messages served by a pool
/// of dispatch threads, with all scheduler and bookkeeping access under one
/// mutex so chunk issuance is linearizable.
class MasterCore {
 public:
  using Sender = std::function<void(const Message&)>;

  MasterCore(SchedulerKind kind, std::uint64_t n, std::uint32_t width, std::vector<std::size_t> ids,
             std::vector<Sender> senders, std::function<void()> on_abort)
      : scheduler_(kind, static_cast<std::int64_t>(n), static_cast<std::int64_t>(ids.size())),
        width_(width),
        ids_(std::move(ids)),
        senders_(std::move(senders)),
        on_abort_(std::move(on_abort)),
        sessions_(ids_.size()),
        images_(n) {}

  void post(std::size_t worker, Message message) {
    inbox_.push(Inbound{worker, std::move(message), {}});
  }

  void post_failure(std::size_t worker, std::string error) {
    inbox_.push(Inbound{worker, std::nullopt, std::move(error)});
  }

  // Records a message sent before scheduling started (cloud replication).
  void record_sent(std::size_t worker, const Message& message) {
    std::lock_guard lock(mutex_);
    log(worker, Direction::kToWorker, message);
  }

  void start_clock() { start_ = Clock::now(); }

  RunResult run(std::size_t dispatch_threads) {
    if (ids_.empty()) throw ValidationError("at least one worker is required");
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::max<std::size_t>(1, dispatch_threads); ++t) {
      pool.emplace_back([this] { dispatch_loop(); });
    }
    for (auto& t : pool) t.join();
    if (failure_) std::rethrow_exception(failure_);

    RunResult result;
    result.images.reserve(images_.size());
    for (auto& image : images_) result.images.push_back(std::move(*image));
    auto& report = result.report;
    report.kind = scheduler_.kind();
    report.n = scheduler_.total();
    report.worker_count = ids_.size();
    report.assign_messages = assigns_;
    report.terminate_messages = terminates_;
    report.log = std::move(log_);
    for (std::size_t w = 0; w < ids_.size(); ++w) {
      WorkerReport wr;
      wr.id = ids_[w];
      wr.finishing_time_s = sessions_[w].finished_s;
      wr.chunks = sessions_[w].chunks;
      for (const auto& c : wr.chunks) wr.images_computed += c.size();
      report.workers.push_back(std::move(wr));
    }
    report.parallel_time_s = seconds_since(start_);
    return result;
  }

 private:
  enum class State { kActive, kTerminated, kDone };

  struct Session {
    State state = State::kActive;
    std::vector<ChunkRange> chunks;
    double finished_s = 0.0;
  };

  struct Inbound {
    std::size_t worker;
    std::optional<Message> message;
    std::string error;
  };

  void dispatch_loop() {
    while (auto in = inbox_.pop()) {
      try {
        handle(*in);
      } catch (...) {
        fail(std::current_exception());
      }
    }
  }

  void fail(std::exception_ptr error) {
    {
      std::lock_guard lock(mutex_);
      if (failure_) return;
      failure_ = std::move(error);
    }
    inbox_.close();
    if (on_abort_) on_abort_();
  }

  std::string worker_name(std::size_t w) const { return "worker " + std::to_string(ids_[w]); }

  void log(std::size_t w, Direction direction, const Message& message) {
    LogEntry e;
    e.seq = log_.size();
    e.worker = ids_[w];
    e.direction = direction;
    e.tag = tag_of(message);
    if (const auto* a = std::get_if<Assign>(&message)) e.range = a->range;
    if (const auto* r = std::get_if<Results>(&message)) e.image_count = r->images.size();
    e.time_s = seconds_since(start_);
    log_.push_back(e);
  }

  void send(std::size_t w, const Message& message) {
    log(w, Direction::kToWorker, message);
    senders_[w](message);
  }

  void handle(Inbound& in) {
    std::lock_guard lock(mutex_);
    if (failure_) return;
    Session& s = sessions_[in.worker];
    if (!in.message) {
      if (s.state == State::kDone) return;
      throw RunError(worker_name(in.worker) + " disconnected before sending results (" + in.error +
                     "); unfinished ranges: " + format_ranges(s.chunks));
    }
    log(in.worker, Direction::kToMaster, *in.message);

    if (std::holds_alternative<WorkRequest>(*in.message)) {
      if (s.state != State::kActive) {
        throw ProtocolError(worker_name(in.worker) + " sent WorkRequest after Terminate");
      }
      // STATIC is a fixed partition: one block per worker, never a second.
      const bool had_block = scheduler_.kind() == SchedulerKind::kStatic && !s.chunks.empty();
      std::optional<ChunkRange> chunk;
      if (!had_block) chunk = scheduler_.next_chunk();
      if (chunk) {
        s.chunks.push_back(*chunk);
        ++assigns_;
        send(in.worker, Assign{*chunk});
      } else {
        s.state = State::kTerminated;
        ++terminates_;
        send(in.worker, Terminate{});
      }
    } else if (auto* results = std::get_if<Results>(&*in.message)) {
      if (s.state == State::kDone) {
        throw ProtocolError(worker_name(in.worker) + " sent Results twice");
      }
      if (s.state != State::kTerminated) {
        throw ProtocolError(worker_name(in.worker) + " sent Results before Terminate");
      }
      accept_results(in.worker, s, std::move(results->images));
      s.state = State::kDone;
      s.finished_s = seconds_since(start_);
      if (++received_ == sessions_.size()) inbox_.close();
    } else {
      throw ProtocolError(worker_name(in.worker) + " sent unexpected " +
                          std::string(to_string(tag_of(*in.message))));
    }
  }

  void accept_results(std::size_t w, const Session& s, std::vector<SpinImage> images) {
    std::size_t expected = 0;
    for (const auto& c : s.chunks) expected += c.size();
    if (images.size() != expected) {
      throw ProtocolError(worker_name(w) + " returned " + std::to_string(images.size()) +
                          " images, expected " + std::to_string(expected));
    }
    auto assigned = [&](std::size_t i) {
      return std::any_of(s.chunks.begin(), s.chunks.end(),
                         [i](const ChunkRange& c) { return i >= c.start && i < c.end; });
    };
    for (auto& image : images) {
      const std::size_t i = image.origin_index();
      if (!assigned(i) || images_[i]) {
        throw ProtocolError(worker_name(w) + " returned image " + std::to_string(i) +
                            " it was not assigned");
      }
      if (image.width() != width_) {
        throw ProtocolError(worker_name(w) + " returned image of width " +
                            std::to_string(image.width()));
      }
      images_[i] = std::move(image);
    }
  }

  BlockingQueue<Inbound> inbox_;
  std::mutex mutex_;
  Scheduler scheduler_;
  std::uint32_t width_;
  std::vector<std::size_t> ids_;
  std::vector<Sender> senders_;
  std::function<void()> on_abort_;
  std::vector<Session> sessions_;
  std::vector<std::optional<SpinImage>> images_;
  std::vector<LogEntry> log_;
  std::size_t received_ = 0;
  std::size_t assigns_ = 0;
  std::size_t terminates_ = 0;
  std::exception_ptr failure_;
  Clock::time_point start_ = Clock::now();
};

// Lets local workers issue their first request strictly in listing order.
class StartGate {
 public:
  void wait_turn(std::size_t position) {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return released_ || served_ >= position; });
  }
  void advance() {
    {
      std::lock_guard lock(mutex_);
      ++served_;
    }
    cv_.notify_all();
  }
  void release() {
    {
      std::lock_guard lock(mutex_);
      released_ = true;
    }
    cv_.notify_all();
  }

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  std::size_t served_ = 0;
  bool released_ = false;
};

class LocalLink : public WorkerLink {
 public:
  LocalLink(MasterCore& master, std::size_t index, BlockingQueue<Message>& mailbox, StartGate* gate)
      : master_(master), index_(index), mailbox_(mailbox), gate_(gate) {}

  void send(Message message) override {
    if (gate_ && !sent_) gate_->wait_turn(index_);
    sent_ = true;
    master_.post(index_, std::move(message));
  }

  Message receive() override {
    auto message = mailbox_.pop();
    if (!message) throw RunError("master closed the channel");
    if (gate_ && !received_) gate_->advance();
    received_ = true;
    return std::move(*message);
  }

 private:
  MasterCore& master_;
  std::size_t index_;
  BlockingQueue<Message>& mailbox_;
  StartGate* gate_;
  bool sent_ = false;
  bool received_ = false;
};

}  // namespace

std::vector<WorkerConfig> make_worker_configs(std::size_t count, std::span<const double> slowdowns) {
  std::vector<WorkerConfig> configs(count);
  for (std::size_t k = 0; k < count; ++k) {
    configs[k].id = k + 1;
    configs[k].slowdown = k < slowdowns.size() ? slowdowns[k] : 1.0;
  }
  return configs;
}

std::function<double(std::size_t)> random_extra_work(std::uint64_t seed, double heavy_fraction,
                                                     double heavy_seconds) {
  return [=](std::size_t i) {
    const double u = static_cast<double>(splitmix64(seed ^ splitmix64(i)) >> 11) * 0x1.0p-53;
    return u < heavy_fraction ? heavy_seconds : 0.0;
  };
}

std::vector<double> RunReport::finishing_times() const {
  std::vector<double> out;
  for (const auto& w : workers) out.push_back(w.finishing_time_s);
  return out;
}

WorkerStats run_worker(WorkerLink& link, const PointCloud& cloud, const SpinImageParams& params,
                       const WorkerConfig& config, const WorkModel& work) {
  if (work.mode == DelayMode::kAuto) throw UsageError("run_worker needs a resolved delay mode");
  WorkerStats stats;
  std::vector<SpinImage> images;
  Clock::time_point target = Clock::now();

  auto pause_until = [&](Clock::time_point deadline) {
    if (work.mode == DelayMode::kBusyWait) {
      while (Clock::now() < deadline) {
      }
    } else {
      std::this_thread::sleep_until(deadline);
    }
  };

  link.send(WorkRequest{});
  while (true) {
    Message reply = link.receive();
    if (auto* assign = std::get_if<Assign>(&reply)) {
      const ChunkRange range = assign->range;
      if (range.start >= range.end || range.end > cloud.size()) {
        throw ProtocolError("Assign range outside the replicated cloud");
      }
      stats.chunks.push_back(range);
      const auto chunk_start = Clock::now();
      for (std::size_t i = range.start; i < range.end; ++i) {
        const double cpu0 = thread_cpu_seconds();
        images.push_back(generate_spin_image(cloud, i, params));
        const double compute = thread_cpu_seconds() - cpu0;
        double delay = (config.slowdown - 1.0) * compute + config.slowdown * work.base_seconds;
        if (work.extra_seconds) delay += config.slowdown * work.extra_seconds(i);
        // Oversleep on one image is absorbed by the next.
        target = std::max(target, Clock::now()) +
                 std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(delay));
        if (delay > 0.0) pause_until(target);
      }
      stats.images += range.size();
      stats.busy_seconds += seconds_since(chunk_start);
      link.send(WorkRequest{});
    } else if (std::holds_alternative<Terminate>(reply)) {
      link.send(Results{std::move(images)});
      return stats;
    } else {
      throw ProtocolError("worker received unexpected " +
                          std::string(to_string(tag_of(reply))));
    }
  }
}

RunResult run_local(const PointCloud& cloud, std::size_t n, const SpinImageParams& params,
                    SchedulerKind kind, std::span<const WorkerConfig> workers,
                    const RunOptions& options) {
  validate_workers(workers);
  validate_run(cloud, n, params);

  const std::size_t count = workers.size();
  std::vector<std::unique_ptr<BlockingQueue<Message>>> mailboxes;
  std::vector<MasterCore::Sender> senders;
  std::vector<std::size_t> ids;
  for (std::size_t w = 0; w < count; ++w) {
    mailboxes.push_back(std::make_unique<BlockingQueue<Message>>());
    senders.push_back([box = mailboxes.back().get()](const Message& m) { box->push(m); });
    ids.push_back(workers[w].id);
  }
  StartGate gate;
  MasterCore master(kind, n, params.width, std::move(ids), std::move(senders), [&] {
    gate.release();
    for (auto& box : mailboxes) box->close();
  });

  WorkModel work = options.work;
  work.mode = resolve_mode(work.mode, count);

  master.start_clock();
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < count; ++w) {
    threads.emplace_back([&, w] {
      LocalLink link(master, w, *mailboxes[w], options.ordered_start ? &gate : nullptr);
      try {
        run_worker(link, cloud, params, workers[w], work);
      } catch (const std::exception& e) {
        master.post_failure(w, e.what());
      }
    });
  }

  std::optional<RunResult> result;
  std::exception_ptr error;
  try {
    result = master.run(options.dispatch_threads);
  } catch (...) {
    error = std::current_exception();
  }
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
  return std::move(*result);
}

Message SocketWorkerLink::receive() {
  auto message = socket_.recv_message();
  if (!message) throw RunError("master closed the connection");
  return std::move(*message);
}

DistributedMaster::DistributedMaster(const Endpoint& listen) : listener_(listen) {}

RunResult DistributedMaster::run(const PointCloud& cloud, std::size_t n, const SpinImageParams& params,
                                 SchedulerKind kind, const DistributedOptions& options) {
  validate_run(cloud, n, params);
  if (options.expected_workers == 0) throw ValidationError("at least one worker is required");

  std::vector<Socket> connections;
  const auto deadline = Clock::now() + options.accept_timeout;
  while (connections.size() < options.expected_workers) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    std::optional<Socket> s;
    if (left.count() > 0) s = listener_.accept(left);
    if (!s) {
      throw RunError("timed out waiting for workers: " + std::to_string(connections.size()) + " of " +
                     std::to_string(options.expected_workers) + " connected");
    }
    connections.push_back(std::move(*s));
  }

  const std::size_t count = connections.size();
  std::vector<std::unique_ptr<std::mutex>> send_locks;
  std::vector<MasterCore::Sender> senders;
  std::vector<std::size_t> ids;
  for (std::size_t w = 0; w < count; ++w) {
    send_locks.push_back(std::make_unique<std::mutex>());
    senders.push_back([&, w](const Message& m) {
      std::lock_guard lock(*send_locks[w]);
      connections[w].send_message(m);
    });
    ids.push_back(w + 1);
  }
  auto shutdown_all = [&] {
    for (auto& c : connections) c.shutdown();
  };
  MasterCore master(kind, n, params.width, std::move(ids), std::move(senders), shutdown_all);

  const Message cloud_message =
      CloudTransfer{std::vector<OrientedPoint>(cloud.begin(), cloud.end())};
  const auto cloud_frame = encode_frame(cloud_message);
  for (std::size_t w = 0; w < count; ++w) {
    connections[w].send_all(cloud_frame);
    master.record_sent(w, cloud_message);
  }
  master.start_clock();

  std::vector<std::thread> readers;
  for (std::size_t w = 0; w < count; ++w) {
    readers.emplace_back([&, w] {
      bool delivered_results = false;
      try {
        while (auto message = connections[w].recv_message()) {
          delivered_results = delivered_results || std::holds_alternative<Results>(*message);
          master.post(w, std::move(*message));
        }
        // A close after Results is the normal end of a session.
        if (!delivered_results) master.post_failure(w, "connection closed");
      } catch (const std::exception& e) {
        if (!delivered_results) master.post_failure(w, e.what());
      }
    });
  }

  std::optional<RunResult> result;
  std::exception_ptr error;
  try {
    result = master.run(options.run.dispatch_threads);
  } catch (...) {
    error = std::current_exception();
  }
  shutdown_all();
  for (auto& t : readers) t.join();
  if (error) std::rethrow_exception(error);
  return std::move(*result);
}

RunResult run_distributed(const PointCloud& cloud, std::size_t n, const SpinImageParams& params,
                          SchedulerKind kind, const Endpoint& listen,
                          const DistributedOptions& options) {
  DistributedMaster master(listen);
  return master.run(cloud, n, params, kind, options);
}

WorkerStats run_remote_worker(const Endpoint& master, const SpinImageParams& params,
                              const WorkerConfig& config, const WorkModel& work) {
  params.validate();
  SocketWorkerLink link(Socket::connect(master));
  Message first = link.receive();
  auto* transfer = std::get_if<CloudTransfer>(&first);
  if (!transfer) {
    throw ProtocolError("expected CloudTransfer, got " + std::string(to_string(tag_of(first))));
  }
  const PointCloud cloud(std::move(transfer->points));
  WorkModel resolved = work;
  if (resolved.mode == DelayMode::kAuto) resolved.mode = DelayMode::kBusyWait;
  return run_worker(link, cloud, params, config, resolved);
}

}  // namespace spinsched
