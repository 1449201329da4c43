#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "spinsched/error.hpp"
#include "spinsched/runtime.hpp"
#include "support/test_support.hpp"

using namespace spinsched;
using spinsched::testing::audit_protocol;
using spinsched::testing::ScriptedLink;

namespace {

constexpr SchedulerKind kAllKinds[] = {SchedulerKind::kStatic, SchedulerKind::kSS,
                                       SchedulerKind::kGSS, SchedulerKind::kFAC};

const SpinImageParams kWide{8, 0.3, std::numbers::pi};

WorkModel resolved(DelayMode mode = DelayMode::kSleep) {
  WorkModel w;
  w.mode = mode;
  return w;
}

}  // namespace

TEST(Worker, TerminateOnFirstRequestSendsEmptyResults) {
  const auto cloud = synth_cloud(SynthKind::kSphere, 10, 1);
  ScriptedLink link({Terminate{}});
  const auto stats = run_worker(link, cloud, SpinImageParams{}, {1, 1.0}, resolved());
  EXPECT_EQ(stats.images, 0u);
  ASSERT_EQ(link.sent.size(), 2u);
  EXPECT_TRUE(std::holds_alternative<WorkRequest>(link.sent[0]));
  EXPECT_EQ(std::get<Results>(link.sent[1]).images.size(), 0u);
}

TEST(Worker, ResultsHoldExactlyTheAssignedImages) {
  const auto cloud = synth_cloud(SynthKind::kUniformBox, 20, 2);
  ScriptedLink link({Assign{{3, 7}}, Assign{{10, 12}}, Terminate{}});
  run_worker(link, cloud, kWide, {1, 1.0}, resolved());
  ASSERT_EQ(link.sent.size(), 4u);
  const auto& images = std::get<Results>(link.sent.back()).images;
  std::vector<std::size_t> origins;
  for (const auto& img : images) origins.push_back(img.origin_index());
  EXPECT_EQ(origins, (std::vector<std::size_t>{3, 4, 5, 6, 10, 11}));
  for (const auto& img : images) EXPECT_EQ(img, generate_spin_image(cloud, img.origin_index(), kWide));
}

TEST(Worker, UnexpectedMessageIsAProtocolError) {
  const auto cloud = synth_cloud(SynthKind::kSphere, 10, 1);
  ScriptedLink link({WorkRequest{}});
  EXPECT_THROW(run_worker(link, cloud, SpinImageParams{}, {1, 1.0}, resolved()), ProtocolError);
  ScriptedLink outside({Assign{{5, 11}}});
  EXPECT_THROW(run_worker(outside, cloud, SpinImageParams{}, {1, 1.0}, resolved()), ProtocolError);
}

TEST(Worker, SlowdownScalesComputeTime) {
  // Busy-wait emulation: a 4x worker should take four times as long on the
  // same chunk. Measured several times; the median ratio is checked.
  const auto cloud = synth_cloud(SynthKind::kUniformBox, 3000, 5);
  std::vector<double> ratios;
  for (int rep = 0; rep < 3; ++rep) {
    ScriptedLink fast({Assign{{0, 150}}, Terminate{}});
    ScriptedLink slow({Assign{{0, 150}}, Terminate{}});
    const double t1 = run_worker(fast, cloud, SpinImageParams{}, {1, 1.0}, resolved(DelayMode::kBusyWait)).busy_seconds;
    const double t4 = run_worker(slow, cloud, SpinImageParams{}, {2, 4.0}, resolved(DelayMode::kBusyWait)).busy_seconds;
    ratios.push_back(t4 / t1);
  }
  std::sort(ratios.begin(), ratios.end());
  EXPECT_NEAR(ratios[1], 4.0, 0.6) << "ratios " << ratios[0] << ' ' << ratios[1] << ' ' << ratios[2];
}

TEST(Worker, EmulatedBaseCostIsScaledBySlowdown) {
  const auto cloud = synth_cloud(SynthKind::kSphere, 50, 5);
  WorkModel work = resolved(DelayMode::kSleep);
  work.base_seconds = 0.002;
  ScriptedLink link({Assign{{0, 25}}, Terminate{}});
  const double t = run_worker(link, cloud, SpinImageParams{}, {1, 2.0}, work).busy_seconds;
  EXPECT_GE(t, 25 * 2 * 0.002);
  EXPECT_LT(t, 25 * 2 * 0.002 * 1.5);
}

TEST(Worker, AutoModeMustBeResolved) {
  const auto cloud = synth_cloud(SynthKind::kSphere, 10, 1);
  ScriptedLink link({Terminate{}});
  EXPECT_THROW(run_worker(link, cloud, SpinImageParams{}, {1, 1.0}, WorkModel{}), UsageError);
}

TEST(RunLocal, SingleWorkerReceivesEverything) {
  const auto cloud = synth_cloud(SynthKind::kUniformBox, 300, 4);
  const auto oracle = generate_all_sequential(cloud, 30, kWide);
  for (auto kind : kAllKinds) {
    const auto workers = make_worker_configs(1);
    const auto r = run_local(cloud, 30, kWide, kind, workers);
    EXPECT_EQ(r.images, oracle);
    ASSERT_EQ(r.report.workers.size(), 1u);
    EXPECT_EQ(r.report.workers[0].images_computed, 30u);
    EXPECT_EQ(r.report.terminate_messages, 1u);
  }
}

TEST(RunLocal, SelfSchedulingMessageCounts) {
  const auto cloud = synth_cloud(SynthKind::kSphere, 500, 4);
  const auto workers = make_worker_configs(4);
  const auto r = run_local(cloud, 100, SpinImageParams{}, SchedulerKind::kSS, workers);
  EXPECT_EQ(r.report.assign_messages, 100u);
  EXPECT_EQ(r.report.terminate_messages, 4u);
  std::size_t assigns = 0, terminates = 0;
  for (const auto& e : r.report.log) {
    assigns += e.tag == MessageTag::kAssign;
    terminates += e.tag == MessageTag::kTerminate;
  }
  EXPECT_EQ(assigns, 100u);
  EXPECT_EQ(terminates, 4u);
}

TEST(RunLocal, StaticSendsOneBlockPerWorker) {
  const auto cloud = synth_cloud(SynthKind::kSphere, 2000, 4);
  const auto r = run_local(cloud, 2000, SpinImageParams{4, 100.0, 1.0}, SchedulerKind::kStatic,
                           make_worker_configs(20));
  EXPECT_EQ(r.report.assign_messages, 20u);
  for (const auto& w : r.report.workers) EXPECT_EQ(w.chunks.size(), 1u);
}

TEST(RunLocal, MatchesOracleForEveryKind) {
  const auto cloud = synth_cloud(SynthKind::kUniformBox, 500, 9);
  const auto oracle = generate_all_sequential(cloud, 50, kWide);
  std::vector<std::vector<SpinImage>> outputs;
  for (auto kind : kAllKinds) {
    auto r = run_local(cloud, 50, kWide, kind, make_worker_configs(4));
    EXPECT_EQ(r.images, oracle) << to_string(kind);
    EXPECT_TRUE(audit_protocol(r.report.log, 50).ok());
    outputs.push_back(std::move(r.images));
  }
  for (const auto& o : outputs) EXPECT_EQ(o, outputs.front());
}

TEST(RunLocal, OutputInvariantUnderRandomConfigurations) {
  std::mt19937_64 rng(31);
  const auto cloud = spinsched::testing::random_box_cloud(rng, 240, 1.3);
  const auto oracle = generate_all_sequential(cloud, 60, kWide);
  for (int trial = 0; trial < 24; ++trial) {
    const auto kind = kAllKinds[rng() % 4];
    const std::size_t p = 1 + rng() % 9;
    std::vector<double> slow;
    for (std::size_t i = 0; i < p; ++i) slow.push_back(1.0 + static_cast<double>(rng() % 30) / 10.0);
    RunOptions options;
    options.dispatch_threads = 1 + rng() % 4;
    options.ordered_start = rng() % 2;
    const auto r = run_local(cloud, 60, kWide, kind, make_worker_configs(p, slow), options);
    ASSERT_EQ(r.images, oracle) << "trial " << trial;
    const auto audit = audit_protocol(r.report.log, 60);
    ASSERT_TRUE(audit.ok()) << audit.violations.front();
    const auto times = r.report.finishing_times();
    EXPECT_GE(r.report.parallel_time_s, *std::max_element(times.begin(), times.end()));
  }
}

TEST(RunLocal, OrderedStartServesWorkersInListingOrder) {
  const auto cloud = synth_cloud(SynthKind::kSphere, 400, 4);
  RunOptions options;
  options.ordered_start = true;
  for (int rep = 0; rep < 5; ++rep) {
    const auto r = run_local(cloud, 40, SpinImageParams{}, SchedulerKind::kGSS, make_worker_configs(4), options);
    std::vector<std::size_t> first_requests;
    for (const auto& e : r.report.log) {
      if (e.tag == MessageTag::kWorkRequest &&
          std::find(first_requests.begin(), first_requests.end(), e.worker) == first_requests.end()) {
        first_requests.push_back(e.worker);
      }
    }
    EXPECT_EQ(first_requests, (std::vector<std::size_t>{1, 2, 3, 4}));
    // GSS gives the first and largest chunk to worker 1.
    EXPECT_EQ(r.report.workers[0].chunks.front(), (ChunkRange{0, 10}));
  }
}

TEST(RunLocal, ZeroImagesTerminatesEveryWorker) {
  const auto cloud = synth_cloud(SynthKind::kSphere, 10, 4);
  const auto r = run_local(cloud, 0, SpinImageParams{}, SchedulerKind::kSS, make_worker_configs(3));
  EXPECT_TRUE(r.images.empty());
  EXPECT_EQ(r.report.terminate_messages, 3u);
}

TEST(RunLocal, Validation) {
  const auto cloud = synth_cloud(SynthKind::kSphere, 10, 4);
  EXPECT_THROW(run_local(cloud, 5, SpinImageParams{}, SchedulerKind::kSS, {}), ValidationError);
  EXPECT_THROW(run_local(cloud, 11, SpinImageParams{}, SchedulerKind::kSS, make_worker_configs(2)),
               ValidationError);
  const std::vector<WorkerConfig> dup{{1, 1.0}, {1, 1.0}};
  EXPECT_THROW(run_local(cloud, 5, SpinImageParams{}, SchedulerKind::kSS, dup), ValidationError);
  const std::vector<WorkerConfig> fast{{1, 0.5}};
  EXPECT_THROW(run_local(cloud, 5, SpinImageParams{}, SchedulerKind::kSS, fast), ValidationError);
}

TEST(RunLocal, ExtraWorkIsAPureFunctionOfIndex) {
  const auto a = random_extra_work(3, 0.25, 0.01);
  const auto b = random_extra_work(3, 0.25, 0.01);
  std::size_t heavy = 0;
  for (std::size_t i = 0; i < 4000; ++i) {
    EXPECT_EQ(a(i), b(i));
    heavy += a(i) > 0.0;
  }
  EXPECT_NEAR(static_cast<double>(heavy) / 4000.0, 0.25, 0.03);
}

TEST(RunLocal, HeterogeneousStaticIsSlowerThanSelfScheduling) {
  const auto cloud = synth_cloud(SynthKind::kSphere, 1000, 4);
  RunOptions options;
  options.work.base_seconds = 0.001;
  options.work.mode = DelayMode::kSleep;
  const std::vector<double> slow{4.0};
  const auto workers = make_worker_configs(4, slow);
  const auto st = run_local(cloud, 200, SpinImageParams{}, SchedulerKind::kStatic, workers, options);
  const auto ss = run_local(cloud, 200, SpinImageParams{}, SchedulerKind::kSS, workers, options);
  EXPECT_GT(st.report.parallel_time_s, ss.report.parallel_time_s * 1.5);
}

TEST(RunLocal, StaticGivesEachWorkerAtMostOneBlock) {
  const auto cloud = synth_cloud(SynthKind::kSphere, 200, 4);
  const auto workers = make_worker_configs(4);
  RunOptions options;
  options.ordered_start = false;
  options.work.mode = DelayMode::kSleep;
  for (int rep = 0; rep < 10; ++rep) {
    const auto r = run_local(cloud, 40, SpinImageParams{}, SchedulerKind::kStatic, workers, options);
    EXPECT_EQ(r.report.assign_messages, 4u);
    for (const auto& w : r.report.workers) EXPECT_EQ(w.chunks.size(), 1u);
  }
}
