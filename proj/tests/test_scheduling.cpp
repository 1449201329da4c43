#include <gtest/gtest.h>

#include <random>

#include "spinsched/error.hpp"
#include "spinsched/scheduling.hpp"

using namespace spinsched;

namespace {

std::vector<std::uint64_t> sizes(SchedulerKind kind, std::int64_t n, std::int64_t p) {
  std::vector<std::uint64_t> out;
  for (const auto& c : chunk_sequence(kind, n, p)) out.push_back(c.size());
  return out;
}

constexpr SchedulerKind kAllKinds[] = {SchedulerKind::kStatic, SchedulerKind::kSS,
                                       SchedulerKind::kGSS, SchedulerKind::kFAC};

}  // namespace

TEST(Scheduler, SelfSchedulingHandsOutSingleIterations) {
  const auto s = sizes(SchedulerKind::kSS, 100, 4);
  EXPECT_EQ(s, std::vector<std::uint64_t>(100, 1));
}

TEST(Scheduler, GuidedSelfSchedulingHandTrace) {
  EXPECT_EQ(sizes(SchedulerKind::kGSS, 100, 4),
            (std::vector<std::uint64_t>{25, 19, 14, 11, 8, 6, 5, 3, 3, 2, 1, 1, 1, 1}));
}

TEST(Scheduler, FactoringHandTrace) {
  EXPECT_EQ(sizes(SchedulerKind::kFAC, 100, 4),
            (std::vector<std::uint64_t>{13, 13, 13, 13, 6, 6, 6, 6, 3, 3, 3, 3, 2, 2, 2, 2, 1, 1, 1, 1}));
}

TEST(Scheduler, StaticBlocks) {
  EXPECT_EQ(sizes(SchedulerKind::kStatic, 10, 4), (std::vector<std::uint64_t>{3, 3, 2, 2}));
  EXPECT_EQ(sizes(SchedulerKind::kStatic, 7, 7), std::vector<std::uint64_t>(7, 1));
  EXPECT_EQ(sizes(SchedulerKind::kStatic, 3, 8), std::vector<std::uint64_t>(3, 1));
}

TEST(Scheduler, NoWorkMeansNoChunks) {
  for (auto kind : kAllKinds) {
    Scheduler s(kind, 0, 4);
    EXPECT_FALSE(s.next_chunk().has_value());
    EXPECT_TRUE(s.done());
  }
}

TEST(Scheduler, ConstructionValidation) {
  EXPECT_THROW(Scheduler(SchedulerKind::kSS, 10, 0), ValidationError);
  EXPECT_THROW(Scheduler(SchedulerKind::kSS, -1, 2), ValidationError);
}

TEST(Scheduler, SequenceRanges) {
  const auto trace = chunk_sequence(SchedulerKind::kSS, 5, 2);
  ASSERT_EQ(trace.size(), 5u);
  for (std::uint64_t i = 0; i < 5; ++i) EXPECT_EQ(trace[i], (ChunkRange{i, i + 1}));

  const auto gss = chunk_sequence(SchedulerKind::kGSS, 100, 4);
  EXPECT_EQ(gss.front(), (ChunkRange{0, 25}));
  EXPECT_EQ(gss[1], (ChunkRange{25, 44}));
  EXPECT_EQ(gss.back(), (ChunkRange{99, 100}));
}

TEST(Scheduler, StateCounters) {
  Scheduler s(SchedulerKind::kFAC, 100, 4);
  s.next_chunk();
  EXPECT_EQ(s.scheduled(), 13u);
  EXPECT_EQ(s.step(), 1u);
  EXPECT_EQ(s.fac_chunk(), 13u);
  EXPECT_EQ(s.fac_batch_left(), 3u);
  EXPECT_EQ(s.remaining(), 87u);
}

TEST(Scheduler, KindNames) {
  for (auto kind : kAllKinds) EXPECT_EQ(parse_scheduler_kind(to_string(kind)), kind);
  EXPECT_EQ(parse_scheduler_kind("gss"), SchedulerKind::kGSS);
  EXPECT_THROW(parse_scheduler_kind("tss"), UsageError);
}

// Independent references: each rule evaluated from its definition on the
// remaining count, without the Scheduler's state machine.
TEST(SchedulerProperty, MatchesDefinitionsAndInvariants) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 400; ++trial) {
    const std::int64_t n = static_cast<std::int64_t>(rng() % 100001);
    const std::int64_t p = 1 + static_cast<std::int64_t>(rng() % 256);
    for (auto kind : kAllKinds) {
      const auto trace = chunk_sequence(kind, n, p);
      std::uint64_t cursor = 0;
      for (const auto& c : trace) {
        ASSERT_EQ(c.start, cursor);
        ASSERT_GE(c.size(), 1u);
        cursor = c.end;
      }
      ASSERT_EQ(cursor, static_cast<std::uint64_t>(n));

      const auto un = static_cast<std::uint64_t>(n);
      const auto up = static_cast<std::uint64_t>(p);
      switch (kind) {
        case SchedulerKind::kSS:
          EXPECT_EQ(trace.size(), un);
          break;
        case SchedulerKind::kStatic:
          EXPECT_EQ(trace.size(), std::min(up, un));
          for (const auto& c : trace) EXPECT_LE(c.size() - un / up, 1u);
          break;
        case SchedulerKind::kGSS: {
          std::uint64_t remaining = un;
          for (std::size_t i = 0; i < trace.size(); ++i) {
            EXPECT_EQ(trace[i].size(), (remaining + up - 1) / up);
            if (i > 0) EXPECT_LE(trace[i].size(), trace[i - 1].size());
            remaining -= trace[i].size();
          }
          if (n > 0) EXPECT_EQ(trace.front().size(), (un + up - 1) / up);
          break;
        }
        case SchedulerKind::kFAC: {
          std::uint64_t remaining = un;
          std::uint64_t previous = UINT64_MAX;
          for (std::size_t b = 0; b < trace.size(); b += up) {
            const std::uint64_t batch = (remaining + 2 * up - 1) / (2 * up);
            EXPECT_LE(batch, previous);
            previous = batch;
            for (std::size_t i = b; i < std::min(trace.size(), b + up); ++i) {
              EXPECT_EQ(trace[i].size(), std::min(batch, remaining));
              remaining -= trace[i].size();
            }
          }
          break;
        }
      }
    }
  }
}

TEST(SchedulerProperty, TraceEqualsStepwiseCalls) {
  for (auto kind : kAllKinds) {
    Scheduler s(kind, 1234, 13);
    std::vector<ChunkRange> stepwise;
    while (auto c = s.next_chunk()) stepwise.push_back(*c);
    EXPECT_EQ(stepwise, chunk_sequence(kind, 1234, 13));
    EXPECT_FALSE(s.next_chunk().has_value());
  }
}
