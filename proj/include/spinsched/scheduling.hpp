#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace spinsched {

enum class SchedulerKind { kStatic, kSS, kGSS, kFAC };

SchedulerKind parse_scheduler_kind(std::string_view name);  // static|ss|gss|fac, any case
std::string_view to_string(SchedulerKind kind);             // STATIC|SS|GSS|FAC

// Half-open range of loop iterations (spin-image origins).
struct ChunkRange {
  std::uint64_t start = 0;
  std::uint64_t end = 0;

  std::uint64_t size() const noexcept { return end - start; }
  friend bool operator==(const ChunkRange&, const ChunkRange&) = default;
};

/// Chunk calculator for one loop of `total` iterations over `workers` workers.
///
/// Each next_chunk() call hands out the range starting at scheduled() and
/// advances the state; nullopt once everything is scheduled. Chunk sizes:
///   STATIC  P near-equal blocks: the first N mod P get ceil(N/P), the rest floor(N/P)
///   SS      1
///   GSS     ceil(R/P), R = iterations not yet scheduled
///   FAC     batches of P chunks of ceil(R_b/(2P)), R_b = R at batch start
/// All sizes are capped at R. Not thread-safe; callers serialize access.
class Scheduler {
 public:
  // Throws ValidationError if total < 0 or workers < 1.
  Scheduler(SchedulerKind kind, std::int64_t total, std::int64_t workers);

  std::optional<ChunkRange> next_chunk();

  SchedulerKind kind() const noexcept { return kind_; }
  std::uint64_t total() const noexcept { return total_; }
  std::uint64_t workers() const noexcept { return workers_; }
  std::uint64_t scheduled() const noexcept { return scheduled_; }
  std::uint64_t remaining() const noexcept { return total_ - scheduled_; }
  std::uint64_t step() const noexcept { return step_; }
  std::uint64_t fac_batch_left() const noexcept { return fac_batch_left_; }
  std::uint64_t fac_chunk() const noexcept { return fac_chunk_; }
  bool done() const noexcept { return scheduled_ == total_; }

 private:
  std::uint64_t chunk_size();

  SchedulerKind kind_;
  std::uint64_t total_;
  std::uint64_t workers_;
  std::uint64_t scheduled_ = 0;
  std::uint64_t step_ = 0;
  std::uint64_t fac_batch_left_ = 0;
  std::uint64_t fac_chunk_ = 0;
};

// Exhausts a fresh Scheduler.
std::vector<ChunkRange> chunk_sequence(SchedulerKind kind, std::int64_t total, std::int64_t workers);

}  // namespace spinsched
