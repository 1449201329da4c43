#include "spinsched/scheduling.hpp"

#include <algorithm>
#include <cctype>
#include <string>

#include "spinsched/error.hpp"

namespace spinsched {
namespace {

constexpr std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

}  // namespace

SchedulerKind parse_scheduler_kind(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "static") return SchedulerKind::kStatic;
  if (lower == "ss") return SchedulerKind::kSS;
  if (lower == "gss") return SchedulerKind::kGSS;
  if (lower == "fac") return SchedulerKind::kFAC;
  throw UsageError("unknown scheduler '" + std::string(name) + "' (expected static, ss, gss or fac)");
}

std::string_view to_string(SchedulerKind kind) {
  switch (kind) {
    case SchedulerKind::kStatic: return "STATIC";
    case SchedulerKind::kSS: return "SS";
    case SchedulerKind::kGSS: return "GSS";
    case SchedulerKind::kFAC: return "FAC";
  }
  return "?";
}

Scheduler::Scheduler(SchedulerKind kind, std::int64_t total, std::int64_t workers) : kind_(kind) {
  if (total < 0) throw ValidationError("iteration count must be non-negative");
  if (workers < 1) throw ValidationError("worker count must be at least 1");
  total_ = static_cast<std::uint64_t>(total);
  workers_ = static_cast<std::uint64_t>(workers);
}

std::uint64_t Scheduler::chunk_size() {
  const std::uint64_t remaining = total_ - scheduled_;
  switch (kind_) {
    case SchedulerKind::kStatic: {
      const std::uint64_t base = total_ / workers_;
      return step_ < total_ % workers_ ? base + 1 : base;
    }
    case SchedulerKind::kSS:
      return 1;
    case SchedulerKind::kGSS:
      return ceil_div(remaining, workers_);
    case SchedulerKind::kFAC:
      if (fac_batch_left_ == 0) {
        fac_chunk_ = ceil_div(remaining, 2 * workers_);
        fac_batch_left_ = workers_;
      }
      --fac_batch_left_;
      return fac_chunk_;
  }
  return 1;
}

std::optional<ChunkRange> Scheduler::next_chunk() {
  if (done()) return std::nullopt;
  const std::uint64_t size = std::min(chunk_size(), total_ - scheduled_);
  // STATIC blocks are never empty while work remains: step < min(P, N) here.
  ChunkRange chunk{scheduled_, scheduled_ + size};
  scheduled_ += size;
  ++step_;
  return chunk;
}

std::vector<ChunkRange> chunk_sequence(SchedulerKind kind, std::int64_t total, std::int64_t workers) {
  Scheduler scheduler(kind, total, workers);
  std::vector<ChunkRange> chunks;
  while (auto c = scheduler.next_chunk()) chunks.push_back(*c);
  return chunks;
}

}  // namespace spinsched
