#pragma once

#include <cmath>
#include <cstdlib>
#include <algorithm>
#include <deque>
#include <map>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "spinsched/error.hpp"
#include "spinsched/geometry.hpp"
#include "spinsched/runtime.hpp"
#include "spinsched/spinimage.hpp"

namespace spinsched::testing {

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string pattern = (std::filesystem::temp_directory_path() / "spinsched-XXXXXX").string();
    path_ = ::mkdtemp(pattern.data());
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// WorkerLink fed from a fixed script of master replies.
class ScriptedLink : public WorkerLink {
 public:
  explicit ScriptedLink(std::deque<Message> replies) : replies_(std::move(replies)) {}

  void send(Message message) override { sent.push_back(std::move(message)); }
  Message receive() override {
    if (replies_.empty()) throw RunError("script exhausted");
    Message m = std::move(replies_.front());
    replies_.pop_front();
    return m;
  }

  std::vector<Message> sent;

 private:
  std::deque<Message> replies_;
};

// Brute-force spin image computed along a different route from the library:
// the support test compares angles via atan2, alpha comes from the cross
// product (distance to the normal line) and everything is in long double.
inline std::vector<std::uint32_t> brute_force_bins(const PointCloud& cloud, std::size_t i,
                                                   const SpinImageParams& params) {
  using LD = long double;
  const auto& p = cloud[i];
  const LD w = params.width;
  std::vector<std::uint32_t> bins(std::size_t{params.width} * params.width, 0);
  for (const auto& x : cloud) {
    const LD cx = LD(p.normal.y) * x.normal.z - LD(p.normal.z) * x.normal.y;
    const LD cy = LD(p.normal.z) * x.normal.x - LD(p.normal.x) * x.normal.z;
    const LD cz = LD(p.normal.x) * x.normal.y - LD(p.normal.y) * x.normal.x;
    const LD c = LD(p.normal.x) * x.normal.x + LD(p.normal.y) * x.normal.y + LD(p.normal.z) * x.normal.z;
    const LD angle = std::atan2(std::sqrt(cx * cx + cy * cy + cz * cz), c);
    if (angle > params.support_angle) continue;
    const LD dx = LD(x.position.x) - p.position.x;
    const LD dy = LD(x.position.y) - p.position.y;
    const LD dz = LD(x.position.z) - p.position.z;
    const LD beta = p.normal.x * dx + p.normal.y * dy + p.normal.z * dz;
    const LD ax = p.normal.y * dz - p.normal.z * dy;
    const LD ay = p.normal.z * dx - p.normal.x * dz;
    const LD az = p.normal.x * dy - p.normal.y * dx;
    const LD alpha = std::sqrt(ax * ax + ay * ay + az * az);
    const LD k = std::ceil((w / 2 - beta) / params.bin_size);
    const LD l = std::ceil(alpha / params.bin_size);
    if (k >= 0 && k < w && l >= 0 && l < w) {
      ++bins[static_cast<std::size_t>(k) * params.width + static_cast<std::size_t>(l)];
    }
  }
  return bins;
}

// Small random clouds with points spread wide enough that the literal bin
// formula lands some of them in the image.
inline PointCloud random_box_cloud(std::mt19937_64& rng, std::size_t m, double half_extent) {
  std::uniform_real_distribution<double> pos(-half_extent, half_extent);
  std::normal_distribution<double> dir(0.0, 1.0);
  std::vector<OrientedPoint> pts(m);
  for (auto& p : pts) {
    p.position = {pos(rng), pos(rng), pos(rng)};
    do {
      p.normal = {dir(rng), dir(rng), dir(rng)};
    } while (norm(p.normal) < 1e-3);
  }
  normalize_normals(pts);
  return PointCloud(std::move(pts));
}

struct ProtocolAudit {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

/// Checks a master-side message log against the request/assign protocol.
/// Per worker, ignoring the initial CloudTransfer, the sequence must match
/// (WorkRequest Assign)* WorkRequest Terminate Results; every Assign must
/// answer the worker's immediately preceding WorkRequest; and the Assign
/// ranges over all workers must partition [0, n).
inline ProtocolAudit audit_protocol(const std::vector<LogEntry>& log, std::uint64_t n) {
  ProtocolAudit audit;
  std::map<std::size_t, std::vector<const LogEntry*>> per_worker;
  for (const auto& e : log) {
    if (e.tag == MessageTag::kCloudTransfer) continue;
    per_worker[e.worker].push_back(&e);
  }
  std::vector<ChunkRange> ranges;
  for (const auto& [worker, seq] : per_worker) {
    const std::string who = "worker " + std::to_string(worker) + ": ";
    std::size_t i = 0;
    bool terminated = false;
    while (i < seq.size() && !terminated) {
      if (seq[i]->tag != MessageTag::kWorkRequest || seq[i]->direction != Direction::kToMaster) {
        audit.violations.push_back(who + "expected WorkRequest at position " + std::to_string(i));
        break;
      }
      if (i + 1 >= seq.size()) {
        audit.violations.push_back(who + "WorkRequest left unanswered");
        break;
      }
      const LogEntry& reply = *seq[i + 1];
      if (reply.direction != Direction::kToWorker || reply.seq < seq[i]->seq) {
        audit.violations.push_back(who + "reply does not follow its request");
      }
      if (reply.tag == MessageTag::kAssign) {
        ranges.push_back(reply.range);
      } else if (reply.tag == MessageTag::kTerminate) {
        terminated = true;
      } else {
        audit.violations.push_back(who + "request answered by unexpected message");
        break;
      }
      i += 2;
    }
    if (!terminated) {
      audit.violations.push_back(who + "never terminated");
      continue;
    }
    if (i >= seq.size() || seq[i]->tag != MessageTag::kResults) {
      audit.violations.push_back(who + "no Results after Terminate");
    } else if (i + 1 != seq.size()) {
      audit.violations.push_back(who + "messages after Results");
    }
  }
  for (const auto& e : log) {
    if (e.tag != MessageTag::kResults) continue;
    const bool preceded = std::any_of(log.begin(), log.end(), [&](const LogEntry& t) {
      return t.tag == MessageTag::kTerminate && t.worker == e.worker && t.seq < e.seq;
    });
    if (!preceded) audit.violations.push_back("Results before Terminate from worker " + std::to_string(e.worker));
  }
  std::sort(ranges.begin(), ranges.end(),
            [](const ChunkRange& a, const ChunkRange& b) { return a.start < b.start; });
  std::uint64_t cursor = 0;
  for (const auto& r : ranges) {
    if (r.start != cursor || r.end <= r.start) {
      audit.violations.push_back("assigned ranges do not partition [0, n) at " + std::to_string(cursor));
      break;
    }
    cursor = r.end;
  }
  if (cursor != n && audit.violations.empty()) {
    audit.violations.push_back("assigned ranges cover [0, " + std::to_string(cursor) + ") not [0, " +
                               std::to_string(n) + ")");
  }
  return audit;
}

}  // namespace spinsched::testing
