#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "spinsched/vec3.hpp"

namespace spinsched {

struct OrientedPoint {
  Vec3 position;
  Vec3 normal;

  friend bool operator==(const OrientedPoint&, const OrientedPoint&) = default;
};

// Maximum deviation of a normal's length from 1 accepted by PointCloud.
inline constexpr double kUnitNormalTolerance = 1e-9;

/// An immutable, ordered set of oriented points.
///
/// Construction validates but does not modify the points: every coordinate
/// must be finite and every normal unit within kUnitNormalTolerance. Loaders
/// normalize first (see normalize_normals). Index order is preserved exactly,
/// since chunk boundaries refer to point indices.
class PointCloud {
 public:
  explicit PointCloud(std::vector<OrientedPoint> points);

  std::size_t size() const noexcept { return points_.size(); }
  const OrientedPoint& operator[](std::size_t i) const noexcept { return points_[i]; }
  std::span<const OrientedPoint> points() const noexcept { return points_; }

  auto begin() const noexcept { return points_.begin(); }
  auto end() const noexcept { return points_.end(); }

  friend bool operator==(const PointCloud&, const PointCloud&) = default;

 private:
  std::vector<OrientedPoint> points_;
};

// Scales each normal to unit length, leaving normals already unit within
// kUnitNormalTolerance untouched. Throws ValidationError naming the first
// point whose normal is zero or non-finite.
void normalize_normals(std::span<OrientedPoint> points);

enum class CloudFormat { kXyzn, kOff };

CloudFormat parse_cloud_format(std::string_view name);

// One point per line: "px py pz nx ny nz". Blank lines and lines starting
// with '#' are skipped.
PointCloud read_xyzn(std::istream& in);

// ASCII OFF with triangular faces. Vertex normals come from
// compute_vertex_normals.
PointCloud read_off(std::istream& in);

PointCloud load_point_cloud(const std::filesystem::path& path, CloudFormat format);

// Writes with round-trip precision, so read_xyzn(write_xyzn(c)) == c.
void write_xyzn(std::ostream& out, const PointCloud& cloud);

using Face = std::array<std::size_t, 3>;

/// Area-weighted vertex normals.
///
/// Each face contributes its un-normalized cross product (e1 x e2) to its three
/// vertices; the sums are then normalized. Zero-area faces add nothing. Throws
/// ValidationError for out-of-range indices or a vertex whose accumulated
/// normal is zero (no usable incident face).
std::vector<Vec3> compute_vertex_normals(std::span<const Vec3> vertices,
                                         std::span<const Face> faces);

enum class SynthKind { kSphere, kTorus, kUniformBox };

SynthKind parse_synth_kind(std::string_view name);

// Torus generated by synth_cloud: major radius, tube radius, centred at the
// origin around the z axis.
inline constexpr double kTorusMajorRadius = 1.0;
inline constexpr double kTorusMinorRadius = 0.35;

/// Deterministic synthetic cloud.
///
/// sphere: unit sphere, normal = position. torus: see constants above, exact
/// analytic normals. uniform_box: positions uniform in [-1, 1]^3 with random
/// unit normals. Identical (kind, count, seed) gives bitwise-identical output
/// on any platform (the generator avoids std:: distributions).
PointCloud synth_cloud(SynthKind kind, std::size_t count, std::uint64_t seed);

}  // namespace spinsched
