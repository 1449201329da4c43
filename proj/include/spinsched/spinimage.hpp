#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "spinsched/geometry.hpp"

namespace spinsched {

struct SpinImageParams {
  std::uint32_t width = 5;     // pixels per row and column
  double bin_size = 0.1;       // model length units per bin
  double support_angle = 2.0 * std::numbers::pi;  // radians

  // Throws ValidationError unless width >= 1, bin_size > 0 and
  // 0 < support_angle <= 2*pi.
  void validate() const;

  // Bin sizes above 10 are accepted but fall outside the usual range.
  bool bin_size_in_usual_range() const { return bin_size > 0.0 && bin_size <= 10.0; }

  friend bool operator==(const SpinImageParams&, const SpinImageParams&) = default;
};

// Signed height along the origin's normal (beta) and radial distance from
// the normal line (alpha).
struct Projection {
  double beta = 0.0;
  double alpha = 0.0;
};

struct BinIndex {
  std::uint32_t row = 0;  // k
  std::uint32_t col = 0;  // l

  friend bool operator==(const BinIndex&, const BinIndex&) = default;
};

class SpinImage {
 public:
  SpinImage(std::size_t origin_index, std::uint32_t width);
  SpinImage(std::size_t origin_index, std::uint32_t width, std::vector<std::uint32_t> bins);

  std::size_t origin_index() const noexcept { return origin_; }
  std::uint32_t width() const noexcept { return width_; }

  std::uint32_t at(std::uint32_t row, std::uint32_t col) const { return bins_[row * width_ + col]; }
  void increment(BinIndex b) { ++bins_[b.row * width_ + b.col]; }

  // Row-major W*W counts.
  std::span<const std::uint32_t> bins() const noexcept { return bins_; }
  std::uint64_t total() const;

  friend bool operator==(const SpinImage&, const SpinImage&) = default;

 private:
  std::size_t origin_;
  std::uint32_t width_;
  std::vector<std::uint32_t> bins_;
};

// p.normal must be unit. alpha is clamped at zero against rounding.
Projection project(const OrientedPoint& p, const OrientedPoint& x);

// acos of the clamped dot product compared against the support angle.
bool support_test(Vec3 origin_normal, Vec3 other_normal, double support_angle);

/// Bin for a projection, or nullopt when it falls outside the image.
///
/// k = ceil((W/2 - beta) / B), l = ceil(alpha / B), exact ceiling with no
/// epsilon. The half-width W/2 is in pixels and is not scaled by B.
std::optional<BinIndex> bin_indices(const Projection& proj, const SpinImageParams& params);

// Image spun around point i, visiting every j in [0, M) including i itself.
SpinImage generate_spin_image(const PointCloud& cloud, std::size_t i, const SpinImageParams& params);

// Images for origins [start, end), in index order.
std::vector<SpinImage> generate_range(const PointCloud& cloud, std::size_t start, std::size_t end,
                                      const SpinImageParams& params);

// Serial reference: images for origins [0, n).
std::vector<SpinImage> generate_all_sequential(const PointCloud& cloud, std::size_t n,
                                               const SpinImageParams& params);

// ceil(0.1 * M), the default number of images.
std::size_t default_image_count(std::size_t cloud_size);

// Text records: "spinimage <origin_index> <W>" then W rows of W integers.
void write_spin_images(std::ostream& out, std::span<const SpinImage> images);
std::vector<SpinImage> read_spin_images(std::istream& in);

}  // namespace spinsched
