#include "spinsched/spinimage.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "spinsched/error.hpp"

namespace spinsched {

void SpinImageParams::validate() const {
  if (width < 1) throw ValidationError("image width must be at least 1");
  if (!(bin_size > 0.0) || !std::isfinite(bin_size)) {
    throw ValidationError("bin size must be a positive real");
  }
  if (!(support_angle > 0.0) || support_angle > 2.0 * std::numbers::pi) {
    throw ValidationError("support angle must lie in (0, 2*pi]");
  }
}

SpinImage::SpinImage(std::size_t origin_index, std::uint32_t width)
    : origin_(origin_index), width_(width), bins_(std::size_t{width} * width, 0) {}

SpinImage::SpinImage(std::size_t origin_index, std::uint32_t width, std::vector<std::uint32_t> bins)
    : origin_(origin_index), width_(width), bins_(std::move(bins)) {
  if (bins_.size() != std::size_t{width} * width) {
    throw ValidationError("spin image " + std::to_string(origin_index) + " needs " +
                          std::to_string(std::size_t{width} * width) + " bins, got " +
                          std::to_string(bins_.size()));
  }
}

std::uint64_t SpinImage::total() const {
  return std::accumulate(bins_.begin(), bins_.end(), std::uint64_t{0});
}

Projection project(const OrientedPoint& p, const OrientedPoint& x) {
  const Vec3 d = x.position - p.position;
  const double beta = dot(p.normal, d);
  const double alpha = std::sqrt(std::max(0.0, dot(d, d) - beta * beta));
  return {beta, alpha};
}

bool support_test(Vec3 origin_normal, Vec3 other_normal, double support_angle) {
  const double c = std::clamp(dot(origin_normal, other_normal), -1.0, 1.0);
  return std::acos(c) <= support_angle;
}

std::optional<BinIndex> bin_indices(const Projection& proj, const SpinImageParams& params) {
  const double w = static_cast<double>(params.width);
  const double k = std::ceil((w / 2.0 - proj.beta) / params.bin_size);
  const double l = std::ceil(proj.alpha / params.bin_size);
  if (!(k >= 0.0 && k < w && l >= 0.0 && l < w)) return std::nullopt;
  return BinIndex{static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(l)};
}

SpinImage generate_spin_image(const PointCloud& cloud, std::size_t i, const SpinImageParams& params) {
  if (i >= cloud.size()) {
    throw UsageError("origin index " + std::to_string(i) + " out of range for cloud of " +
                     std::to_string(cloud.size()) + " points");
  }
  SpinImage image(i, params.width);
  const OrientedPoint& origin = cloud[i];
  for (const OrientedPoint& x : cloud) {
    if (!support_test(origin.normal, x.normal, params.support_angle)) continue;
    if (auto bin = bin_indices(project(origin, x), params)) image.increment(*bin);
  }
  return image;
}

std::vector<SpinImage> generate_range(const PointCloud& cloud, std::size_t start, std::size_t end,
                                      const SpinImageParams& params) {
  if (start > end || end > cloud.size()) {
    throw UsageError("invalid image range [" + std::to_string(start) + ", " + std::to_string(end) +
                     ") for cloud of " + std::to_string(cloud.size()) + " points");
  }
  std::vector<SpinImage> images;
  images.reserve(end - start);
  for (std::size_t i = start; i < end; ++i) images.push_back(generate_spin_image(cloud, i, params));
  return images;
}

std::vector<SpinImage> generate_all_sequential(const PointCloud& cloud, std::size_t n,
                                               const SpinImageParams& params) {
  if (n == 0 || n > cloud.size()) {
    throw UsageError("image count " + std::to_string(n) + " must lie in [1, " +
                     std::to_string(cloud.size()) + "]");
  }
  return generate_range(cloud, 0, n, params);
}

std::size_t default_image_count(std::size_t cloud_size) { return (cloud_size + 9) / 10; }

void write_spin_images(std::ostream& out, std::span<const SpinImage> images) {
  for (const auto& image : images) {
    out << "spinimage " << image.origin_index() << ' ' << image.width() << '\n';
    for (std::uint32_t r = 0; r < image.width(); ++r) {
      for (std::uint32_t c = 0; c < image.width(); ++c) {
        if (c) out << ' ';
        out << image.at(r, c);
      }
      out << '\n';
    }
  }
}

namespace {

template <typename T>
T parse_integer(const std::string& token, std::size_t line) {
  T value{};
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size()) {
    throw ParseError("expected a non-negative integer, got '" + token + "'", line);
  }
  return value;
}

}  // namespace

std::vector<SpinImage> read_spin_images(std::istream& in) {
  std::vector<SpinImage> images;
  std::string text;
  std::size_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    std::istringstream header(text);
    std::string tag, origin_tok, width_tok, extra;
    if (!(header >> tag)) continue;
    if (tag != "spinimage" || !(header >> origin_tok >> width_tok) || (header >> extra)) {
      throw ParseError("expected 'spinimage <origin_index> <W>'", line_no);
    }
    const auto origin = parse_integer<std::size_t>(origin_tok, line_no);
    const auto width = parse_integer<std::uint32_t>(width_tok, line_no);
    if (width == 0) throw ParseError("image width must be at least 1", line_no);
    std::vector<std::uint32_t> bins;
    bins.reserve(std::size_t{width} * width);
    for (std::uint32_t r = 0; r < width; ++r) {
      if (!std::getline(in, text)) throw ParseError("truncated spin image record", line_no + 1);
      ++line_no;
      std::istringstream row(text);
      std::string token;
      std::uint32_t count = 0;
      while (row >> token) {
        bins.push_back(parse_integer<std::uint32_t>(token, line_no));
        ++count;
      }
      if (count != width) {
        throw ParseError("expected " + std::to_string(width) + " bins in row", line_no);
      }
    }
    images.emplace_back(origin, width, std::move(bins));
  }
  return images;
}

}  // namespace spinsched
