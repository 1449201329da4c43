#include "spinsched/geometry.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <string>

#include "spinsched/error.hpp"

namespace spinsched {
namespace {

std::string point_label(std::size_t i) { return "point " + std::to_string(i); }

struct Line {
  std::size_t number;
  std::vector<std::string_view> tokens;
};

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

// Reads the stream into significant lines. '#' starts a comment that runs to
// the end of the line.
class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::optional<Line> next() {
    while (std::getline(in_, buffer_)) {
      ++number_;
      std::string_view view = buffer_;
      if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
      auto tokens = split_ws(view);
      if (!tokens.empty()) return Line{number_, std::move(tokens)};
    }
    return std::nullopt;
  }

  std::size_t line_number() const { return number_; }

 private:
  std::istream& in_;
  std::string buffer_;
  std::size_t number_ = 0;
};

double parse_real(std::string_view token, std::size_t line) {
  double value = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (!token.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    throw ParseError("expected a real number, got '" + std::string(token) + "'", line);
  }
  return value;
}

std::size_t parse_count(std::string_view token, std::size_t line) {
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size()) {
    throw ParseError("expected a non-negative integer, got '" + std::string(token) + "'", line);
  }
  return value;
}

// Doubles in [0, 1) built from the top 53 bits, independent of the standard
// library's distribution implementations.
class UnitRandom {
 public:
  explicit UnitRandom(std::uint64_t seed) : engine_(seed) {}
  double operator()() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

Vec3 random_unit(UnitRandom& rng) {
  const double z = 2.0 * rng() - 1.0;
  const double phi = 2.0 * std::numbers::pi * rng();
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {r * std::cos(phi), r * std::sin(phi), z};
}

}  // namespace

PointCloud::PointCloud(std::vector<OrientedPoint> points) : points_(std::move(points)) {
  if (points_.empty()) throw ValidationError("point cloud is empty");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto& p = points_[i];
    if (!is_finite(p.position) || !is_finite(p.normal)) {
      throw ValidationError(point_label(i) + " has a non-finite coordinate");
    }
    if (std::abs(norm(p.normal) - 1.0) > kUnitNormalTolerance) {
      throw ValidationError(point_label(i) + " normal is not unit length");
    }
  }
}

void normalize_normals(std::span<OrientedPoint> points) {
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto& n = points[i].normal;
    const double len = norm(n);
    if (!std::isfinite(len) || len == 0.0) {
      throw ValidationError(point_label(i) + " has a zero-length normal that cannot be normalized");
    }
    // Already-unit normals are kept bit-exact so write/read round trips are lossless.
    if (std::abs(len - 1.0) > kUnitNormalTolerance) n = n / len;
  }
}

CloudFormat parse_cloud_format(std::string_view name) {
  if (name == "xyzn") return CloudFormat::kXyzn;
  if (name == "off") return CloudFormat::kOff;
  throw UsageError("unknown cloud format '" + std::string(name) + "' (expected xyzn or off)");
}

PointCloud read_xyzn(std::istream& in) {
  LineReader reader(in);
  std::vector<OrientedPoint> points;
  while (auto line = reader.next()) {
    if (line->tokens.size() != 6) {
      throw ParseError("expected 6 values, got " + std::to_string(line->tokens.size()),
                       line->number);
    }
    double v[6];
    for (int k = 0; k < 6; ++k) v[k] = parse_real(line->tokens[k], line->number);
    points.push_back({{v[0], v[1], v[2]}, {v[3], v[4], v[5]}});
  }
  if (points.empty()) throw ValidationError("point cloud is empty");
  normalize_normals(points);
  return PointCloud(std::move(points));
}

PointCloud read_off(std::istream& in) {
  LineReader reader(in);
  auto header = reader.next();
  if (!header || header->tokens.front() != "OFF") {
    throw ParseError("missing OFF header", header ? header->number : reader.line_number());
  }
  // Counts may share the header line ("OFF 8 12 0").
  std::vector<std::string_view> counts(header->tokens.begin() + 1, header->tokens.end());
  std::size_t counts_line = header->number;
  std::optional<Line> counts_storage;
  if (counts.empty()) {
    counts_storage = reader.next();
    if (!counts_storage) throw ParseError("missing vertex/face count line", reader.line_number());
    counts = counts_storage->tokens;
    counts_line = counts_storage->number;
  }
  if (counts.size() < 2) throw ParseError("expected vertex and face counts", counts_line);
  const std::size_t nv = parse_count(counts[0], counts_line);
  const std::size_t nf = parse_count(counts[1], counts_line);
  if (nv == 0) throw ValidationError("point cloud is empty");

  std::vector<Vec3> vertices;
  vertices.reserve(nv);
  for (std::size_t i = 0; i < nv; ++i) {
    auto line = reader.next();
    if (!line) throw ParseError("unexpected end of file in vertex list", reader.line_number());
    if (line->tokens.size() < 3) throw ParseError("vertex needs 3 coordinates", line->number);
    vertices.push_back({parse_real(line->tokens[0], line->number),
                        parse_real(line->tokens[1], line->number),
                        parse_real(line->tokens[2], line->number)});
  }

  std::vector<Face> faces;
  faces.reserve(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    auto line = reader.next();
    if (!line) throw ParseError("unexpected end of file in face list", reader.line_number());
    const auto& t = line->tokens;
    if (parse_count(t[0], line->number) != 3 || t.size() < 4) {
      throw ParseError("only triangular faces are supported", line->number);
    }
    Face face{};
    for (int k = 0; k < 3; ++k) {
      face[k] = parse_count(t[k + 1], line->number);
      if (face[k] >= nv) throw ParseError("face index out of range", line->number);
    }
    faces.push_back(face);
  }

  auto normals = compute_vertex_normals(vertices, faces);
  std::vector<OrientedPoint> points(nv);
  for (std::size_t i = 0; i < nv; ++i) points[i] = {vertices[i], normals[i]};
  return PointCloud(std::move(points));
}

PointCloud load_point_cloud(const std::filesystem::path& path, CloudFormat format) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return format == CloudFormat::kXyzn ? read_xyzn(in) : read_off(in);
}

void write_xyzn(std::ostream& out, const PointCloud& cloud) {
  char buf[256];
  for (const auto& p : cloud) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g %.17g %.17g %.17g\n", p.position.x,
                  p.position.y, p.position.z, p.normal.x, p.normal.y, p.normal.z);
    out << buf;
  }
}

std::vector<Vec3> compute_vertex_normals(std::span<const Vec3> vertices,
                                         std::span<const Face> faces) {
  std::vector<Vec3> sums(vertices.size());
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const auto& face = faces[f];
    for (auto idx : face) {
      if (idx >= vertices.size()) {
        throw ValidationError("face " + std::to_string(f) + " references missing vertex " +
                              std::to_string(idx));
      }
    }
    const Vec3 a = vertices[face[0]];
    const Vec3 n = cross(vertices[face[1]] - a, vertices[face[2]] - a);
    if (dot(n, n) == 0.0) continue;  // degenerate
    for (auto idx : face) sums[idx] += n;
  }
  for (std::size_t i = 0; i < sums.size(); ++i) {
    const double len = norm(sums[i]);
    if (len == 0.0 || !std::isfinite(len)) {
      throw ValidationError("vertex " + std::to_string(i) + " has no incident face to define a normal");
    }
    sums[i] = sums[i] / len;
  }
  return sums;
}

SynthKind parse_synth_kind(std::string_view name) {
  if (name == "sphere") return SynthKind::kSphere;
  if (name == "torus") return SynthKind::kTorus;
  if (name == "uniform_box") return SynthKind::kUniformBox;
  throw UsageError("unknown synthetic cloud kind '" + std::string(name) +
                   "' (expected sphere, torus or uniform_box)");
}

PointCloud synth_cloud(SynthKind kind, std::size_t count, std::uint64_t seed) {
  if (count == 0) throw ValidationError("synthetic cloud needs at least one point");
  UnitRandom rng(seed);
  std::vector<OrientedPoint> points(count);
  for (auto& p : points) {
    switch (kind) {
      case SynthKind::kSphere: {
        p.position = random_unit(rng);
        p.normal = p.position / norm(p.position);
        break;
      }
      case SynthKind::kTorus: {
        const double u = 2.0 * std::numbers::pi * rng();
        const double v = 2.0 * std::numbers::pi * rng();
        const double ring = kTorusMajorRadius + kTorusMinorRadius * std::cos(v);
        p.position = {ring * std::cos(u), ring * std::sin(u), kTorusMinorRadius * std::sin(v)};
        const Vec3 n{std::cos(v) * std::cos(u), std::cos(v) * std::sin(u), std::sin(v)};
        p.normal = n / norm(n);
        break;
      }
      case SynthKind::kUniformBox: {
        p.position = {2.0 * rng() - 1.0, 2.0 * rng() - 1.0, 2.0 * rng() - 1.0};
        const Vec3 n = random_unit(rng);
        p.normal = n / norm(n);
        break;
      }
    }
  }
  return PointCloud(std::move(points));
}

}  // namespace spinsched
