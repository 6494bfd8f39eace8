#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace nesa {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

inline Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
inline Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }

inline double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// x(t) = t, y(t) = amplitude * sin(2 pi frequency t), t in [0, length],
/// sampled at the midpoints t_i = length * (i - 1/2) / n.
struct WaveCurve {
  double amplitude = 0.35;
  double frequency = 1.5;
  double length = 4.0;
};

/// n points uniformly spaced in angle on a circle centered at the origin,
/// first point at angle 0.
struct CircleCurve {
  double radius = 1.0;
};

/// Uniform-by-area random points in an annulus centered at the origin.
/// Point i draws two values from a SplitMix64 counter stream:
/// u = draw(seed, 2i), v = draw(seed, 2i + 1); r = sqrt(r_in^2 + u (r_out^2 - r_in^2)),
/// theta = 2 pi v.
struct AnnulusRandom {
  double inner_radius = 1.0;
  double outer_radius = 2.0;
  std::uint64_t seed = 0;
};

using CurveSpec = std::variant<WaveCurve, CircleCurve, AnnulusRandom>;

struct BBox {
  Point2 min;
  Point2 max;

  double width() const { return max.x - min.x; }
  double height() const { return max.y - min.y; }
  double longest_extent() const { return std::max(width(), height()); }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based uniform draw in [0, 1): element `counter` of the stream `seed`.
inline double counter_uniform(std::uint64_t seed, std::uint64_t counter) {
  const std::uint64_t bits = splitmix64(splitmix64(seed) ^ (counter * 0xd1b54a32d192ed03ULL));
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

inline void check_distinct(std::span<const Point2> points) {
  std::vector<Point2> sorted(points.begin(), points.end());
  std::sort(sorted.begin(), sorted.end(), [](Point2 a, Point2 b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw std::runtime_error("coincident points");
  }
}

}  // namespace detail

inline void validate(const CurveSpec& spec) {
  std::visit(
      [](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, WaveCurve>) {
          if (!(c.amplitude > 0.0)) throw std::invalid_argument("wave amplitude must be > 0");
          if (!(c.frequency >= 0.0) || !std::isfinite(c.frequency)) {
            throw std::invalid_argument("wave frequency must be finite and >= 0");
          }
          if (!(c.length > 0.0)) throw std::invalid_argument("wave length must be > 0");
        } else if constexpr (std::is_same_v<T, CircleCurve>) {
          if (!(c.radius > 0.0)) throw std::invalid_argument("circle radius must be > 0");
        } else {
          if (!(c.inner_radius >= 0.0) || !(c.inner_radius < c.outer_radius) ||
              !std::isfinite(c.outer_radius)) {
            throw std::invalid_argument("annulus requires 0 <= inner radius < outer radius");
          }
        }
      },
      spec);
}

inline std::vector<Point2> generate_sources(const CurveSpec& spec, std::size_t n) {
  if (n < 2) throw std::invalid_argument("generate_sources: need at least 2 points");
  validate(spec);

  std::vector<Point2> points(n);
  const double dn = static_cast<double>(n);
  std::visit(
      [&](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        for (std::size_t i = 0; i < n; ++i) {
          const double di = static_cast<double>(i);
          if constexpr (std::is_same_v<T, WaveCurve>) {
            const double t = c.length * (di + 0.5) / dn;
            points[i] = {t, c.amplitude * std::sin(2.0 * std::numbers::pi * c.frequency * t)};
          } else if constexpr (std::is_same_v<T, CircleCurve>) {
            const double theta = 2.0 * std::numbers::pi * di / dn;
            points[i] = {c.radius * std::cos(theta), c.radius * std::sin(theta)};
          } else {
            const double u = detail::counter_uniform(c.seed, 2 * i);
            const double v = detail::counter_uniform(c.seed, 2 * i + 1);
            const double r2in = c.inner_radius * c.inner_radius;
            const double r2out = c.outer_radius * c.outer_radius;
            const double r = std::clamp(std::sqrt(r2in + u * (r2out - r2in)), c.inner_radius,
                                        c.outer_radius);
            const double theta = 2.0 * std::numbers::pi * v;
            points[i] = {r * std::cos(theta), r * std::sin(theta)};
          }
        }
      },
      spec);

  if (std::holds_alternative<AnnulusRandom>(spec)) detail::check_distinct(points);
  return points;
}

inline BBox bounding_box(std::span<const Point2> points) {
  if (points.empty()) throw std::invalid_argument("bounding_box: empty point list");
  BBox box{points.front(), points.front()};
  for (const Point2& p : points) {
    box.min.x = std::min(box.min.x, p.x);
    box.min.y = std::min(box.min.y, p.y);
    box.max.x = std::max(box.max.x, p.x);
    box.max.y = std::max(box.max.y, p.y);
  }
  return box;
}

/// Parses "wave[:A:f]", "circle[:r]" or "annulus[:r_in:r_out]".
inline CurveSpec parse_curve(const std::string& text, std::uint64_t seed) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto colon = text.find(':', start);
    parts.push_back(text.substr(start, colon - start));
    if (colon == std::string::npos) break;
    start = colon + 1;
  }
  auto num = [&](std::size_t i, double fallback) {
    return i < parts.size() ? std::stod(parts[i]) : fallback;
  };
  const std::string& kind = parts.front();
  CurveSpec spec;
  if (kind == "wave" && parts.size() <= 3) {
    spec = WaveCurve{num(1, 0.35), num(2, 1.5), 4.0};
  } else if (kind == "circle" && parts.size() <= 2) {
    spec = CircleCurve{num(1, 1.0)};
  } else if ((kind == "annulus" || kind == "annulus-random") && parts.size() <= 3) {
    spec = AnnulusRandom{num(1, 1.0), num(2, 2.0), seed};
  } else {
    throw std::invalid_argument("unknown curve spec: " + text);
  }
  validate(spec);
  return spec;
}

inline std::string curve_name(const CurveSpec& spec) {
  switch (spec.index()) {
    case 0: return "wave";
    case 1: return "circle";
    default: return "annulus-random";
  }
}

}  // namespace nesa
