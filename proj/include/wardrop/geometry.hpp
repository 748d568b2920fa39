#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <variant>
#include <vector>

namespace wardrop {

/// Point or vector in the plane.
struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
  constexpr Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }
  constexpr Vec2& operator*=(double s) { x *= s; y *= s; return *this; }

  friend constexpr Vec2 operator+(Vec2 a, const Vec2& b) { return a += b; }
  friend constexpr Vec2 operator-(Vec2 a, const Vec2& b) { return a -= b; }
  friend constexpr Vec2 operator-(const Vec2& a) { return {-a.x, -a.y}; }
  friend constexpr Vec2 operator*(double s, Vec2 a) { return a *= s; }
  friend constexpr Vec2 operator*(Vec2 a, double s) { return a *= s; }
  friend constexpr Vec2 operator/(Vec2 a, double s) { return {a.x / s, a.y / s}; }
  friend constexpr bool operator==(const Vec2&, const Vec2&) = default;
};

constexpr double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Vec2& a) { return std::hypot(a.x, a.y); }
constexpr double norm2(const Vec2& a) { return dot(a, a); }

/// Symmetric 2x2 matrix [[xx, xy], [xy, yy]].
struct Sym2 {
  double xx = 0.0;
  double xy = 0.0;
  double yy = 0.0;

  constexpr Vec2 operator*(const Vec2& v) const { return {xx * v.x + xy * v.y, xy * v.x + yy * v.y}; }
  constexpr double det() const { return xx * yy - xy * xy; }

  /// Solves (*this) s = rhs. Requires a nonsingular matrix.
  Vec2 solve(const Vec2& rhs) const {
    const double d = det();
    if (d == 0.0 || !std::isfinite(d)) throw std::domain_error("singular 2x2 system");
    return {(yy * rhs.x - xy * rhs.y) / d, (xx * rhs.y - xy * rhs.x) / d};
  }
};

/// Axis-aligned rectangle [xmin, xmax] x [ymin, ymax].
struct Rect {
  double xmin = 0.0;
  double xmax = 1.0;
  double ymin = 0.0;
  double ymax = 1.0;

  constexpr double width() const { return xmax - xmin; }
  constexpr double height() const { return ymax - ymin; }
  constexpr double area() const { return width() * height(); }
  constexpr bool contains(const Vec2& p) const {
    return p.x >= xmin && p.x <= xmax && p.y >= ymin && p.y <= ymax;
  }
  constexpr bool strictly_contains(const Vec2& p) const {
    return p.x > xmin && p.x < xmax && p.y > ymin && p.y < ymax;
  }
  friend constexpr bool operator==(const Rect&, const Rect&) = default;
};

struct Disc {
  Vec2 center;
  double radius = 0.0;
  friend constexpr bool operator==(const Disc&, const Disc&) = default;
};

/// Region removed from the computational domain.
struct Obstacle {
  std::variant<Rect, Disc> shape;

  friend bool operator==(const Obstacle&, const Obstacle&) = default;

  /// Open-set membership.
  bool contains(const Vec2& p) const {
    if (const auto* r = std::get_if<Rect>(&shape)) return r->strictly_contains(p);
    const auto& d = std::get<Disc>(shape);
    return norm2(p - d.center) < d.radius * d.radius;
  }

  /// True if the closed segment [a, b] meets the interior of the obstacle.
  bool intersects_segment(const Vec2& a, const Vec2& b) const {
    if (const auto* r = std::get_if<Rect>(&shape)) {
      // Liang-Barsky clipping against the open rectangle.
      double t0 = 0.0, t1 = 1.0;
      const Vec2 d = b - a;
      const double p[4] = {-d.x, d.x, -d.y, d.y};
      const double q[4] = {a.x - r->xmin, r->xmax - a.x, a.y - r->ymin, r->ymax - a.y};
      for (int i = 0; i < 4; ++i) {
        if (p[i] == 0.0) {
          if (q[i] <= 0.0) return false;
          continue;
        }
        const double t = q[i] / p[i];
        if (p[i] < 0.0) t0 = std::max(t0, t);
        else t1 = std::min(t1, t);
        if (t0 > t1) return false;
      }
      if (t0 == t1) return false;
      // Touching the boundary only: the clipped midpoint must be strictly inside.
      return contains(a + (0.5 * (t0 + t1)) * d);
    }
    const auto& disc = std::get<Disc>(shape);
    const Vec2 d = b - a;
    const double len2 = norm2(d);
    double t = len2 > 0.0 ? dot(disc.center - a, d) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return norm2(a + t * d - disc.center) < disc.radius * disc.radius;
  }

  /// True if the obstacle lies strictly inside the rectangle.
  bool strictly_inside(const Rect& domain) const {
    if (const auto* r = std::get_if<Rect>(&shape)) {
      return r->xmin > domain.xmin && r->xmax < domain.xmax && r->ymin > domain.ymin &&
             r->ymax < domain.ymax && r->xmin < r->xmax && r->ymin < r->ymax;
    }
    const auto& d = std::get<Disc>(shape);
    return d.radius > 0.0 && d.center.x - d.radius > domain.xmin &&
           d.center.x + d.radius < domain.xmax && d.center.y - d.radius > domain.ymin &&
           d.center.y + d.radius < domain.ymax;
  }
};

inline bool inside_any(const std::vector<Obstacle>& obstacles, const Vec2& p) {
  return std::any_of(obstacles.begin(), obstacles.end(),
                     [&](const Obstacle& o) { return o.contains(p); });
}

}  // namespace wardrop
