#pragma once

#include <cmath>

namespace pushrel {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2() = default;
  Vec2(double x_, double y_) : x(x_), y(y_) {}

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2 operator-() const { return {-x, -y}; }
  Vec2& operator+=(Vec2 o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  Vec2& operator-=(Vec2 o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }

  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  // z-component of the 2D cross product.
  double cross(Vec2 o) const { return x * o.y - y * o.x; }
  double norm() const { return std::sqrt(x * x + y * y); }
  double norm_sq() const { return x * x + y * y; }

  // Counter-clockwise perpendicular.
  Vec2 perp() const { return {-y, x}; }

  Vec2 normalized() const {
    double n = norm();
    return n > 0.0 ? Vec2{x / n, y / n} : Vec2{0.0, 0.0};
  }

  Vec2 rotated(double angle) const {
    double c = std::cos(angle), s = std::sin(angle);
    return {c * x - s * y, s * x + c * y};
  }
};

inline Vec2 operator*(double s, Vec2 v) { return v * s; }

}  // namespace pushrel
