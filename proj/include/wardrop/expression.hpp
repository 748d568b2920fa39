#pragma once

#include <cmath>
#include <vector>

#include "wardrop/geometry.hpp"

namespace wardrop {

/// amplitude * exp(-width * |x - center|^2)
struct GaussianBump {
  double amplitude = 1.0;
  double width = 1.0;
  Vec2 center;

  double operator()(const Vec2& x) const { return amplitude * std::exp(-width * norm2(x - center)); }
  friend bool operator==(const GaussianBump&, const GaussianBump&) = default;
};

/// Closed-form scalar field: a constant plus a sum of Gaussian bumps.
///
/// This covers every density and coefficient the solver ships with (uniform
/// sources, concentrated sources, and the bump-shaped weight 3 - 2 e^{-10 r^2})
/// while keeping configuration files declarative.
struct Expression {
  double constant = 0.0;
  std::vector<GaussianBump> bumps;

  Expression() = default;
  Expression(double c) : constant(c) {}  // NOLINT: implicit from constant is intended
  Expression(double c, std::vector<GaussianBump> b) : constant(c), bumps(std::move(b)) {}

  double operator()(const Vec2& x) const {
    double v = constant;
    for (const auto& b : bumps) v += b(x);
    return v;
  }

  bool is_constant() const { return bumps.empty(); }
  bool is_zero() const { return constant == 0.0 && bumps.empty(); }

  friend bool operator==(const Expression&, const Expression&) = default;
};

}  // namespace wardrop
