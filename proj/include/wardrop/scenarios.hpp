#pragma once

#include <string>

#include "wardrop/errors.hpp"
#include "wardrop/expression.hpp"

namespace wardrop {

/// Source/sink pair: f_minus is where mass starts, f_plus where it ends.
struct Scenario {
  Expression f_plus;
  Expression f_minus;
};

inline Expression gaussian(double width, Vec2 center, double amplitude = 1.0) {
  return Expression(0.0, {GaussianBump{amplitude, width, center}});
}

/// f1, f2: one concentrated source and sink. f3: uniform source, three sharp sinks.
inline Scenario scenario(const std::string& name) {
  if (name == "f1") return {gaussian(40, {0.25, 0.65}), gaussian(40, {0.75, 0.25})};
  if (name == "f2") return {gaussian(40, {0.5, 0.75}), gaussian(40, {0.5, 0.15})};
  if (name == "f3") {
    return {Expression(0.0, {GaussianBump{1, 400, {0.25, 0.75}}, GaussianBump{1, 400, {0.35, 0.15}},
                             GaussianBump{1, 400, {0.85, 0.7}}}),
            Expression(1.0)};
  }
  throw ConfigError("unknown scenario '" + name + "' (known: f1, f2, f3)");
}

/// Named coefficient fields. g1 = 3 - 2 exp(-10 |x - (0.5, 0.5)|^2).
inline Expression weight(const std::string& name) {
  if (name == "g1") return Expression(3.0, {GaussianBump{-2.0, 10.0, {0.5, 0.5}}});
  throw ConfigError("unknown weight '" + name + "' (known: g1)");
}

}  // namespace wardrop
