#pragma once

#include <array>

// Fixed 12-point Gauss-Legendre rule on [0, 1], exact for polynomials up to
// degree 23.  One rule is shared by the element integrals, the position
// increments and the constraint sampling so that every integral in the
// problem is evaluated consistently.

namespace ctraj {

struct QuadratureRule {
  static constexpr int kPoints = 12;
  std::array<double, kPoints> xi{};      // abscissae in (0, 1)
  std::array<double, kPoints> weight{};  // weights summing to 1
};

const QuadratureRule& gauss12();

}  // namespace ctraj
