#include "ctraj/quadrature.hpp"

namespace ctraj {
namespace {

// Gauss-Legendre abscissae/weights on [-1, 1].
constexpr double kX[6] = {
    0.1252334085114689154724414, 0.3678314989981801937526915,
    0.5873179542866174472967024, 0.7699026741943046870368938,
    0.9041172563704748566784659, 0.9815606342467192506905491,
};
constexpr double kW[6] = {
    0.2491470458134027850005624, 0.2334925365383548087608499,
    0.2031674267230659217490645, 0.1600783285433462263346525,
    0.1069393259953184309602547, 0.0471753363865118271946160,
};

QuadratureRule make_rule() {
  QuadratureRule r;
  for (int i = 0; i < 6; ++i) {
    r.xi[2 * i] = 0.5 * (1.0 - kX[i]);
    r.xi[2 * i + 1] = 0.5 * (1.0 + kX[i]);
    r.weight[2 * i] = 0.5 * kW[i];
    r.weight[2 * i + 1] = 0.5 * kW[i];
  }
  return r;
}

}  // namespace

const QuadratureRule& gauss12() {
  static const QuadratureRule rule = make_rule();
  return rule;
}

}  // namespace ctraj
