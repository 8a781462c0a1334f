#include "ctraj/fem.hpp"

#include <cmath>
#include <limits>

namespace ctraj {
namespace {

// Cubic Hermite shape functions on xi in [0, 1]; slope modes carry a factor
// h so the coefficients are d/du derivatives.
void hermite(double h, double xi, BasisEval& b) {
  const double x2 = xi * xi;
  const double x3 = x2 * xi;
  b.value = {1.0 - 3.0 * x2 + 2.0 * x3, h * (xi - 2.0 * x2 + x3),
             3.0 * x2 - 2.0 * x3, h * (x3 - x2)};
  const double dv[4] = {-6.0 * xi + 6.0 * x2, h * (1.0 - 4.0 * xi + 3.0 * x2),
                        6.0 * xi - 6.0 * x2, h * (3.0 * x2 - 2.0 * xi)};
  const double ddv[4] = {-6.0 + 12.0 * xi, h * (-4.0 + 6.0 * xi),
                         6.0 - 12.0 * xi, h * (-2.0 + 6.0 * xi)};
  for (int i = 0; i < 4; ++i) {
    b.du[i] = dv[i] / h;
    b.duu[i] = ddv[i] / (h * h);
  }
}

// Singular mode s(xi) = xi^(2/3) (1 - xi)^2 = xi^(2/3) - 2 xi^(5/3) + xi^(8/3).
// It vanishes with zero slope at xi = 1, so the element stays conforming at
// the interior node.
void singular_mode(double xi, double& s, double& ds, double& dds) {
  const double p = std::cbrt(xi * xi);  // xi^(2/3)
  const double q = p / xi;              // xi^(-1/3)
  s = p * (1.0 - xi) * (1.0 - xi);
  ds = (2.0 / 3.0) * q - (10.0 / 3.0) * p + (8.0 / 3.0) * p * xi;
  dds = -(2.0 / 9.0) * q / xi - (20.0 / 9.0) * q + (40.0 / 9.0) * p;
}

}  // namespace

BasisEval element_basis(double h, ElementBasis kind, double xi) {
  BasisEval b;
  hermite(h, xi, b);
  if (kind == ElementBasis::singular_left) {
    double s, ds, dds;
    singular_mode(xi, s, ds, dds);
    b.value[0] = 0.0;
    b.du[0] = 0.0;
    b.duu[0] = 0.0;
    b.value[1] = s;
    b.du[1] = ds / h;
    b.duu[1] = dds / (h * h);
  } else if (kind == ElementBasis::singular_right) {
    double s, ds, dds;
    singular_mode(1.0 - xi, s, ds, dds);
    b.value[2] = 0.0;
    b.du[2] = 0.0;
    b.duu[2] = 0.0;
    b.value[3] = s;
    b.du[3] = -ds / h;
    b.duu[3] = dds / (h * h);
  }
  return b;
}

ElementBasis element_kind(const Mesh& m, bool singular_left, bool singular_right,
                          int element) {
  if (singular_left && element == 0) return ElementBasis::singular_left;
  if (singular_right && element == m.n - 1) return ElementBasis::singular_right;
  return ElementBasis::hermite;
}

FieldSample evaluate_field(const Mesh& m, const FieldCoefficients& f, double u) {
  const double inf = std::numeric_limits<double>::infinity();
  if (f.singular_left && u <= 0.0) {
    const double c = f.c[1];
    const double s = c > 0.0 ? 1.0 : (c < 0.0 ? -1.0 : 0.0);
    return {0.0, s * inf, -s * inf};
  }
  if (f.singular_right && u >= 1.0) {
    const double c = f.c[2 * m.n + 1];
    const double s = c > 0.0 ? 1.0 : (c < 0.0 ? -1.0 : 0.0);
    return {0.0, -s * inf, -s * inf};
  }
  int e;
  double xi;
  m.locate(u, e, xi);
  const BasisEval b =
      element_basis(m.h(), element_kind(m, f.singular_left, f.singular_right, e), xi);
  FieldSample out;
  for (int k = 0; k < 4; ++k) {
    const double ck = f.c[2 * e + k];
    out.value += b.value[k] * ck;
    out.du += b.du[k] * ck;
    out.duu += b.duu[k] * ck;
  }
  return out;
}

Eigen::VectorXd DofLayout::expand(const Eigen::VectorXd& x) const {
  Eigen::VectorXd full(total_slots());
  for (int s = 0; s < total_slots(); ++s) {
    full[s] = free_index[s] >= 0 ? x[free_index[s]] : fixed_value[s];
  }
  return full;
}

Eigen::VectorXd DofLayout::reduce(const Eigen::VectorXd& full) const {
  Eigen::VectorXd x(num_free());
  for (int s = 0; s < total_slots(); ++s) {
    if (free_index[s] >= 0) x[free_index[s]] = full[s];
  }
  return x;
}

DofLayout dof_layout(const PlanningProblem& p, double theta_end) {
  DofLayout d;
  d.n = p.disc.n;
  d.num_points = p.obstacles.empty() ? d.n + 1 : d.n * p.disc.m + d.n + 1;
  d.singular_left = p.start.v == 0.0;
  d.singular_right = p.end.v == 0.0;

  const int slots = d.total_slots();
  d.free_index.assign(slots, 0);
  d.fixed_value.assign(slots, 0.0);

  auto fix = [&](int slot, double value) {
    d.free_index[slot] = -1;
    d.fixed_value[slot] = value;
  };

  fix(d.theta_value(0), p.start.theta);
  fix(d.theta_value(d.n), theta_end);
  if (p.start.kappa == 0.0) fix(d.theta_slope(0), 0.0);
  if (p.end.kappa == 0.0) fix(d.theta_slope(d.n), 0.0);
  fix(d.v_value(0), p.start.v);
  fix(d.v_value(d.n), p.end.v);
  fix(d.pos_x(0), p.start.x);
  fix(d.pos_y(0), p.start.y);
  fix(d.pos_x(d.num_points - 1), p.end.x);
  fix(d.pos_y(d.num_points - 1), p.end.y);

  int next = 0;
  for (int s = 0; s < slots; ++s) {
    if (d.free_index[s] == 0) d.free_index[s] = next++;
  }

  const double inf = std::numeric_limits<double>::infinity();
  d.lower = Eigen::VectorXd::Constant(next, -inf);
  d.upper = Eigen::VectorXd::Constant(next, inf);

  // Nodal speeds stay inside the speed box (the pointwise rows only sample
  // element interiors); so do the singular amplitudes in the boundary slope
  // slots, which must be non-negative.
  for (int i = 0; i <= d.n; ++i) {
    if (const int k = d.free_index[d.v_value(i)]; k >= 0) {
      d.lower[k] = std::max(0.0, p.bounds.speed_min);
      d.upper[k] = p.bounds.speed_max;
    }
  }
  if (d.singular_left) d.lower[d.free_index[d.v_slope(0)]] = 0.0;
  if (d.singular_right) d.lower[d.free_index[d.v_slope(d.n)]] = 0.0;

  // The path cannot be shorter than the straight-line distance (up to a
  // relative slack that keeps the collinear case strictly feasible).
  const double dist = std::hypot(p.end.x - p.start.x, p.end.y - p.start.y);
  const double scale = std::max(dist, M_PI * p.min_turn_radius);
  d.lower[d.free_index[d.lambda_slot()]] =
      dist > 0.0 ? dist * (1.0 - 1e-9) : 1e-6 * scale;

  return d;
}

}  // namespace ctraj
