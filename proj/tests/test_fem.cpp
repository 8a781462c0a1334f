#include <doctest.h>

#include <cmath>
#include <vector>

#include "ctraj/fem.hpp"
#include "ctraj/obstacles.hpp"
#include "ctraj/quadrature.hpp"

using ctraj::ElementBasis;

TEST_CASE("gauss rule integrates high-degree polynomials exactly") {
  const auto& q = ctraj::gauss12();
  for (int k = 0; k <= 23; ++k) {
    double acc = 0.0;
    for (int i = 0; i < ctraj::QuadratureRule::kPoints; ++i) {
      acc += q.weight[i] * std::pow(q.xi[i], k);
    }
    CHECK(acc == doctest::Approx(1.0 / (k + 1)).epsilon(1e-13));
  }
}

TEST_CASE("mesh locate") {
  ctraj::Mesh m{8};
  int e;
  double xi;
  m.locate(0.0, e, xi);
  CHECK(e == 0);
  CHECK(xi == doctest::Approx(0.0));
  m.locate(1.0, e, xi);
  CHECK(e == 7);
  CHECK(xi == doctest::Approx(1.0));
  m.locate(0.3, e, xi);
  CHECK(e == 2);
  CHECK(xi == doctest::Approx(0.4));
}

TEST_CASE("hermite basis reproduces cubics") {
  const double h = 0.125;
  auto f = [](double u) { return 2.0 + 3.0 * u - u * u + 0.5 * u * u * u; };
  auto df = [](double u) { return 3.0 - 2.0 * u + 1.5 * u * u; };
  auto ddf = [](double u) { return -2.0 + 3.0 * u; };

  const double u0 = 0.375;  // element start
  const double c[4] = {f(u0), df(u0), f(u0 + h), df(u0 + h)};
  for (double xi = 0.0; xi <= 1.0; xi += 0.1) {
    const auto b = ctraj::element_basis(h, ElementBasis::hermite, xi);
    double val = 0.0, du = 0.0, duu = 0.0;
    for (int i = 0; i < 4; ++i) {
      val += c[i] * b.value[i];
      du += c[i] * b.du[i];
      duu += c[i] * b.duu[i];
    }
    const double u = u0 + xi * h;
    CHECK(val == doctest::Approx(f(u)).epsilon(1e-12));
    CHECK(du == doctest::Approx(df(u)).epsilon(1e-11));
    CHECK(duu == doctest::Approx(ddf(u)).epsilon(1e-10));
  }
}

TEST_CASE("basis derivatives match finite differences") {
  const double h = 0.0625;
  const double d = 1e-6;
  for (const auto kind : {ElementBasis::hermite, ElementBasis::singular_left,
                          ElementBasis::singular_right}) {
    for (const double xi : {0.15, 0.4, 0.75}) {
      const auto b = ctraj::element_basis(h, kind, xi);
      const auto bp = ctraj::element_basis(h, kind, xi + d);
      const auto bm = ctraj::element_basis(h, kind, xi - d);
      for (int i = 0; i < 4; ++i) {
        const double du_fd = (bp.value[i] - bm.value[i]) / (2.0 * d * h);
        const double duu_fd = (bp.du[i] - bm.du[i]) / (2.0 * d * h);
        CHECK(b.du[i] == doctest::Approx(du_fd).epsilon(1e-6).scale(1.0));
        CHECK(b.duu[i] == doctest::Approx(duu_fd).epsilon(1e-5).scale(1.0));
      }
    }
  }
}

TEST_CASE("singular mode shape") {
  const double h = 1.0 / 32.0;

  SUBCASE("left element") {
    for (const double xi : {0.01, 0.2, 0.6, 0.95}) {
      const auto b = ctraj::element_basis(h, ElementBasis::singular_left, xi);
      CHECK(b.value[0] == 0.0);  // boundary value mode removed
      const double s = std::pow(xi, 2.0 / 3.0) * (1.0 - xi) * (1.0 - xi);
      CHECK(b.value[1] == doctest::Approx(s).epsilon(1e-13));
    }
    // Conformity: the singular mode vanishes to first order at the interior
    // node, so cross-element continuity is untouched.
    const auto b1 = ctraj::element_basis(h, ElementBasis::singular_left, 1.0);
    CHECK(b1.value[1] == doctest::Approx(0.0).scale(1.0));
    CHECK(b1.du[1] == doctest::Approx(0.0).scale(1.0));
    CHECK(b1.value[2] == doctest::Approx(1.0));
  }

  SUBCASE("right element mirrors the left one") {
    for (const double xi : {0.05, 0.3, 0.8}) {
      const auto l = ctraj::element_basis(h, ElementBasis::singular_left, xi);
      const auto r =
          ctraj::element_basis(h, ElementBasis::singular_right, 1.0 - xi);
      CHECK(r.value[3] == doctest::Approx(l.value[1]).epsilon(1e-13));
      CHECK(r.du[3] == doctest::Approx(-l.du[1]).epsilon(1e-12));
      CHECK(r.duu[3] == doctest::Approx(l.duu[1]).epsilon(1e-12));
      CHECK(r.value[2] == 0.0);
    }
  }
}

TEST_CASE("field evaluation is continuous across a singular element boundary") {
  ctraj::Mesh m{16};
  ctraj::FieldCoefficients f;
  f.singular_left = true;
  f.c = Eigen::VectorXd::Zero(2 * 17);
  f.c[0] = 0.0;   // boundary value must stay 0
  f.c[1] = 0.8;   // singular amplitude
  f.c[2] = 0.6;   // interior node value and slope
  f.c[3] = -0.4;
  f.c[4] = 0.55;
  f.c[5] = 0.2;

  const double h = m.h();
  const double eps = 1e-10;
  const auto left = ctraj::evaluate_field(m, f, h * (1.0 - eps));
  const auto right = ctraj::evaluate_field(m, f, h * (1.0 + eps));
  CHECK(left.value == doctest::Approx(right.value).epsilon(1e-7));
  CHECK(left.du == doctest::Approx(right.du).epsilon(1e-5));

  // Exact node evaluation picks the interior element.
  const auto node = ctraj::evaluate_field(m, f, h);
  CHECK(node.value == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(node.du == doctest::Approx(-0.4).epsilon(1e-12));
}

TEST_CASE("singular field takes off with exponent two thirds") {
  ctraj::Mesh m{32};
  ctraj::FieldCoefficients f;
  f.singular_left = true;
  f.c = Eigen::VectorXd::Zero(2 * 33);
  f.c[1] = 1.3;

  // Least-squares slope of log v against log u inside the first element.
  std::vector<double> lx, ly;
  for (double xi = 1e-3; xi <= 0.05; xi *= 1.15) {
    const double u = xi * m.h();
    const auto s = ctraj::evaluate_field(m, f, u);
    lx.push_back(std::log(u));
    ly.push_back(std::log(s.value));
  }
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= lx.size();
  my /= lx.size();
  double sxx = 0.0, sxy = 0.0;
  for (size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  CHECK(sxy / sxx == doctest::Approx(2.0 / 3.0).epsilon(0.05));

  // Exactly at the endpoint: value 0, unbounded slope with the amplitude's
  // sign.
  const auto end = ctraj::evaluate_field(m, f, 0.0);
  CHECK(end.value == 0.0);
  CHECK(std::isinf(end.du));
  CHECK(end.du > 0.0);
}

TEST_CASE("dof layout for standard boundary conditions") {
  ctraj::PlanningProblem p;
  p.start = {0.0, 0.0, 0.0, 0.0, 1.0, 0.0};
  p.end = {5.0, 1.0, 0.0, 0.0, 1.0, 0.0};

  const auto lay = ctraj::dof_layout(p, p.end.theta);
  CHECK(lay.n == 32);
  CHECK(lay.num_points == 33);
  CHECK(lay.total_slots() == 199);
  CHECK(lay.num_free() == 189);
  CHECK_FALSE(lay.singular_left);
  CHECK_FALSE(lay.singular_right);

  // Fixed slots carry the imposed values.
  CHECK(lay.free_index[lay.theta_value(0)] == -1);
  CHECK(lay.fixed_value[lay.theta_value(0)] == doctest::Approx(0.0));
  CHECK(lay.free_index[lay.v_value(0)] == -1);
  CHECK(lay.fixed_value[lay.v_value(0)] == doctest::Approx(1.0));
  CHECK(lay.free_index[lay.theta_slope(0)] == -1);  // zero end curvature
  CHECK(lay.free_index[lay.v_slope(0)] >= 0);       // coupled, not fixed
  CHECK(lay.free_index[lay.pos_x(0)] == -1);
  CHECK(lay.fixed_value[lay.pos_x(32)] == doctest::Approx(5.0));

  // The unwrapped target heading is what gets imposed.
  const auto lay2 = ctraj::dof_layout(p, p.end.theta + 2.0 * M_PI);
  CHECK(lay2.fixed_value[lay2.theta_value(32)] ==
        doctest::Approx(2.0 * M_PI));

  // Nonzero end curvature frees the heading slope (a coupling row takes
  // over).
  p.start.kappa = 0.5;
  const auto lay3 = ctraj::dof_layout(p, p.end.theta);
  CHECK(lay3.num_free() == 190);
  CHECK(lay3.free_index[lay3.theta_slope(0)] >= 0);
}

TEST_CASE("dof layout with zero-speed ends") {
  ctraj::PlanningProblem p;
  p.start = {0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  p.end = {0.0, -4.0, 0.0, 0.0, 0.0, 0.0};

  const auto lay = ctraj::dof_layout(p, p.end.theta);
  CHECK(lay.singular_left);
  CHECK(lay.singular_right);
  CHECK(lay.num_free() == 189);
  CHECK(lay.free_index[lay.v_value(0)] == -1);
  CHECK(lay.fixed_value[lay.v_value(0)] == doctest::Approx(0.0));
  // Amplitude slots are free and kept non-negative.
  const int amp = lay.free_index[lay.v_slope(0)];
  REQUIRE(amp >= 0);
  CHECK(lay.lower[amp] == doctest::Approx(0.0));

  // Path length can never drop below the endpoint distance.
  const int ls = lay.free_index[lay.lambda_slot()];
  REQUIRE(ls >= 0);
  CHECK(lay.lower[ls] == doctest::Approx(4.0).epsilon(1e-6));
}

TEST_CASE("dof layout with obstacles densifies the position points") {
  ctraj::PlanningProblem p;
  p.start = {0.0, 0.0, 0.0, 0.0, 1.0, 0.0};
  p.end = {5.0, 1.0, 0.0, 0.0, 1.0, 0.0};
  p.obstacles.push_back(
      ctraj::make_obstacle({2.5, 3.0}, ctraj::CircleSpec{0.5}));

  const auto lay = ctraj::dof_layout(p, p.end.theta);
  CHECK(lay.num_points == 32 * 20 + 33);
  CHECK(lay.total_slots() == 4 * 33 + 1 + 2 * 673);
}

TEST_CASE("expand and reduce are inverse on the free slots") {
  ctraj::PlanningProblem p;
  p.start = {0.0, 0.0, 0.3, 0.0, 1.0, 0.2};
  p.end = {5.0, 1.0, -0.4, 0.0, 0.8, 0.0};
  const auto lay = ctraj::dof_layout(p, p.end.theta);

  Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(lay.num_free(), -1.0, 2.0);
  const Eigen::VectorXd full = lay.expand(x);
  REQUIRE(full.size() == lay.total_slots());
  CHECK(full[lay.theta_value(0)] == doctest::Approx(0.3));
  CHECK(full[lay.v_value(lay.n)] == doctest::Approx(0.8));
  const Eigen::VectorXd back = lay.reduce(full);
  CHECK((back - x).lpNorm<Eigen::Infinity>() == doctest::Approx(0.0));
}
