#include <doctest.h>

#include <cmath>

#include "ctraj/obstacles.hpp"
#include "fd_check.hpp"

using ctraj::Vec2;

namespace {

// Finite-difference oracles in the plane.
Vec2 fd_gradient(const ctraj::StarObstacle& o, Vec2 r, double h = 1e-6) {
  const double gx =
      (ctraj::clearance(o, {r.x + h, r.y}) - ctraj::clearance(o, {r.x - h, r.y})) /
      (2.0 * h);
  const double gy =
      (ctraj::clearance(o, {r.x, r.y + h}) - ctraj::clearance(o, {r.x, r.y - h})) /
      (2.0 * h);
  return {gx, gy};
}

ctraj::SymMat2 fd_hessian(const ctraj::StarObstacle& o, Vec2 r, double h = 1e-5) {
  const Vec2 gxp = ctraj::clearance_gradient(o, {r.x + h, r.y});
  const Vec2 gxm = ctraj::clearance_gradient(o, {r.x - h, r.y});
  const Vec2 gyp = ctraj::clearance_gradient(o, {r.x, r.y + h});
  const Vec2 gym = ctraj::clearance_gradient(o, {r.x, r.y - h});
  ctraj::SymMat2 m;
  m.xx = (gxp.x - gxm.x) / (2.0 * h);
  m.yy = (gyp.y - gym.y) / (2.0 * h);
  m.xy = 0.5 * ((gxp.y - gxm.y) + (gyp.x - gym.x)) / (2.0 * h);
  return m;
}

void check_derivatives(const ctraj::StarObstacle& o, Vec2 r, double tol_g = 1e-7,
                       double tol_h = 1e-5) {
  const Vec2 g = ctraj::clearance_gradient(o, r);
  const Vec2 gn = fd_gradient(o, r);
  CHECK(g.x == doctest::Approx(gn.x).epsilon(tol_g).scale(1.0));
  CHECK(g.y == doctest::Approx(gn.y).epsilon(tol_g).scale(1.0));
  const ctraj::SymMat2 m = ctraj::clearance_hessian(o, r);
  const ctraj::SymMat2 mn = fd_hessian(o, r);
  CHECK(m.xx == doctest::Approx(mn.xx).epsilon(tol_h).scale(1.0));
  CHECK(m.xy == doctest::Approx(mn.xy).epsilon(tol_h).scale(1.0));
  CHECK(m.yy == doctest::Approx(mn.yy).epsilon(tol_h).scale(1.0));
}

}  // namespace

TEST_CASE("circle clearance") {
  const auto o = ctraj::make_obstacle({1.0, -2.0}, ctraj::CircleSpec{0.8});
  CHECK(ctraj::clearance(o, {3.0, -2.0}) == doctest::Approx(1.2));
  CHECK(ctraj::clearance(o, {1.0, -1.2}) == doctest::Approx(0.0).scale(1.0));
  CHECK(ctraj::clearance(o, {1.1, -2.0}) == doctest::Approx(-0.7));

  for (const Vec2 r : {Vec2{2.0, -1.0}, Vec2{0.3, -2.4}, Vec2{1.5, -2.6}}) {
    check_derivatives(o, r);
  }
  // Gradient of a circle's clearance is the unit radial direction.
  const Vec2 g = ctraj::clearance_gradient(o, {4.0, 2.0});
  const Vec2 d{3.0, 4.0};
  CHECK(g.x == doctest::Approx(d.x / 5.0).epsilon(1e-12));
  CHECK(g.y == doctest::Approx(d.y / 5.0).epsilon(1e-12));
}

TEST_CASE("query at the center throws") {
  const auto o = ctraj::make_obstacle({0.5, 0.5}, ctraj::CircleSpec{1.0});
  CHECK_THROWS_AS(ctraj::clearance(o, {0.5, 0.5}), ctraj::CenterQueryError);
  CHECK_THROWS_AS(ctraj::clearance_gradient(o, {0.5, 0.5}),
                  ctraj::CenterQueryError);
}

TEST_CASE("ellipse radial function and derivatives") {
  ctraj::EllipseSpec spec;
  spec.semi_x = 2.0;
  spec.semi_y = 0.7;
  spec.rotation = 0.3;
  const auto o = ctraj::make_obstacle({0.0, 0.0}, spec);

  // Boundary points satisfy the implicit ellipse equation in local frame.
  for (double phi = -3.0; phi < 3.2; phi += 0.37) {
    const Vec2 b = o.boundary_point(phi);
    const double c = std::cos(spec.rotation), s = std::sin(spec.rotation);
    const double lx = c * b.x + s * b.y;
    const double ly = -s * b.x + c * b.y;
    const double q = lx * lx / (spec.semi_x * spec.semi_x) +
                     ly * ly / (spec.semi_y * spec.semi_y);
    CHECK(q == doctest::Approx(1.0).epsilon(1e-12));
  }

  // rho derivatives against 1-d finite differences.
  for (double phi = 0.1; phi < 6.3; phi += 0.7) {
    const auto e = o.radial(phi);
    auto rho = [&o](double p) { return o.radial(p).rho; };
    CHECK(e.drho == doctest::Approx(fdcheck::derivative(rho, phi)).epsilon(1e-6));
    CHECK(e.ddrho ==
          doctest::Approx(fdcheck::second_derivative(rho, phi)).epsilon(1e-4));
  }

  for (const Vec2 r : {Vec2{2.5, 0.3}, Vec2{0.4, 1.0}, Vec2{-1.2, -0.6},
                       Vec2{0.5, 0.1}}) {
    check_derivatives(o, r);
  }
}

TEST_CASE("rectangle radial function") {
  ctraj::RectangleSpec spec;
  spec.half_width = 1.5;
  spec.half_height = 0.75;
  spec.rotation = 0.0;
  spec.smoothing = 0.03;
  const auto o = ctraj::make_obstacle({0.0, 0.0}, spec);

  // Away from the smoothed corners the boundary is the exact rectangle side.
  CHECK(o.radial(0.0).rho == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(o.radial(M_PI / 2.0).rho == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(o.radial(M_PI).rho == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(o.radial(-M_PI / 2.0).rho == doctest::Approx(0.75).epsilon(1e-12));
  // On a side, rho = half_width / cos(phi).
  CHECK(o.radial(0.2).rho == doctest::Approx(1.5 / std::cos(0.2)).epsilon(1e-12));

  // C^2 across a corner: rho, drho, ddrho continuous through the blend.
  const double corner = std::atan2(0.75, 1.5);
  auto rho = [&o](double p) { return o.radial(p).rho; };
  for (const double phi :
       {corner - 0.029, corner - 0.01, corner, corner + 0.01, corner + 0.029}) {
    const auto e = o.radial(phi);
    CHECK(e.drho == doctest::Approx(fdcheck::derivative(rho, phi)).epsilon(1e-5));
    CHECK(e.ddrho ==
          doctest::Approx(fdcheck::second_derivative(rho, phi)).epsilon(1e-3));
  }

  // Periodicity.
  const auto a = o.radial(0.4);
  const auto b = o.radial(0.4 + 2.0 * M_PI);
  CHECK(a.rho == doctest::Approx(b.rho).epsilon(1e-12));
  CHECK(a.drho == doctest::Approx(b.drho).epsilon(1e-12));

  for (const Vec2 r : {Vec2{2.0, 0.5}, Vec2{1.0, 0.5}, Vec2{-0.3, 0.9},
                       Vec2{1.4, 0.7}}) {
    check_derivatives(o, r, 1e-6, 1e-4);
  }
}

TEST_CASE("rotated rectangle") {
  ctraj::RectangleSpec spec;
  spec.half_width = 1.0;
  spec.half_height = 0.5;
  spec.rotation = 0.6;
  const auto o = ctraj::make_obstacle({0.3, -0.2}, spec);

  // The midpoint of the +x side sits at distance half_width along the rotated
  // x axis.
  const Vec2 b = o.boundary_point(0.6);
  CHECK(b.x == doctest::Approx(0.3 + std::cos(0.6)).epsilon(1e-12));
  CHECK(b.y == doctest::Approx(-0.2 + std::sin(0.6)).epsilon(1e-12));

  for (const Vec2 r : {Vec2{1.6, 0.4}, Vec2{0.0, 0.8}, Vec2{0.6, -0.1}}) {
    check_derivatives(o, r, 1e-6, 1e-4);
  }
}

TEST_CASE("star polygon") {
  ctraj::StarPolygonSpec spec;
  spec.angles = {0.0, 1.1, 2.4, 3.4, 4.6, 5.5};
  spec.radii = {1.0, 1.6, 0.9, 1.3, 0.8, 1.2};
  spec.smoothing = 0.05;
  const auto o = ctraj::make_obstacle({0.0, 0.0}, spec);

  // Vertices are interpolated exactly outside the blend windows, and the
  // radial function stays positive everywhere.
  for (double phi = 0.0; phi < 2.0 * M_PI; phi += 0.01) {
    CHECK(o.radial(phi).rho > 0.0);
  }

  auto rho = [&o](double p) { return o.radial(p).rho; };
  for (double phi = 0.03; phi < 6.3; phi += 0.217) {
    const auto e = o.radial(phi);
    CHECK(e.drho ==
          doctest::Approx(fdcheck::derivative(rho, phi)).epsilon(1e-5).scale(1.0));
    CHECK(e.ddrho == doctest::Approx(fdcheck::second_derivative(rho, phi))
                         .epsilon(1e-3)
                         .scale(1.0));
  }

  for (const Vec2 r : {Vec2{2.0, 1.0}, Vec2{-0.5, 0.7}, Vec2{0.4, -0.9}}) {
    check_derivatives(o, r, 1e-6, 1e-4);
  }
}

TEST_CASE("invalid shapes are rejected") {
  CHECK_THROWS_AS(ctraj::make_obstacle({0, 0}, ctraj::CircleSpec{-1.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(ctraj::make_obstacle({0, 0}, ctraj::CircleSpec{0.0}),
                  std::invalid_argument);

  ctraj::EllipseSpec bad_e;
  bad_e.semi_x = 0.0;
  CHECK_THROWS_AS(ctraj::make_obstacle({0, 0}, bad_e), std::invalid_argument);

  ctraj::StarPolygonSpec sp;
  sp.angles = {0.0, 1.0};  // only two vertices
  sp.radii = {1.0, 1.0};
  CHECK_THROWS_AS(ctraj::make_obstacle({0, 0}, sp), std::invalid_argument);

  // Vertex gap of pi or more: not star-shaped.
  sp.angles = {0.0, 0.5, 1.0};
  sp.radii = {1.0, 1.0, 1.0};
  CHECK_THROWS_AS(ctraj::make_obstacle({0, 0}, sp), std::invalid_argument);

  // Overlapping smoothing windows.
  ctraj::StarPolygonSpec tight;
  tight.angles = {0.0, 0.05, 2.0, 4.0};
  tight.radii = {1.0, 1.0, 1.0, 1.0};
  tight.smoothing = 0.05;
  CHECK_THROWS_AS(ctraj::make_obstacle({0, 0}, tight), std::invalid_argument);

  // Decreasing angles.
  ctraj::StarPolygonSpec dec;
  dec.angles = {0.0, 2.0, 1.0};
  dec.radii = {1.0, 1.0, 1.0};
  CHECK_THROWS_AS(ctraj::make_obstacle({0, 0}, dec), std::invalid_argument);
}

TEST_CASE("clearance sign convention") {
  ctraj::StarPolygonSpec spec;
  spec.angles = {0.3, 1.8, 3.1, 4.9};
  spec.radii = {1.2, 0.8, 1.5, 1.0};
  spec.smoothing = 0.04;
  const auto o = ctraj::make_obstacle({1.0, 1.0}, spec);

  for (double phi = 0.0; phi < 2.0 * M_PI; phi += 0.05) {
    const Vec2 b = o.boundary_point(phi);
    CHECK(ctraj::clearance(o, b) == doctest::Approx(0.0).scale(1.0));
    const Vec2 inside{1.0 + 0.5 * (b.x - 1.0), 1.0 + 0.5 * (b.y - 1.0)};
    CHECK(ctraj::clearance(o, inside) < 0.0);
    const Vec2 outside{1.0 + 1.5 * (b.x - 1.0), 1.0 + 1.5 * (b.y - 1.0)};
    CHECK(ctraj::clearance(o, outside) > 0.0);
  }
}
