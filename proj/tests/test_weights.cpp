#include <doctest.h>

#include <cmath>

#include "ctraj/weights.hpp"

namespace {

// Simpson integration, fine enough that the discretization error is far
// below the checked tolerances.
double integrate(const std::function<double(double)>& f, double a, double b,
                 int panels = 4000) {
  const double h = (b - a) / panels;
  double acc = f(a) + f(b);
  for (int i = 1; i < panels; ++i) acc += (i % 2 == 1 ? 4.0 : 2.0) * f(a + i * h);
  return acc * h / 3.0;
}

}  // namespace

TEST_CASE("characteristic scales") {
  ctraj::PlanningProblem p;
  p.start = {0.0, 0.0, 0.0, 0.0, 1.0, 0.0};
  p.end = {3.0, 4.0, 0.0, 0.0, 1.0, 0.0};
  p.bounds.speed_max = 2.5;
  p.min_turn_radius = 0.55;

  auto s = ctraj::characteristic_scales(p);
  CHECK(s.length == doctest::Approx(5.0));  // distance dominates pi * 0.55
  CHECK(s.speed == doctest::Approx(2.5));

  // Short hop: the turning scale takes over.
  p.end = {0.1, 0.0, 0.0, 0.0, 1.0, 0.0};
  s = ctraj::characteristic_scales(p);
  CHECK(s.length == doctest::Approx(M_PI * 0.55));
}

TEST_CASE("base weight formula") {
  ctraj::CharacteristicScales s;
  s.length = 2.0;
  s.speed = 3.0;
  const double expected =
      (225.0 / 2048.0) * (225.0 / 2048.0) * 16.0 / 729.0;
  CHECK(ctraj::base_weight(s) == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("effective weights scale with the factors") {
  ctraj::WeightFactors f;
  f.f_t = 4.0;
  f.f_n = 0.25;
  const auto w = ctraj::effective_weights(0.01, f);
  CHECK(w.w_t == doctest::Approx(0.04));
  CHECK(w.w_n == doctest::Approx(0.0025));
}

TEST_CASE("quintic reference profile") {
  const double L = 1.7;
  const double w = 3e-3;
  const auto q = ctraj::quintic_reference(L, w);

  SUBCASE("boundary conditions") {
    CHECK(q.position(0.0) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(q.position(q.tau) == doctest::Approx(L).epsilon(1e-12));
    CHECK(q.speed(0.0) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(q.speed(q.tau) == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(q.acceleration(0.0) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(q.acceleration(q.tau) == doctest::Approx(0.0).epsilon(1e-9));
  }

  SUBCASE("derivative consistency") {
    const double h = 1e-6 * q.tau;
    for (const double t : {0.2 * q.tau, 0.5 * q.tau, 0.8 * q.tau}) {
      const double v_fd = (q.position(t + h) - q.position(t - h)) / (2.0 * h);
      const double a_fd = (q.speed(t + h) - q.speed(t - h)) / (2.0 * h);
      const double j_fd =
          (q.acceleration(t + h) - q.acceleration(t - h)) / (2.0 * h);
      CHECK(q.speed(t) == doctest::Approx(v_fd).epsilon(1e-7));
      CHECK(q.acceleration(t) == doctest::Approx(a_fd).epsilon(1e-7));
      CHECK(q.jerk(t) == doctest::Approx(j_fd).epsilon(1e-6));
    }
  }

  SUBCASE("peak speed sits at midtime") {
    CHECK(q.peak_speed == doctest::Approx(q.speed(0.5 * q.tau)).epsilon(1e-12));
    CHECK(q.peak_speed == doctest::Approx(15.0 * L / (8.0 * q.tau)).epsilon(1e-12));
  }

  SUBCASE("discomfort closed form matches direct integration") {
    const double jerk_term =
        integrate([&](double t) { return q.jerk(t) * q.jerk(t); }, 0.0, q.tau);
    CHECK(q.discomfort ==
          doctest::Approx(q.tau + w * jerk_term).epsilon(1e-8));
    CHECK(q.discomfort ==
          doctest::Approx(q.tau + 720.0 * L * L * w / std::pow(q.tau, 5))
              .epsilon(1e-12));
  }

  SUBCASE("tau minimises the duration family") {
    auto J = [&](double tau) {
      return tau + 720.0 * L * L * w / std::pow(tau, 5);
    };
    const double d = 1e-4 * q.tau;
    CHECK(J(q.tau) < J(q.tau + d));
    CHECK(J(q.tau) < J(q.tau - d));
    const double slope = (J(q.tau + d) - J(q.tau - d)) / (2.0 * d);
    CHECK(std::abs(slope) < 1e-6);
  }
}

TEST_CASE("calibration anchor: base weight makes the quintic just reach the cap") {
  // With w = base_weight(L, V) the optimal rest-to-rest quintic over length L
  // has duration (15/8) L / V and peaks exactly at V.
  ctraj::CharacteristicScales s;
  s.length = 2.0;
  s.speed = 3.0;
  const double w = ctraj::base_weight(s);
  const auto q = ctraj::quintic_reference(s.length, w);
  CHECK(q.tau == doctest::Approx(15.0 / 8.0 * s.length / s.speed).epsilon(1e-12));
  CHECK(q.peak_speed == doctest::Approx(s.speed).epsilon(1e-12));
}

TEST_CASE("quintic duration scales with length to the one third") {
  // tau = (3600 L^2 w)^(1/6) for fixed w.
  const double w = 1e-2;
  const auto q1 = ctraj::quintic_reference(1.0, w);
  const auto q8 = ctraj::quintic_reference(8.0, w);
  CHECK(q8.tau == doctest::Approx(2.0 * q1.tau).epsilon(1e-12));
}
