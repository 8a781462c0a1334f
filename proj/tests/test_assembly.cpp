#include "ctraj/assembly.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

#include "ctraj/fem.hpp"
#include "ctraj/quadrature.hpp"
#include "fd_check.hpp"

namespace {

ctraj::PlanningProblem standard_problem() {
  ctraj::PlanningProblem p;
  p.start = {0.0, 0.0, 0.0, 0.0, 1.0, 0.0};
  p.end = {5.0, 1.0, 0.0, 0.0, 1.0, 0.0};
  return p;
}

ctraj::PlanningProblem rest_to_rest() {
  ctraj::PlanningProblem p;
  p.start = {0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  p.end = {0.0, -4.0, 0.0, 0.0, 0.0, 0.0};
  return p;
}

// A smooth strictly positive configuration with small deterministic noise.
// It does not satisfy the equality rows; the derivative checks don't care.
Eigen::VectorXd interior_point(const ctraj::PlanningProblem& p,
                               const ctraj::DofLayout& lay, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> un(-1.0, 1.0);
  Eigen::VectorXd full = Eigen::VectorXd::Zero(lay.total_slots());
  const double dx = p.end.x - p.start.x, dy = p.end.y - p.start.y;
  const double dist = std::max(std::hypot(dx, dy), 1.0);
  const int n = lay.n;
  for (int k = 0; k <= n; ++k) {
    const double u = static_cast<double>(k) / n;
    full[lay.theta_value(k)] = p.start.theta +
                               (p.end.theta - p.start.theta) * u +
                               0.2 * std::sin(M_PI * u) + 0.03 * un(rng);
    full[lay.theta_slope(k)] = 0.15 * un(rng);
    double v = 1.0 + 0.3 * std::sin(2.0 * u) + 0.05 * un(rng);
    double s = 0.1 * un(rng);
    if (k == 0 && lay.singular_left) {
      v = 0.0;       // fixed anyway
      s = 0.8;       // singular amplitude
    }
    if (k == n && lay.singular_right) {
      v = 0.0;
      s = 0.7;
    }
    full[lay.v_value(k)] = v;
    full[lay.v_slope(k)] = s;
  }
  full[lay.lambda_slot()] = 1.1 * dist;
  for (int j = 0; j < lay.num_points; ++j) {
    const double u = lay.point_u(j);
    full[lay.pos_x(j)] = p.start.x + dx * u + 0.05 * un(rng);
    full[lay.pos_y(j)] = p.start.y + dy * u + 0.05 * un(rng);
  }
  return lay.reduce(full);
}

Eigen::MatrixXd dense_jacobian(const ctraj::SparsityPattern& pat,
                               const Eigen::VectorXd& vals, int rows, int cols) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(rows, cols);
  for (int k = 0; k < pat.size(); ++k) d(pat.row[k], pat.col[k]) += vals[k];
  return d;
}

// Pattern entries may land in either triangle and repeat; accumulate into the
// lower triangle and mirror.
Eigen::MatrixXd dense_hessian(const ctraj::SparsityPattern& pat,
                              const Eigen::VectorXd& vals, int n) {
  Eigen::MatrixXd lower = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < pat.size(); ++k) {
    const int r = std::max(pat.row[k], pat.col[k]);
    const int c = std::min(pat.row[k], pat.col[k]);
    lower(r, c) += vals[k];
  }
  return lower.selfadjointView<Eigen::Lower>();
}

double max_scaled_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  double m = 0.0;
  for (int r = 0; r < a.rows(); ++r) {
    for (int c = 0; c < a.cols(); ++c) {
      const double scale = 1.0 + std::max(std::abs(a(r, c)), std::abs(b(r, c)));
      m = std::max(m, std::abs(a(r, c) - b(r, c)) / scale);
    }
  }
  return m;
}

void check_derivatives(const ctraj::PlanningProblem& p, unsigned seed,
                       double tol_grad, double tol_hess) {
  const ctraj::DiscomfortNlp nlp(p, p.end.theta);
  const Eigen::VectorXd x = interior_point(p, nlp.layout(), seed);
  const int nv = nlp.num_vars();

  double f0 = 0.0;
  REQUIRE(nlp.eval_objective(x, f0));

  Eigen::VectorXd g;
  REQUIRE(nlp.eval_objective_gradient(x, g));
  const Eigen::VectorXd g_fd = fdcheck::gradient(
      [&](const Eigen::VectorXd& xx) {
        double f = 0.0;
        REQUIRE(nlp.eval_objective(xx, f));
        return f;
      },
      x);
  CHECK(max_scaled_diff(g, g_fd) < tol_grad);

  Eigen::VectorXd je(nlp.eq_jacobian_pattern().size());
  REQUIRE(nlp.eval_eq_jacobian(x, je));
  const Eigen::MatrixXd Je =
      dense_jacobian(nlp.eq_jacobian_pattern(), je, nlp.num_eq(), nv);
  const Eigen::MatrixXd Je_fd = fdcheck::jacobian(
      [&](const Eigen::VectorXd& xx) {
        Eigen::VectorXd c;
        REQUIRE(nlp.eval_eq(xx, c));
        return c;
      },
      x);
  CHECK(max_scaled_diff(Je, Je_fd) < tol_grad);

  Eigen::MatrixXd Ji(0, nv), Ji_fd(0, nv);
  if (nlp.num_ineq() > 0) {
    Eigen::VectorXd ji(nlp.ineq_jacobian_pattern().size());
    REQUIRE(nlp.eval_ineq_jacobian(x, ji));
    Ji = dense_jacobian(nlp.ineq_jacobian_pattern(), ji, nlp.num_ineq(), nv);
    Ji_fd = fdcheck::jacobian(
        [&](const Eigen::VectorXd& xx) {
          Eigen::VectorXd c;
          REQUIRE(nlp.eval_ineq(xx, c));
          return c;
        },
        x);
    CHECK(max_scaled_diff(Ji, Ji_fd) < tol_grad);
  }

  // Lagrangian Hessian against differentiated analytic gradient.
  std::mt19937 rng(seed + 17);
  std::uniform_real_distribution<double> un(-1.0, 1.0);
  const double sigma = 0.8;
  Eigen::VectorXd ye(nlp.num_eq()), yi(nlp.num_ineq());
  for (int i = 0; i < ye.size(); ++i) ye[i] = un(rng);
  for (int i = 0; i < yi.size(); ++i) yi[i] = un(rng);

  Eigen::VectorXd hv(nlp.hessian_pattern().size());
  REQUIRE(nlp.eval_hessian(x, sigma, ye, yi, hv));
  const Eigen::MatrixXd H = dense_hessian(nlp.hessian_pattern(), hv, nv);

  auto lag_grad = [&](const Eigen::VectorXd& xx) {
    Eigen::VectorXd gg;
    REQUIRE(nlp.eval_objective_gradient(xx, gg));
    Eigen::VectorXd out = sigma * gg;
    Eigen::VectorXd jev(nlp.eq_jacobian_pattern().size());
    REQUIRE(nlp.eval_eq_jacobian(xx, jev));
    out += dense_jacobian(nlp.eq_jacobian_pattern(), jev, nlp.num_eq(), nv)
               .transpose() *
           ye;
    if (nlp.num_ineq() > 0) {
      Eigen::VectorXd jiv(nlp.ineq_jacobian_pattern().size());
      REQUIRE(nlp.eval_ineq_jacobian(xx, jiv));
      out += dense_jacobian(nlp.ineq_jacobian_pattern(), jiv, nlp.num_ineq(), nv)
                 .transpose() *
             yi;
    }
    return out;
  };
  const Eigen::MatrixXd H_fd = fdcheck::hessian_from_gradient(lag_grad, x);
  // Symmetrize the one-sided reconstruction before comparing.
  const Eigen::MatrixXd H_fd_sym = 0.5 * (H_fd + H_fd.transpose());
  CHECK(max_scaled_diff(H, H_fd_sym) < tol_hess);
}

}  // namespace

TEST_CASE("row and variable counts for the reference discretization") {
  const auto p = standard_problem();
  const ctraj::DiscomfortNlp nlp(p, p.end.theta);
  CHECK(nlp.num_vars() == 189);
  CHECK(nlp.num_eq() == 66);
  CHECK(nlp.num_ineq() == 1952);
  CHECK(nlp.num_eq() + nlp.num_ineq() == 2018);

  Eigen::VectorXd lo, hi;
  nlp.ineq_bounds(lo, hi);
  REQUIRE(lo.size() == 1952);
  // first dynamic point: v, a_t, a_n, omega, kappa
  CHECK(lo[0] == p.bounds.speed_min);
  CHECK(hi[0] == p.bounds.speed_max);
  CHECK(lo[1] == p.bounds.accel_t_min);
  CHECK(hi[1] == p.bounds.accel_t_max);
  CHECK(lo[2] == p.bounds.accel_n_min);
  CHECK(hi[2] == p.bounds.accel_n_max);
  CHECK(lo[3] == p.bounds.angular_speed_min);
  CHECK(hi[3] == p.bounds.angular_speed_max);
  CHECK(lo[4] == p.bounds.curvature_min);
  CHECK(hi[4] == p.bounds.curvature_max);
  // curvature caps occupy the last 32 rows
  CHECK(lo[1920] == 0.0);
  CHECK(std::isinf(hi[1920]));
}

TEST_CASE("row counts without end-speed couplings") {
  const auto p = rest_to_rest();
  const ctraj::DiscomfortNlp nlp(p, p.end.theta);
  CHECK(nlp.num_vars() == 189);
  CHECK(nlp.num_eq() == 64);
  CHECK(nlp.num_ineq() == 1952);
}

TEST_CASE("row counts with end curvature and an obstacle") {
  auto p = standard_problem();
  p.start.kappa = 0.5;
  p.obstacles.push_back(
      ctraj::make_obstacle({2.5, -1.5}, ctraj::CircleSpec{0.5}));
  const ctraj::DiscomfortNlp nlp(p, p.end.theta);
  // the start slope is released and one curvature coupling row appears
  CHECK(nlp.num_vars() == 2 * 672 + 190 - 2 * 32);
  const ctraj::DofLayout& lay = nlp.layout();
  CHECK(lay.num_points == 673);
  CHECK(nlp.num_eq() == 2 * 672 + 3);
  CHECK(nlp.num_ineq() == 1952 + 673);

  Eigen::VectorXd lo, hi;
  nlp.ineq_bounds(lo, hi);
  CHECK(lo[1952] == 0.0);
  CHECK(std::isinf(hi[1952]));
}

TEST_CASE("objective equals the weighted sum of its parts") {
  const auto p = standard_problem();
  const ctraj::DiscomfortNlp nlp(p, p.end.theta);
  const Eigen::VectorXd x = interior_point(p, nlp.layout(), 3);
  double f = 0.0;
  REQUIRE(nlp.eval_objective(x, f));
  ctraj::DiscomfortNlp::Components parts;
  REQUIRE(nlp.components(x, parts));
  const double sum = parts.time + nlp.weights().w_t * parts.jerk_t_raw +
                     nlp.weights().w_n * parts.jerk_n_raw;
  CHECK(f == doctest::Approx(sum).epsilon(1e-12));
  CHECK(parts.time > 0.0);
  CHECK(parts.jerk_t_raw > 0.0);
  CHECK(parts.jerk_n_raw > 0.0);
}

TEST_CASE("dynamic rows report the pointwise kinematic quantities") {
  const auto p = standard_problem();
  const ctraj::DiscomfortNlp nlp(p, p.end.theta);
  const ctraj::DofLayout& lay = nlp.layout();
  const Eigen::VectorXd x = interior_point(p, lay, 5);
  const Eigen::VectorXd full = lay.expand(x);
  const double lam = full[lay.lambda_slot()];

  ctraj::FieldCoefficients th{full.segment(0, 2 * (lay.n + 1)),
                              false, false};
  ctraj::FieldCoefficients vf{full.segment(2 * (lay.n + 1), 2 * (lay.n + 1)),
                              lay.singular_left, lay.singular_right};
  const ctraj::Mesh mesh{lay.n};

  Eigen::VectorXd c;
  REQUIRE(nlp.eval_ineq(x, c));
  const int np = p.disc.p;
  for (int e : {0, 7, 31}) {
    for (int k : {0, 5, 11}) {
      const double u = (e + (k + 0.5) / np) / lay.n;
      const auto sv = ctraj::evaluate_field(mesh, vf, u);
      const auto st = ctraj::evaluate_field(mesh, th, u);
      const int row = (e * np + k) * 5;
      CHECK(c[row + 0] == doctest::Approx(sv.value).epsilon(1e-12));
      CHECK(c[row + 1] ==
            doctest::Approx(sv.value * sv.du / lam).epsilon(1e-12));
      CHECK(c[row + 2] ==
            doctest::Approx(sv.value * sv.value * st.du / lam).epsilon(1e-12));
      CHECK(c[row + 3] ==
            doctest::Approx(sv.value * st.du / lam).epsilon(1e-12));
      CHECK(c[row + 4] == doctest::Approx(st.du / lam).epsilon(1e-12));
    }
  }

  // curvature cap rows compare the midpoint slope against the box corner
  const double kbox = std::max(std::abs(p.bounds.curvature_min),
                               std::abs(p.bounds.curvature_max));
  for (int e : {0, 16}) {
    const auto st = ctraj::evaluate_field(mesh, th, (e + 0.5) / lay.n);
    CHECK(c[1920 + e] ==
          doctest::Approx(lam * lam * kbox * kbox - st.du * st.du)
              .epsilon(1e-12));
  }
}

TEST_CASE("chain rows tie position points to the heading integral") {
  const auto p = standard_problem();
  const ctraj::DiscomfortNlp nlp(p, p.end.theta);
  const ctraj::DofLayout& lay = nlp.layout();
  const Eigen::VectorXd x = interior_point(p, lay, 7);
  const Eigen::VectorXd full = lay.expand(x);
  const double lam = full[lay.lambda_slot()];

  ctraj::FieldCoefficients th{full.segment(0, 2 * (lay.n + 1)), false, false};
  const ctraj::Mesh mesh{lay.n};

  Eigen::VectorXd c;
  REQUIRE(nlp.eval_eq(x, c));
  for (int j : {0, 13, 31}) {
    const double ua = lay.point_u(j), ub = lay.point_u(j + 1);
    // dense Simpson reference for the heading integral on [ua, ub]
    const int ns = 2000;
    double qc = 0.0, qs = 0.0;
    const double hstep = (ub - ua) / ns;
    for (int i = 0; i <= ns; ++i) {
      const double w =
          (i == 0 || i == ns) ? 1.0 : ((i % 2 == 1) ? 4.0 : 2.0);
      const double t = ctraj::evaluate_field(mesh, th, ua + hstep * i).value;
      qc += w * std::cos(t);
      qs += w * std::sin(t);
    }
    qc *= hstep / 3.0;
    qs *= hstep / 3.0;
    const double rx =
        full[lay.pos_x(j + 1)] - full[lay.pos_x(j)] - lam * qc;
    const double ry =
        full[lay.pos_y(j + 1)] - full[lay.pos_y(j)] - lam * qs;
    CHECK(c[2 * j] == doctest::Approx(rx).epsilon(1e-10));
    CHECK(c[2 * j + 1] == doctest::Approx(ry).epsilon(1e-10));
  }

  // coupling rows: v(0) v'(0) - a_t(0) lambda and the mirrored end row
  CHECK(c[64] == doctest::Approx(p.start.v * full[lay.v_slope(0)] -
                                 p.start.a_t * lam));
  CHECK(c[65] == doctest::Approx(p.end.v * full[lay.v_slope(lay.n)] -
                                 p.end.a_t * lam));
}

TEST_CASE("derivatives match finite differences") {
  check_derivatives(standard_problem(), 11, 2e-5, 2e-4);
}

TEST_CASE("derivatives match finite differences at singular ends") {
  check_derivatives(rest_to_rest(), 12, 2e-5, 2e-4);
}

TEST_CASE("derivatives match finite differences with obstacles") {
  auto p = standard_problem();
  p.obstacles.push_back(
      ctraj::make_obstacle({2.5, -1.5}, ctraj::CircleSpec{0.4}));
  p.obstacles.push_back(ctraj::make_obstacle(
      {3.0, 2.0}, ctraj::EllipseSpec{0.8, 0.3, 0.4}));
  check_derivatives(p, 13, 2e-5, 2e-4);
}

TEST_CASE("nonpositive speed rejects the configuration") {
  const auto p = standard_problem();
  const ctraj::DiscomfortNlp nlp(p, p.end.theta);
  const ctraj::DofLayout& lay = nlp.layout();
  Eigen::VectorXd full = lay.expand(interior_point(p, lay, 21));
  full[lay.v_value(10)] = -0.4;
  const Eigen::VectorXd x = lay.reduce(full);
  double f = 0.0;
  CHECK_FALSE(nlp.eval_objective(x, f));
  Eigen::VectorXd g;
  CHECK_FALSE(nlp.eval_objective_gradient(x, g));
}

TEST_CASE("a position point on an obstacle center is nudged off it") {
  auto p = standard_problem();
  p.obstacles.push_back(
      ctraj::make_obstacle({0.0, 0.0}, ctraj::CircleSpec{0.3}));
  const ctraj::DiscomfortNlp nlp(p, p.end.theta);
  const ctraj::DofLayout& lay = nlp.layout();
  Eigen::VectorXd full = lay.expand(interior_point(p, lay, 23));
  full[lay.pos_x(5)] = 0.0;
  full[lay.pos_y(5)] = 0.0;
  const Eigen::VectorXd x = lay.reduce(full);
  Eigen::VectorXd c;
  CHECK(nlp.center_perturbations() == 0);
  REQUIRE(nlp.eval_ineq(x, c));
  CHECK(c.allFinite());
  CHECK(nlp.center_perturbations() > 0);
}

TEST_CASE("dynamic rows can be dropped for relaxed solves") {
  auto p = standard_problem();
  ctraj::AssemblyOptions opt;
  opt.dynamic_rows = false;
  const ctraj::DiscomfortNlp relaxed(p, p.end.theta, opt);
  CHECK(relaxed.num_ineq() == 0);
  CHECK(relaxed.num_eq() == 66);

  p.obstacles.push_back(
      ctraj::make_obstacle({2.5, -1.5}, ctraj::CircleSpec{0.5}));
  const ctraj::DiscomfortNlp with_obs(p, p.end.theta, opt);
  CHECK(with_obs.num_ineq() == 673);
}

TEST_CASE("weight overrides replace the derived weights") {
  const auto p = standard_problem();
  ctraj::AssemblyOptions opt;
  opt.use_weights_override = true;
  opt.weights_override = {0.5, 0.25};
  const ctraj::DiscomfortNlp nlp(p, p.end.theta, opt);
  CHECK(nlp.weights().w_t == 0.5);
  CHECK(nlp.weights().w_n == 0.25);

  const Eigen::VectorXd x = interior_point(p, nlp.layout(), 31);
  double f = 0.0;
  REQUIRE(nlp.eval_objective(x, f));
  ctraj::DiscomfortNlp::Components parts;
  REQUIRE(nlp.components(x, parts));
  CHECK(f == doctest::Approx(parts.time + 0.5 * parts.jerk_t_raw +
                             0.25 * parts.jerk_n_raw)
                 .epsilon(1e-12));
}
