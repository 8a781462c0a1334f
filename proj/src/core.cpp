#include "ctraj/core.hpp"

#include <limits>
#include <sstream>

#include "ctraj/obstacles.hpp"
#include "ctraj/quadrature.hpp"

namespace ctraj {

PlanningProblem::PlanningProblem() = default;
PlanningProblem::PlanningProblem(const PlanningProblem&) = default;
PlanningProblem::PlanningProblem(PlanningProblem&&) noexcept = default;
PlanningProblem& PlanningProblem::operator=(const PlanningProblem&) = default;
PlanningProblem& PlanningProblem::operator=(PlanningProblem&&) noexcept = default;
PlanningProblem::~PlanningProblem() = default;

double tangential_acceleration(const KinematicSample& s) {
  return s.v * s.dv / s.lambda;
}

double normal_acceleration(const KinematicSample& s) {
  return s.v * s.v * s.dtheta / s.lambda;
}

double tangential_jerk(const KinematicSample& s) {
  const double l2 = s.lambda * s.lambda;
  return s.v / l2 *
         (s.dv * s.dv + s.v * s.ddv - s.v * s.v * s.dtheta * s.dtheta);
}

double normal_jerk(const KinematicSample& s) {
  const double l2 = s.lambda * s.lambda;
  return s.v * s.v / l2 * (3.0 * s.dv * s.dtheta + s.v * s.ddtheta);
}

double curvature(const KinematicSample& s) { return s.dtheta / s.lambda; }

double angular_speed(const KinematicSample& s) {
  return s.dtheta * s.v / s.lambda;
}

DiscomfortIntegrands discomfort_integrands(const KinematicSample& s, double w_t,
                                           double w_n) {
  DiscomfortIntegrands out;
  if (s.v <= 0.0) {
    out.time = std::numeric_limits<double>::infinity();
  } else {
    out.time = s.lambda / s.v;
  }
  const double l3 = s.lambda * s.lambda * s.lambda;
  const double g = s.dv * s.dv + s.v * s.ddv - s.v * s.v * s.dtheta * s.dtheta;
  const double h = 3.0 * s.dv * s.dtheta + s.v * s.ddtheta;
  out.jerk_t = w_t * s.v / l3 * g * g;
  out.jerk_n = w_n * s.v * s.v * s.v / l3 * h * h;
  return out;
}

Vec2 position_increment(const std::function<double(double)>& theta,
                        double lambda, double ua, double ub) {
  const QuadratureRule& q = gauss12();
  const double len = ub - ua;
  double cx = 0.0, cy = 0.0;
  for (int k = 0; k < QuadratureRule::kPoints; ++k) {
    const double th = theta(ua + len * q.xi[k]);
    cx += q.weight[k] * std::cos(th);
    cy += q.weight[k] * std::sin(th);
  }
  return {lambda * len * cx, lambda * len * cy};
}

namespace {

std::string check_state(const char* which, const BoundaryState& b,
                        const DynamicBounds& d) {
  std::ostringstream err;
  if (b.v < 0.0) {
    err << which << ": speed must be non-negative";
  } else if (b.v == 0.0 && b.a_t != 0.0) {
    err << which << ": tangential acceleration must be 0 at zero speed";
  } else if (b.v < d.speed_min || b.v > d.speed_max) {
    err << which << ": speed " << b.v << " outside bounds";
  } else if (b.a_t < d.accel_t_min || b.a_t > d.accel_t_max) {
    err << which << ": tangential acceleration " << b.a_t << " outside bounds";
  } else if (b.kappa < d.curvature_min || b.kappa > d.curvature_max) {
    err << which << ": curvature " << b.kappa << " outside bounds";
  }
  return err.str();
}

}  // namespace

std::string validate(const PlanningProblem& p) {
  const DynamicBounds& d = p.bounds;
  if (d.curvature_min >= d.curvature_max) return "bounds: empty curvature interval";
  if (d.speed_min >= d.speed_max) return "bounds: empty speed interval";
  if (d.speed_min < 0.0) return "bounds: speed_min must be non-negative";
  if (d.angular_speed_min >= d.angular_speed_max)
    return "bounds: empty angular speed interval";
  if (d.accel_t_min >= d.accel_t_max)
    return "bounds: empty tangential acceleration interval";
  if (d.accel_n_min >= d.accel_n_max)
    return "bounds: empty normal acceleration interval";
  if (d.accel_t_min > 0.0 || d.accel_t_max < 0.0)
    return "bounds: tangential acceleration interval must contain 0";
  if (p.min_turn_radius <= 0.0) return "min_turn_radius must be positive";
  if (p.weights.f_t <= 0.0 || p.weights.f_n <= 0.0)
    return "weights: factors must be positive";
  if (p.disc.n < 2) return "discretization: need at least 2 elements";
  if (p.disc.m < 1 || p.disc.p < 1)
    return "discretization: m and p must be positive";
  if (p.solver.max_iterations < 1) return "solver: max_iterations must be positive";
  if (p.solver.relative_tolerance <= 0.0) return "solver: tolerance must be positive";
  if (std::string e = check_state("start", p.start, d); !e.empty()) return e;
  if (std::string e = check_state("end", p.end, d); !e.empty()) return e;
  return "";
}

}  // namespace ctraj
