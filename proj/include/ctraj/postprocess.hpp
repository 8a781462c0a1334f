#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <vector>

#include "ctraj/assembly.hpp"
#include "ctraj/core.hpp"
#include "ctraj/fem.hpp"

// Time-domain conversion of solved trajectories.  A solution lives on the
// scaled arc length u; everything here goes through the time map
// t(u) = integral of lambda / v, which stays finite when the speed lifts
// off from rest like u^(2/3) at an endpoint.

namespace ctraj {

// A trajectory in the scaled arc-length domain together with what is
// needed to place it in the plane.
struct SolvedPath {
  Mesh mesh;
  FieldCoefficients theta;
  FieldCoefficients v;
  double lambda{0.0};  // total path length in m
  Vec2 origin{};       // r(0)
};

// Splits the expanded coefficient vector of the assembled problem back
// into fields; x is the reduced free-variable vector.
SolvedPath solved_path(const PlanningProblem& p, const DofLayout& layout,
                       const Eigen::VectorXd& x);

// Monotone table of (u, t) samples with t(0) = 0 and t(last) = tau.
struct TimeTable {
  std::vector<double> u;
  std::vector<double> t;

  double tau() const { return t.back(); }
  // Piecewise-linear interpolation; queries are clamped to the table range.
  double time_at(double uq) const;
  double u_at(double tq) const;
};

// Cumulative quadrature of lambda / v over a refinement of [0, 1].
// samples is the requested row count; the table keeps at least one row per
// mesh node, and inside a singular boundary element the rows are graded so
// consecutive ones see comparable time increments.  The integral there is
// taken in the substituted variable that makes the integrand bounded.
// Throws std::domain_error when the speed fails to be positive at an
// interior evaluation point.
TimeTable time_map(const SolvedPath& path, int samples = 4096);

struct CostReport {
  double tau{0.0};     // travel time from the time table, in s
  double jerk_t{0.0};  // integral of squared tangential jerk, unweighted
  double jerk_n{0.0};  // integral of squared normal jerk, unweighted
  double total{0.0};   // time term plus weighted jerk terms
};

// total reproduces the solver objective exactly: it is assembled from the
// same component integrals the objective uses.
CostReport cost_report(const DiscomfortNlp& nlp, const Eigen::VectorXd& x,
                       const TimeTable& table);

struct TrajectoryRow {
  double t{0.0};
  double x{0.0};
  double y{0.0};
  double theta{0.0};
  double v{0.0};
  double a_t{0.0};
  double a_n{0.0};
  double kappa{0.0};
  double omega{0.0};
};

struct TrajectoryTable {
  std::vector<TrajectoryRow> rows;
};

// Uniform-in-time resampling through the table: rows at 0, dt, 2 dt, ...
// plus a final row landing exactly on tau.  u is located by inverse
// interpolation of the table; kinematic quantities come from the pointwise
// maps, with the zero-speed limits substituted at singular endpoints.
// Throws std::invalid_argument for dt <= 0.
TrajectoryTable sample_trajectory(const SolvedPath& path,
                                  const TimeTable& table, double dt);

// Header t,x,y,theta,v,a_t,a_n,kappa,omega then one row per line with 9
// significant digits.
void write_csv(std::ostream& os, const TrajectoryTable& table);

}  // namespace ctraj
