#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

// Domain types and pointwise kinematics for planar comfort-aware trajectory
// planning.  A trajectory is described by the speed profile v(u) and heading
// profile theta(u) over the scaled arc length u = s / lambda in [0, 1],
// where lambda is the total path length.  All derivatives below are taken
// with respect to u unless noted otherwise.

namespace ctraj {

struct Vec2 {
  double x{0.0};
  double y{0.0};

  Vec2() = default;
  Vec2(double x_, double y_) : x(x_), y(y_) {}

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double a) const { return {a * x, a * y}; }
  double norm() const { return std::hypot(x, y); }
};

// State of the robot at one end of the trajectory.
struct BoundaryState {
  double x{0.0};       // position in m
  double y{0.0};       // position in m
  double theta{0.0};   // heading in rad; the planner matches this value
                       // exactly, so full turns (theta +- 2*pi) are distinct
  double kappa{0.0};   // path curvature in 1/m
  double v{0.0};       // speed in m/s, non-negative
  double a_t{0.0};     // tangential acceleration in m/s^2; must be 0 when v is 0
};

// Symmetric-interval limits enforced along the whole trajectory.
// Defaults follow a differential-drive robot with a 0.55 m turn radius.
struct DynamicBounds {
  double curvature_min{-1.8};       // 1/m
  double curvature_max{1.8};        // 1/m
  double speed_min{0.0};            // m/s
  double speed_max{3.0};            // m/s
  double angular_speed_min{-1.57};  // rad/s
  double angular_speed_max{1.57};   // rad/s
  double accel_t_min{-1.0};         // m/s^2, tangential
  double accel_t_max{1.0};          // m/s^2
  double accel_n_min{-1.0};         // m/s^2, normal
  double accel_n_max{1.0};          // m/s^2
};

// Dimensionless multipliers applied on top of the problem's base jerk weight.
struct WeightFactors {
  double f_t{1.0};  // scales the squared tangential jerk term
  double f_n{1.0};  // scales the squared normal jerk term
};

// Mesh and constraint-sampling resolution.
struct Discretization {
  int n{32};  // finite elements over [0, 1]
  int m{20};  // interior position points per element used near obstacles
  int p{12};  // dynamic-bound check points per element
};

struct SolverSettings {
  double relative_tolerance{1e-8};
  double feasibility_tolerance{1e-6};
  int max_iterations{500};
};

// Forward declaration; concrete obstacle shapes live in obstacles.hpp.
class StarObstacle;

struct PlanningProblem {
  BoundaryState start;
  BoundaryState end;
  DynamicBounds bounds;
  WeightFactors weights;
  double min_turn_radius{0.55};  // m, sets the lateral length scale and the
                                 // radius of the seed arcs
  std::vector<StarObstacle> obstacles;
  Discretization disc;
  SolverSettings solver;

  // Out of line so the obstacle vector works with the forward declaration.
  PlanningProblem();
  PlanningProblem(const PlanningProblem&);
  PlanningProblem(PlanningProblem&&) noexcept;
  PlanningProblem& operator=(const PlanningProblem&);
  PlanningProblem& operator=(PlanningProblem&&) noexcept;
  ~PlanningProblem();
};

// Returns an empty string when the problem is well formed, otherwise a
// human-readable description of the first defect found.
std::string validate(const PlanningProblem& p);

// Pointwise trajectory state used by the kinematic maps below.
struct KinematicSample {
  double v{0.0};          // speed in m/s
  double dv{0.0};         // dv/du
  double ddv{0.0};        // d^2v/du^2
  double dtheta{0.0};     // dtheta/du
  double ddtheta{0.0};    // d^2theta/du^2
  double lambda{1.0};     // total path length in m
};

double tangential_acceleration(const KinematicSample& s);  // v v' / lambda
double normal_acceleration(const KinematicSample& s);      // v^2 theta' / lambda
double tangential_jerk(const KinematicSample& s);
double normal_jerk(const KinematicSample& s);
double curvature(const KinematicSample& s);      // theta' / lambda
double angular_speed(const KinematicSample& s);  // theta' v / lambda

// Integrands of the discomfort functional at one point of [0, 1], already
// multiplied by dt/du = lambda / v so that integrating over u gives the
// time-domain cost.  time_integrand is +inf when v <= 0.
struct DiscomfortIntegrands {
  double time{0.0};
  double jerk_t{0.0};  // w_t * (v / lambda^3) * (v'^2 + v v'' - v^2 theta'^2)^2
  double jerk_n{0.0};  // w_n * (v^3 / lambda^3) * (3 v' theta' + v theta'')^2
};

DiscomfortIntegrands discomfort_integrands(const KinematicSample& s, double w_t,
                                           double w_n);

// Displacement accumulated between ua and ub for a heading profile theta(u):
//   lambda * integral of (cos theta, sin theta) du
// evaluated with the fixed-order Gauss rule shared with the element
// integrals.  The result never exceeds lambda * (ub - ua) in norm.
Vec2 position_increment(const std::function<double(double)>& theta,
                        double lambda, double ua, double ub);

}  // namespace ctraj
