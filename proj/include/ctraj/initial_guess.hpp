#pragma once

#include <vector>

#include <Eigen/Dense>

#include "ctraj/core.hpp"

// Warm starts for the trajectory problem.  Each candidate pairs an unwrapped
// end heading with a geometric arc-line-arc seed, smooths the seed through a
// small auxiliary heading problem, and attaches a speed profile that matches
// the endpoint conditions.

namespace ctraj {

// The two base variants share the given end heading but turn opposite ways
// first; the loop variants unwrap the end heading by a full turn.
enum class GuessVariant { base_a, base_b, plus_2pi, minus_2pi };

const char* to_string(GuessVariant v);

struct PathGuess {
  GuessVariant variant{GuessVariant::base_a};
  double theta_end{0.0};  // unwrapped target heading in rad
  Eigen::VectorXd theta;  // 2(n+1) heading coefficients
  double lambda{0.0};     // path length in m
};

struct SpeedGuess {
  Eigen::VectorXd v;        // 2(n+1) speed coefficients
  bool closed_form{false};  // true when no auxiliary solve was needed
};

struct StartingPoint {
  GuessVariant variant{GuessVariant::base_a};
  double theta_end{0.0};
  Eigen::VectorXd x;  // reduced vector for dof_layout(p, theta_end)
};

// Geometric seed for one variant: two circular arcs of the tightest usable
// radius joined by a straight segment, with the heading sampled onto the
// mesh.  Always constructible for distinct endpoints.
PathGuess path_seed(const PlanningProblem& p, GuessVariant variant);

// Smooths each seed by minimizing lambda + w * integral(theta''^2) subject
// to the endpoint headings, the two whole-path position constraints and the
// curvature box.  Variants whose auxiliary solve fails are dropped.
std::vector<PathGuess> path_guesses(const PlanningProblem& p);

// Speed profile along one smoothed path.  Zero-speed ends use closed forms
// with the matching two-thirds-power behavior; nonzero ends solve a small
// minimum-bending problem.  Returns false when that solve fails.
bool speed_guess(const PlanningProblem& p, const PathGuess& g, SpeedGuess& out);

// Complete starting points, one per surviving variant, ordered by variant.
std::vector<StartingPoint> starting_points(const PlanningProblem& p);

}  // namespace ctraj
