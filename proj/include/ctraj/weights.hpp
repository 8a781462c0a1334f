#pragma once

#include "ctraj/core.hpp"

// Dimensional analysis that turns the user-facing dimensionless factors
// (f_t, f_n) into the jerk weights of the discomfort functional.  The base
// weight is fixed by requiring that, on a straight run of length L* with the
// speed cap V*, the time-optimal comfortable profile just reaches V*.

namespace ctraj {

struct CharacteristicScales {
  double length{1.0};  // L* = max(straight-line distance, pi * min turn radius)
  double speed{1.0};   // V* = speed_max
};

CharacteristicScales characteristic_scales(const PlanningProblem& p);

// (225/2048)^2 * L^4 / V^6.  Units: s^5 / m^2, so that w * jerk^2 * time
// integrates to seconds.
double base_weight(const CharacteristicScales& s);

struct EffectiveWeights {
  double w_t{0.0};  // f_t * base
  double w_n{0.0};  // f_n * base
};

EffectiveWeights effective_weights(double base, const WeightFactors& f);

// Rest-to-rest straight-line profile used to calibrate the base weight and
// as a closed-form oracle: the quintic s(t) = L t^3 (6 t^2 - 15 t tau +
// 10 tau^2) / tau^5 with zero speed and acceleration at both ends.  For a
// given jerk weight w the discomfort of the quintic family is
// J(tau) = tau + 720 L^2 w / tau^5, minimised at tau = (3600 L^2 w)^(1/6).
struct QuinticReference {
  double tau{0.0};         // optimal duration in s
  double peak_speed{0.0};  // speed at t = tau/2, equals 15 L / (8 tau)
  double discomfort{0.0};  // J at the optimal tau
  double length{0.0};

  // Position, speed, acceleration and jerk of the reference at time t.
  double position(double t) const;
  double speed(double t) const;
  double acceleration(double t) const;
  double jerk(double t) const;
};

QuinticReference quintic_reference(double length, double w_t);

}  // namespace ctraj
