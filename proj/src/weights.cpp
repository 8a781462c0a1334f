#include "ctraj/weights.hpp"

#include <cmath>

namespace ctraj {

CharacteristicScales characteristic_scales(const PlanningProblem& p) {
  CharacteristicScales s;
  const double dx = p.end.x - p.start.x;
  const double dy = p.end.y - p.start.y;
  s.length = std::max(std::hypot(dx, dy), M_PI * p.min_turn_radius);
  s.speed = p.bounds.speed_max;
  return s;
}

double base_weight(const CharacteristicScales& s) {
  const double c = 225.0 / 2048.0;
  const double l2 = s.length * s.length;
  const double v2 = s.speed * s.speed;
  return c * c * (l2 * l2) / (v2 * v2 * v2);
}

EffectiveWeights effective_weights(double base, const WeightFactors& f) {
  return {f.f_t * base, f.f_n * base};
}

QuinticReference quintic_reference(double length, double w_t) {
  QuinticReference q;
  q.length = length;
  q.tau = std::pow(3600.0 * length * length * w_t, 1.0 / 6.0);
  q.peak_speed = 15.0 * length / (8.0 * q.tau);
  const double t5 = std::pow(q.tau, 5);
  q.discomfort = q.tau + 720.0 * length * length * w_t / t5;
  return q;
}

double QuinticReference::position(double t) const {
  const double t5 = std::pow(tau, 5);
  return length * t * t * t * (6.0 * t * t - 15.0 * t * tau + 10.0 * tau * tau) / t5;
}

double QuinticReference::speed(double t) const {
  // 30 L t^2 (t - tau)^2 / tau^5
  const double t5 = std::pow(tau, 5);
  const double d = t - tau;
  return 30.0 * length * t * t * d * d / t5;
}

double QuinticReference::acceleration(double t) const {
  const double t5 = std::pow(tau, 5);
  return 60.0 * length * t * (t - tau) * (2.0 * t - tau) / t5;
}

double QuinticReference::jerk(double t) const {
  const double t5 = std::pow(tau, 5);
  return 60.0 * length * (6.0 * t * t - 6.0 * t * tau + tau * tau) / t5;
}

}  // namespace ctraj
