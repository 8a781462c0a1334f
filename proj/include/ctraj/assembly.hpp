#pragma once

#include <array>
#include <vector>

#include "ctraj/core.hpp"
#include "ctraj/fem.hpp"
#include "ctraj/nlp.hpp"
#include "ctraj/obstacles.hpp"
#include "ctraj/quadrature.hpp"
#include "ctraj/weights.hpp"

// The trajectory optimization problem as a sparse NLP over the free
// coefficients of the theta and v fields, the path length lambda and the
// auxiliary position points.
//
// Objective: integral over [0, 1] of
//   lambda / v  +  w_t (v / lambda^3) (v'^2 + v v'' - v^2 th'^2)^2
//               +  w_n (v^3 / lambda^3) (3 v' th' + v th'')^2
// by the fixed Gauss rule on each element.
//
// Equalities: position chain rows that tie consecutive position points to
// the heading integral, one acceleration coupling per nonzero-speed end
// (v(0) v'(0) = a lambda), and one curvature coupling per nonzero-curvature
// end (th'(0) = kappa lambda).
//
// Inequalities, in row order: five dynamic quantities (v, a_t, a_n, omega,
// kappa) at p interior points of every element, one curvature cap
// lambda^2 kappa_box^2 - th'(mid)^2 >= 0 per element, then one clearance row
// per obstacle and position point.

namespace ctraj {

struct AssemblyOptions {
  // Drop the pointwise dynamic rows and the per-element curvature caps
  // (used by weight sweeps that only keep the structural constraints).
  bool dynamic_rows{true};
  // Replace the weights derived from the problem (used to freeze the base
  // weight across a batch or sweep).
  bool use_weights_override{false};
  EffectiveWeights weights_override{};
};

class DiscomfortNlp : public NlpProblem {
 public:
  // theta_end is the unwrapped target heading of the variant being solved.
  // The problem reference must outlive this object.
  DiscomfortNlp(const PlanningProblem& p, double theta_end,
                const AssemblyOptions& opt = {});

  int num_vars() const override;
  int num_eq() const override;
  int num_ineq() const override;
  void var_bounds(Eigen::VectorXd& lower, Eigen::VectorXd& upper) const override;
  void ineq_bounds(Eigen::VectorXd& lower, Eigen::VectorXd& upper) const override;
  bool eval_objective(const Eigen::VectorXd& x, double& f) const override;
  bool eval_objective_gradient(const Eigen::VectorXd& x,
                               Eigen::VectorXd& grad) const override;
  bool eval_eq(const Eigen::VectorXd& x, Eigen::VectorXd& c) const override;
  bool eval_ineq(const Eigen::VectorXd& x, Eigen::VectorXd& c) const override;
  const SparsityPattern& eq_jacobian_pattern() const override;
  bool eval_eq_jacobian(const Eigen::VectorXd& x,
                        Eigen::VectorXd& values) const override;
  const SparsityPattern& ineq_jacobian_pattern() const override;
  bool eval_ineq_jacobian(const Eigen::VectorXd& x,
                          Eigen::VectorXd& values) const override;
  const SparsityPattern& hessian_pattern() const override;
  bool eval_hessian(const Eigen::VectorXd& x, double sigma,
                    const Eigen::VectorXd& y_eq, const Eigen::VectorXd& y_ineq,
                    Eigen::VectorXd& values) const override;

  const DofLayout& layout() const { return layout_; }
  const EffectiveWeights& weights() const { return weights_; }
  double base_weight_value() const { return base_; }
  const CharacteristicScales& scales() const { return scales_; }

  // Unweighted integrals of the three discomfort terms, evaluated with the
  // same quadrature as the objective, so that
  //   objective = time + w_t * jerk_t_raw + w_n * jerk_n_raw.
  struct Components {
    double time{0.0};
    double jerk_t_raw{0.0};
    double jerk_n_raw{0.0};
  };
  bool components(const Eigen::VectorXd& x, Components& out) const;

  // Number of clearance evaluations that landed exactly on an obstacle
  // center and were nudged off it.
  int center_perturbations() const { return center_events_; }

 private:
  struct ElementCache {
    std::array<int, 9> slots{};  // th0, th0', th1, th1', v0, v0', v1, v1', lambda
    std::array<BasisEval, QuadratureRule::kPoints> bt, bv;
    std::vector<BasisEval> pt, pv;  // at the p dynamic points
    BasisEval mid_t;                // theta basis at xi = 1/2
  };

  struct SubCache {
    int element{0};
    double len{0.0};
    std::array<int, 4> tslots{};
    std::array<std::array<double, 4>, QuadratureRule::kPoints> basis{};
    std::array<double, QuadratureRule::kPoints> weight{};
  };

  struct LinearRow {  // a * full[slot_a] + b * lambda = 0
    int slot_a{0};
    double a{0.0};
    double b{0.0};
  };

  Vec2 point_of(const Eigen::VectorXd& full, int j) const;
  Vec2 safe_query(const StarObstacle& o, Vec2 r) const;

  const PlanningProblem& p_;
  DofLayout layout_;
  Mesh mesh_;
  CharacteristicScales scales_;
  double base_{0.0};
  EffectiveWeights weights_;
  bool dynamic_rows_{true};

  std::vector<ElementCache> elems_;
  std::vector<SubCache> subs_;
  std::vector<LinearRow> couplings_;
  double kappa_box_{0.0};

  int num_eq_{0};
  int num_ineq_{0};
  Eigen::VectorXd ineq_lower_, ineq_upper_;
  SparsityPattern eq_pattern_, ineq_pattern_, hess_pattern_;

  mutable int center_events_{0};
};

}  // namespace ctraj
