#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

// Sparse nonlinear program contract shared by the trajectory problem, the
// initial-guess subproblems and the solver:
//
//   minimize f(x)
//   subject to  c_eq(x) = 0
//               ineq_lower <= c_ineq(x) <= ineq_upper
//               var_lower  <=    x      <= var_upper
//
// Jacobians and the Hessian of the Lagrangian are reported against fixed
// sparsity patterns (coordinate lists) whose values are refreshed at each
// point.  Evaluation callbacks return false to signal a non-finite result at
// the given point, which the solver treats as an infinitely bad trial.

namespace ctraj {

struct SparsityPattern {
  std::vector<int> row;
  std::vector<int> col;

  int size() const { return static_cast<int>(row.size()); }
  void add(int r, int c) {
    row.push_back(r);
    col.push_back(c);
  }
};

class NlpProblem {
 public:
  virtual ~NlpProblem() = default;

  virtual int num_vars() const = 0;
  virtual int num_eq() const = 0;
  virtual int num_ineq() const = 0;

  virtual void var_bounds(Eigen::VectorXd& lower, Eigen::VectorXd& upper) const = 0;
  virtual void ineq_bounds(Eigen::VectorXd& lower, Eigen::VectorXd& upper) const = 0;

  virtual bool eval_objective(const Eigen::VectorXd& x, double& f) const = 0;
  virtual bool eval_objective_gradient(const Eigen::VectorXd& x,
                                       Eigen::VectorXd& grad) const = 0;
  virtual bool eval_eq(const Eigen::VectorXd& x, Eigen::VectorXd& c) const = 0;
  virtual bool eval_ineq(const Eigen::VectorXd& x, Eigen::VectorXd& c) const = 0;

  virtual const SparsityPattern& eq_jacobian_pattern() const = 0;
  virtual bool eval_eq_jacobian(const Eigen::VectorXd& x,
                                Eigen::VectorXd& values) const = 0;
  virtual const SparsityPattern& ineq_jacobian_pattern() const = 0;
  virtual bool eval_ineq_jacobian(const Eigen::VectorXd& x,
                                  Eigen::VectorXd& values) const = 0;

  // Lower triangle of sigma * f''(x) + sum_i y_eq[i] c_eq_i''(x)
  //                                  + sum_j y_ineq[j] c_ineq_j''(x).
  virtual const SparsityPattern& hessian_pattern() const = 0;
  virtual bool eval_hessian(const Eigen::VectorXd& x, double sigma,
                            const Eigen::VectorXd& y_eq,
                            const Eigen::VectorXd& y_ineq,
                            Eigen::VectorXd& values) const = 0;
};

enum class SolveStatus {
  converged,
  iteration_limit,
  infeasible,
  numerical_failure,
};

const char* to_string(SolveStatus s);

struct SolverOptions {
  double relative_tolerance{1e-8};
  double feasibility_tolerance{1e-6};
  int max_iterations{500};
  bool verbose{false};
};

struct IterationRecord {
  int iter{0};
  double objective{0.0};
  double primal_infeasibility{0.0};
  double dual_infeasibility{0.0};
  double mu{0.0};
  double step{0.0};
  // Merit of the accepted step, measured before and after with the same
  // penalty and barrier parameters; merit_after <= merit_before holds for
  // every accepted step.
  double merit_before{0.0};
  double merit_after{0.0};
};

struct SolveReport {
  SolveStatus status{SolveStatus::numerical_failure};
  int iterations{0};
  Eigen::VectorXd x;
  double objective{0.0};
  double max_violation{0.0};       // max |c_eq| and bound/ineq overshoot
  double dual_infeasibility{0.0};  // stationarity residual, inf norm
  Eigen::VectorXd y_eq;            // multipliers at the final point
  Eigen::VectorXd y_ineq;
  std::vector<IterationRecord> log;
  std::string message;
};

}  // namespace ctraj
