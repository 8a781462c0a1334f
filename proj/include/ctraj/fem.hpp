#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

#include "ctraj/core.hpp"

// C^1-conforming discretization of the speed and heading profiles on a
// uniform mesh of [0, 1].  Interior elements carry cubic Hermite shape
// functions with one (value, slope) pair per node; slopes are stored as
// d/du derivatives.  When an endpoint speed is zero the adjacent element
// swaps its boundary-node modes for a single singular mode proportional to
// xi^(2/3), which reproduces the physical v ~ u^(2/3) takeoff from rest
// that no polynomial basis can represent.

namespace ctraj {

struct Mesh {
  int n{32};  // number of elements

  double h() const { return 1.0 / n; }
  double node_u(int i) const { return static_cast<double>(i) / n; }

  // Element containing u plus the local coordinate xi in [0, 1].
  void locate(double u, int& element, double& xi) const {
    const double t = u * n;
    element = std::min(std::max(static_cast<int>(t), 0), n - 1);
    xi = t - element;
  }
};

// Nodal coefficients of one scalar field: (value, slope) per node, 2(n+1)
// entries.  With a singular flag set, the boundary node's value coefficient
// must be 0 and its slope coefficient holds the singular-mode amplitude c,
// so that the field behaves like c * xi^(2/3) (left) or c * (1-xi)^(2/3)
// (right) in the boundary element.
struct FieldCoefficients {
  Eigen::VectorXd c;
  bool singular_left{false};
  bool singular_right{false};
};

enum class ElementBasis { hermite, singular_left, singular_right };

// Shape functions of one element evaluated at local coordinate xi.  Local
// modes are ordered (left value, left slope, right value, right slope);
// on singular elements the boundary value mode is identically zero and the
// boundary slope mode is the singular one.
struct BasisEval {
  std::array<double, 4> value{};
  std::array<double, 4> du{};   // d/du
  std::array<double, 4> duu{};  // d^2/du^2
};

BasisEval element_basis(double h, ElementBasis kind, double xi);

ElementBasis element_kind(const Mesh& m, bool singular_left, bool singular_right,
                          int element);

struct FieldSample {
  double value{0.0};
  double du{0.0};
  double duu{0.0};
};

// At u exactly on a singular endpoint the value is 0 and the derivatives are
// reported as +-inf (the singular mode has unbounded slope there).
FieldSample evaluate_field(const Mesh& m, const FieldCoefficients& f, double u);

// Unknown layout of the trajectory problem.  The full coefficient vector
// stacks, in order: theta coefficients, v coefficients, lambda, then the
// auxiliary position points (x_j, y_j).  Boundary conditions are imposed by
// marking slots as fixed; everything else gets a free-variable index.
struct DofLayout {
  int n{0};           // elements
  int num_points{0};  // auxiliary position points, uniformly spaced in u
  bool singular_left{false};
  bool singular_right{false};

  std::vector<int> free_index;      // slot -> free index, or -1 when fixed
  std::vector<double> fixed_value;  // slot -> imposed value when fixed
  Eigen::VectorXd lower, upper;     // bounds on the free variables

  int theta_value(int node) const { return 2 * node; }
  int theta_slope(int node) const { return 2 * node + 1; }
  int v_value(int node) const { return 2 * (n + 1) + 2 * node; }
  int v_slope(int node) const { return 2 * (n + 1) + 2 * node + 1; }
  int lambda_slot() const { return 4 * (n + 1); }
  int pos_x(int point) const { return 4 * (n + 1) + 1 + 2 * point; }
  int pos_y(int point) const { return 4 * (n + 1) + 1 + 2 * point + 1; }
  int total_slots() const { return 4 * (n + 1) + 1 + 2 * num_points; }
  int num_free() const { return static_cast<int>(lower.size()); }

  double point_u(int j) const {
    return static_cast<double>(j) / (num_points - 1);
  }

  Eigen::VectorXd expand(const Eigen::VectorXd& x) const;
  Eigen::VectorXd reduce(const Eigen::VectorXd& full) const;
};

// theta_end is the (possibly unwrapped) target heading of the variant being
// solved; the end curvature still comes from the problem.  Obstacle presence
// decides how densely the auxiliary position points sample the path.
DofLayout dof_layout(const PlanningProblem& p, double theta_end);

}  // namespace ctraj
