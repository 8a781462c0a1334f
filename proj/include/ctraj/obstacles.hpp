#pragma once

#include <memory>
#include <stdexcept>
#include <variant>
#include <vector>

#include "ctraj/core.hpp"

// Obstacles are star-shaped regions: a center point plus a radial boundary
// function rho(phi) that every ray from the center crosses exactly once.
// The signed clearance of a query point r is
//
//   C(r) = |r - center| - rho(atan2(r - center))
//
// which is negative inside, zero on the boundary and positive outside.  C
// stays bounded inside the obstacle while its derivatives grow like 1/|r -
// center| near the center, which is what the interior-point treatment of the
// clearance constraints relies on.

namespace ctraj {

// Radial boundary sample: rho and its first two derivatives in phi.
struct RadialEval {
  double rho{0.0};
  double drho{0.0};
  double ddrho{0.0};
};

class RadialShape {
 public:
  virtual ~RadialShape() = default;
  virtual RadialEval eval(double phi) const = 0;  // 2*pi periodic
};

struct CircleSpec {
  double radius{1.0};
};

struct EllipseSpec {
  double semi_x{1.0};     // semi-axis along the local x direction, m
  double semi_y{1.0};     // semi-axis along the local y direction, m
  double rotation{0.0};   // rad
};

// Corners of the polygonal shapes are blended over +-smoothing radians with
// a quintic ramp so rho is C^2; smoothing = 0 keeps the exact piecewise
// boundary, in which case derivative queries at a corner angle use the edge
// on the counterclockwise side.
struct RectangleSpec {
  double half_width{1.0};   // half extent along local x, m
  double half_height{1.0};  // half extent along local y, m
  double rotation{0.0};     // rad
  double smoothing{0.0349065850398866};  // rad, about 2 degrees
};

struct StarPolygonSpec {
  std::vector<double> angles;  // vertex angles, strictly increasing, span < 2*pi
  std::vector<double> radii;   // vertex distances from the center, positive
  double smoothing{0.0349065850398866};  // rad
};

using ShapeSpec =
    std::variant<CircleSpec, EllipseSpec, RectangleSpec, StarPolygonSpec>;

class StarObstacle {
 public:
  StarObstacle() = default;
  StarObstacle(Vec2 center, std::shared_ptr<const RadialShape> shape)
      : center_(center), shape_(std::move(shape)) {}

  const Vec2& center() const { return center_; }
  RadialEval radial(double phi) const { return shape_->eval(phi); }
  Vec2 boundary_point(double phi) const;

 private:
  Vec2 center_{};
  std::shared_ptr<const RadialShape> shape_;
};

// Throws std::invalid_argument when the spec does not describe a shape that
// is star-shaped about the center (degenerate radii, edges through the
// center, vertex gaps of pi or more, overlapping smoothing windows).
StarObstacle make_obstacle(Vec2 center, const ShapeSpec& spec);

// Raised by the clearance queries when r coincides with the obstacle center,
// where the direction to the boundary is undefined.  Callers perturb the
// query and retry.
class CenterQueryError : public std::domain_error {
 public:
  CenterQueryError() : std::domain_error("clearance query at obstacle center") {}
};

struct SymMat2 {
  double xx{0.0};
  double xy{0.0};
  double yy{0.0};
};

double clearance(const StarObstacle& o, Vec2 r);
Vec2 clearance_gradient(const StarObstacle& o, Vec2 r);
SymMat2 clearance_hessian(const StarObstacle& o, Vec2 r);

}  // namespace ctraj
