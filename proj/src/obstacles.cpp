#include "ctraj/obstacles.hpp"

#include <algorithm>
#include <cmath>

namespace ctraj {
namespace {

constexpr double kTwoPi = 2.0 * M_PI;

double wrap_to(double phi, double lo) {
  // Wraps phi into [lo, lo + 2*pi).
  double w = std::fmod(phi - lo, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  return lo + w;
}

class CircleShape final : public RadialShape {
 public:
  explicit CircleShape(double r) : r_(r) {}
  RadialEval eval(double) const override { return {r_, 0.0, 0.0}; }

 private:
  double r_;
};

class EllipseShape final : public RadialShape {
 public:
  EllipseShape(double a, double b, double rot) : a_(a), b_(b), rot_(rot) {}

  RadialEval eval(double phi) const override {
    const double psi = phi - rot_;
    const double s = std::sin(psi), c = std::cos(psi);
    const double ab = a_ * b_;
    const double d = b_ * b_ * c * c + a_ * a_ * s * s;
    const double d1 = (a_ * a_ - b_ * b_) * std::sin(2.0 * psi);
    const double d2 = 2.0 * (a_ * a_ - b_ * b_) * std::cos(2.0 * psi);
    const double dm12 = 1.0 / std::sqrt(d);
    const double dm32 = dm12 / d;
    const double dm52 = dm32 / d;
    RadialEval out;
    out.rho = ab * dm12;
    out.drho = -0.5 * ab * dm32 * d1;
    out.ddrho = 0.75 * ab * dm52 * d1 * d1 - 0.5 * ab * dm32 * d2;
    return out;
  }

 private:
  double a_, b_, rot_;
};

// One straight edge of a polygonal boundary: the line at distance d from the
// center whose outward normal points along beta.  In polar form
// rho(phi) = d / cos(phi - beta), valid while |phi - beta| < pi/2.
struct Edge {
  double d{0.0};
  double beta{0.0};

  RadialEval eval(double phi) const {
    const double chi = phi - beta;
    const double sec = 1.0 / std::cos(chi);
    const double tan = std::tan(chi);
    RadialEval out;
    out.rho = d * sec;
    out.drho = d * sec * tan;
    out.ddrho = d * sec * (2.0 * sec * sec - 1.0);
    return out;
  }
};

// Piecewise-secant radial function shared by rectangles and star polygons.
// corner_[i] is the angle where edge_[i-1] hands over to edge_[i]; edge_[i]
// covers [corner_[i], corner_[i+1]].  Corners are blended over +-width_.
class PolygonShape final : public RadialShape {
 public:
  PolygonShape(std::vector<double> corners, std::vector<Edge> edges,
               double width)
      : corner_(std::move(corners)), edge_(std::move(edges)), width_(width) {}

  RadialEval eval(double phi) const override {
    const int m = static_cast<int>(corner_.size());
    const double lo = corner_[0];
    const double hi = lo + kTwoPi;
    const double psi = wrap_to(phi, lo);
    // Edge index: last corner <= psi.  Edge::eval is 2*pi periodic, so any
    // angle representative works for the evaluations below.
    int i = static_cast<int>(std::upper_bound(corner_.begin(), corner_.end(), psi) -
                             corner_.begin()) - 1;
    if (i < 0) i = 0;

    if (width_ > 0.0) {
      if (i > 0 && psi < corner_[i] + width_)
        return blend(corner_[i], i - 1, i, psi);
      if (i + 1 < m) {
        if (psi > corner_[i + 1] - width_)
          return blend(corner_[i + 1], i, i + 1, psi);
      } else if (psi > hi - width_) {
        return blend(hi, m - 1, 0, psi);
      }
      // The first corner's window, entered from above the seam.
      if (i == 0 && psi < lo + width_) return blend(lo, m - 1, 0, psi);
    }
    return edge_[i].eval(psi);
  }

 private:
  RadialEval blend(double corner, int left, int right, double psi) const {
    const double t = (psi - (corner - width_)) / (2.0 * width_);
    const double s = t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
    const double s1 = 30.0 * t * t * (1.0 - t) * (1.0 - t) / (2.0 * width_);
    const double s2 =
        60.0 * t * (1.0 - t) * (1.0 - 2.0 * t) / (4.0 * width_ * width_);
    const RadialEval a = edge_[left].eval(psi);
    const RadialEval b = edge_[right].eval(psi);
    RadialEval out;
    out.rho = (1.0 - s) * a.rho + s * b.rho;
    out.drho = (1.0 - s) * a.drho + s * b.drho + s1 * (b.rho - a.rho);
    out.ddrho = (1.0 - s) * a.ddrho + s * b.ddrho + 2.0 * s1 * (b.drho - a.drho) +
                s2 * (b.rho - a.rho);
    return out;
  }

  std::vector<double> corner_;
  std::vector<Edge> edge_;
  double width_;
};

std::shared_ptr<const RadialShape> build_polygon(std::vector<double> corners,
                                                 std::vector<Edge> edges,
                                                 double smoothing) {
  const int m = static_cast<int>(corners.size());
  for (int i = 0; i < m; ++i) {
    const double span = (i + 1 < m ? corners[i + 1] : corners[0] + kTwoPi) -
                        corners[i];
    if (span <= 0.0 || span >= M_PI)
      throw std::invalid_argument("polygon edge must span (0, pi) in angle");
    if (smoothing > 0.0 && span <= 2.0 * smoothing)
      throw std::invalid_argument("corner smoothing windows overlap");
    if (edges[i].d <= 0.0)
      throw std::invalid_argument("polygon edge passes through the center");
  }
  return std::make_shared<PolygonShape>(std::move(corners), std::move(edges),
                                        smoothing);
}

std::shared_ptr<const RadialShape> build(const CircleSpec& s) {
  if (s.radius <= 0.0) throw std::invalid_argument("circle radius must be positive");
  return std::make_shared<CircleShape>(s.radius);
}

std::shared_ptr<const RadialShape> build(const EllipseSpec& s) {
  if (s.semi_x <= 0.0 || s.semi_y <= 0.0)
    throw std::invalid_argument("ellipse semi-axes must be positive");
  return std::make_shared<EllipseShape>(s.semi_x, s.semi_y, s.rotation);
}

std::shared_ptr<const RadialShape> build(const RectangleSpec& s) {
  if (s.half_width <= 0.0 || s.half_height <= 0.0)
    throw std::invalid_argument("rectangle half extents must be positive");
  if (s.smoothing < 0.0) throw std::invalid_argument("smoothing must be >= 0");
  const double pc = std::atan2(s.half_height, s.half_width);
  // Corners ordered in [-pi, pi); edge i covers [corner i, corner i+1].
  std::vector<double> corners = {-M_PI + pc, -pc, pc, M_PI - pc};
  std::vector<Edge> edges = {
      {s.half_height, -M_PI / 2.0},  // bottom
      {s.half_width, 0.0},           // right
      {s.half_height, M_PI / 2.0},   // top
      {s.half_width, M_PI},          // left
  };
  for (Edge& e : edges) e.beta += s.rotation;
  // Rotating shifts all corners by the same amount, so wrapping them into a
  // 2*pi window anchored at the first corner keeps them increasing and keeps
  // edge i between corners i and i+1.
  const double lo = wrap_to(corners[0] + s.rotation, -M_PI);
  for (double& c : corners) c = wrap_to(c + s.rotation, lo);
  return build_polygon(std::move(corners), std::move(edges), s.smoothing);
}

std::shared_ptr<const RadialShape> build(const StarPolygonSpec& s) {
  const int m = static_cast<int>(s.angles.size());
  if (m < 3) throw std::invalid_argument("star polygon needs at least 3 vertices");
  if (s.radii.size() != s.angles.size())
    throw std::invalid_argument("star polygon angle/radius lists differ in size");
  if (s.smoothing < 0.0) throw std::invalid_argument("smoothing must be >= 0");
  for (int i = 0; i < m; ++i) {
    if (s.radii[i] <= 0.0)
      throw std::invalid_argument("star polygon radii must be positive");
    if (i > 0 && s.angles[i] <= s.angles[i - 1])
      throw std::invalid_argument("star polygon angles must be strictly increasing");
  }
  if (s.angles[m - 1] - s.angles[0] >= kTwoPi)
    throw std::invalid_argument("star polygon angles must span less than 2*pi");

  std::vector<double> corners = s.angles;
  std::vector<Edge> edges(m);
  for (int i = 0; i < m; ++i) {
    const int j = (i + 1) % m;
    const double aj = s.angles[j] + (j == 0 ? kTwoPi : 0.0);
    const Vec2 pi{s.radii[i] * std::cos(s.angles[i]),
                  s.radii[i] * std::sin(s.angles[i])};
    const Vec2 pj{s.radii[j] * std::cos(aj), s.radii[j] * std::sin(aj)};
    const Vec2 dir = pj - pi;
    const double len = dir.norm();
    if (len <= 0.0) throw std::invalid_argument("degenerate star polygon edge");
    Vec2 normal{dir.y / len, -dir.x / len};
    double d = pi.x * normal.x + pi.y * normal.y;
    if (d < 0.0) {
      normal = {-normal.x, -normal.y};
      d = -d;
    }
    edges[i] = {d, std::atan2(normal.y, normal.x)};
  }
  return build_polygon(std::move(corners), std::move(edges), s.smoothing);
}

}  // namespace

Vec2 StarObstacle::boundary_point(double phi) const {
  const double rho = radial(phi).rho;
  return {center_.x + rho * std::cos(phi), center_.y + rho * std::sin(phi)};
}

StarObstacle make_obstacle(Vec2 center, const ShapeSpec& spec) {
  auto shape = std::visit([](const auto& s) { return build(s); }, spec);
  return StarObstacle(center, std::move(shape));
}

double clearance(const StarObstacle& o, Vec2 r) {
  const Vec2 d = r - o.center();
  if (d.x == 0.0 && d.y == 0.0) throw CenterQueryError();
  return d.norm() - o.radial(std::atan2(d.y, d.x)).rho;
}

Vec2 clearance_gradient(const StarObstacle& o, Vec2 r) {
  const Vec2 d = r - o.center();
  if (d.x == 0.0 && d.y == 0.0) throw CenterQueryError();
  const double n = d.norm();
  const double n2 = n * n;
  const RadialEval e = o.radial(std::atan2(d.y, d.x));
  return {d.x / n + e.drho * d.y / n2, d.y / n - e.drho * d.x / n2};
}

SymMat2 clearance_hessian(const StarObstacle& o, Vec2 r) {
  const Vec2 d = r - o.center();
  if (d.x == 0.0 && d.y == 0.0) throw CenterQueryError();
  const double n = d.norm();
  const double n3 = n * n * n;
  const double n4 = n3 * n;
  const RadialEval e = o.radial(std::atan2(d.y, d.x));
  const double a = (1.0 - e.ddrho / n) / n3;
  const double b = e.drho / n4;
  SymMat2 h;
  h.xx = a * d.y * d.y - b * 2.0 * d.x * d.y;
  h.xy = -a * d.x * d.y - b * (d.y * d.y - d.x * d.x);
  h.yy = a * d.x * d.x + b * 2.0 * d.x * d.y;
  return h;
}

}  // namespace ctraj
