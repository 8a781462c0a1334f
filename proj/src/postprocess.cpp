#include "ctraj/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

#include "ctraj/quadrature.hpp"

namespace ctraj {

namespace {

// Table knots in u: all element boundaries plus interior points.  Inside a
// singular boundary element the knots follow the cube of a uniform grid,
// which spaces them at roughly equal increments of t since t ~ u^(1/3)
// there.
std::vector<double> table_knots(const SolvedPath& path, int samples) {
  const int n = path.mesh.n;
  const int intervals = std::max(samples - 1, n);
  const int base = intervals / n;
  const int rem = intervals % n;
  const double h = path.mesh.h();
  std::vector<double> u;
  u.reserve(intervals + 1);
  u.push_back(0.0);
  for (int e = 0; e < n; ++e) {
    const int k = base + (e < rem ? 1 : 0);
    for (int i = 1; i <= k; ++i) {
      double xi = static_cast<double>(i) / k;
      if (e == 0 && path.v.singular_left) {
        xi = xi * xi * xi;
      } else if (e == n - 1 && path.v.singular_right) {
        const double r = 1.0 - xi;
        xi = 1.0 - r * r * r;
      }
      u.push_back(h * (e + xi));
    }
  }
  u.back() = 1.0;
  return u;
}

[[noreturn]] void fail_nonpositive_speed(double u) {
  char buf[96];
  std::snprintf(buf, sizeof buf,
                "time map diverges: speed is not positive at u = %.6g", u);
  throw std::domain_error(buf);
}

// Time spent on [ua, ub], which must lie inside one element.  On a singular
// boundary element the integral runs over w with u = h w^3 (mirrored on the
// right), so the 1/v ~ u^(-2/3) blow-up cancels against the Jacobian.
double segment_time(const SolvedPath& path, double ua, double ub) {
  const QuadratureRule& q = gauss12();
  const Mesh& m = path.mesh;
  const double h = m.h();
  int e;
  double xi_mid;
  m.locate(0.5 * (ua + ub), e, xi_mid);
  const bool left = path.v.singular_left && e == 0;
  const bool right = path.v.singular_right && e == m.n - 1;
  double acc = 0.0;
  if (left || right) {
    const double wa = std::cbrt((left ? ua : 1.0 - ub) / h);
    const double wb = std::cbrt((left ? ub : 1.0 - ua) / h);
    for (int k = 0; k < QuadratureRule::kPoints; ++k) {
      const double w = wa + (wb - wa) * q.xi[k];
      const double uu = left ? h * w * w * w : 1.0 - h * w * w * w;
      const double v = evaluate_field(m, path.v, uu).value;
      if (!(v > 0.0)) fail_nonpositive_speed(uu);
      acc += q.weight[k] * 3.0 * h * w * w / v;
    }
    return path.lambda * (wb - wa) * acc;
  }
  for (int k = 0; k < QuadratureRule::kPoints; ++k) {
    const double uu = ua + (ub - ua) * q.xi[k];
    const double v = evaluate_field(m, path.v, uu).value;
    if (!(v > 0.0)) fail_nonpositive_speed(uu);
    acc += q.weight[k] / v;
  }
  return path.lambda * (ub - ua) * acc;
}

double interpolate(const std::vector<double>& from, const std::vector<double>& to,
                   double q) {
  if (q <= from.front()) return to.front();
  if (q >= from.back()) return to.back();
  const auto it = std::upper_bound(from.begin(), from.end(), q);
  const std::size_t j = static_cast<std::size_t>(it - from.begin());
  const double span = from[j] - from[j - 1];
  const double f = span > 0.0 ? (q - from[j - 1]) / span : 0.0;
  return to[j - 1] + f * (to[j] - to[j - 1]);
}

}  // namespace

SolvedPath solved_path(const PlanningProblem& p, const DofLayout& layout,
                       const Eigen::VectorXd& x) {
  const Eigen::VectorXd full = layout.expand(x);
  const int nc = 2 * (layout.n + 1);
  SolvedPath out;
  out.mesh.n = layout.n;
  out.theta.c = full.head(nc);
  out.v.c = full.segment(nc, nc);
  out.v.singular_left = layout.singular_left;
  out.v.singular_right = layout.singular_right;
  out.lambda = full[layout.lambda_slot()];
  out.origin = {p.start.x, p.start.y};
  return out;
}

double TimeTable::time_at(double uq) const { return interpolate(u, t, uq); }

double TimeTable::u_at(double tq) const { return interpolate(t, u, tq); }

TimeTable time_map(const SolvedPath& path, int samples) {
  if (samples < 2) throw std::invalid_argument("time_map needs samples >= 2");
  if (!(path.lambda > 0.0))
    throw std::domain_error("time map needs a positive path length");
  TimeTable table;
  table.u = table_knots(path, samples);
  table.t.resize(table.u.size());
  table.t[0] = 0.0;
  for (std::size_t i = 1; i < table.u.size(); ++i)
    table.t[i] = table.t[i - 1] + segment_time(path, table.u[i - 1], table.u[i]);
  return table;
}

CostReport cost_report(const DiscomfortNlp& nlp, const Eigen::VectorXd& x,
                       const TimeTable& table) {
  DiscomfortNlp::Components c;
  if (!nlp.components(x, c))
    throw std::domain_error("cost components are not finite at this point");
  CostReport report;
  report.tau = table.tau();
  report.jerk_t = c.jerk_t_raw;
  report.jerk_n = c.jerk_n_raw;
  report.total = c.time + nlp.weights().w_t * c.jerk_t_raw +
                 nlp.weights().w_n * c.jerk_n_raw;
  return report;
}

TrajectoryTable sample_trajectory(const SolvedPath& path,
                                  const TimeTable& table, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("sample step must be positive");
  if (table.u.size() < 2 || table.u.size() != table.t.size())
    throw std::invalid_argument("malformed time table");
  const Mesh& m = path.mesh;
  auto theta_of = [&](double uu) { return evaluate_field(m, path.theta, uu).value; };

  // Positions at the table knots, accumulated once; rows then only need a
  // short correction integral from the nearest knot.
  std::vector<Vec2> pos(table.u.size());
  pos[0] = path.origin;
  for (std::size_t i = 1; i < pos.size(); ++i)
    pos[i] = pos[i - 1] + position_increment(theta_of, path.lambda,
                                             table.u[i - 1], table.u[i]);

  const double tau = table.tau();
  auto row_at = [&](double t) {
    TrajectoryRow row;
    row.t = t;
    const double uq = table.u_at(t);
    const auto it = std::upper_bound(table.u.begin(), table.u.end(), uq);
    const std::size_t j = static_cast<std::size_t>(it - table.u.begin()) - 1;
    Vec2 r = pos[j];
    if (uq > table.u[j])
      r = r + position_increment(theta_of, path.lambda, table.u[j], uq);
    row.x = r.x;
    row.y = r.y;
    const FieldSample th = evaluate_field(m, path.theta, uq);
    row.theta = th.value;
    if ((uq <= 0.0 && path.v.singular_left) ||
        (uq >= 1.0 && path.v.singular_right)) {
      // Zero-speed limits: v ~ u^(2/3) makes v v', v^2 theta' and v theta'
      // all vanish at the endpoint even though v' blows up.
      row.kappa = th.du / path.lambda;
      return row;
    }
    const FieldSample vs = evaluate_field(m, path.v, uq);
    const KinematicSample s{vs.value, vs.du, vs.duu, th.du, th.duu, path.lambda};
    row.v = vs.value;
    row.a_t = tangential_acceleration(s);
    row.a_n = normal_acceleration(s);
    row.kappa = curvature(s);
    row.omega = angular_speed(s);
    return row;
  };

  TrajectoryTable out;
  const double fuzz = 1e-12 * std::max(tau, 1.0);
  for (int i = 0;; ++i) {
    const double t = dt * i;
    if (t >= tau - fuzz) break;
    out.rows.push_back(row_at(t));
  }
  out.rows.push_back(row_at(tau));
  return out;
}

void write_csv(std::ostream& os, const TrajectoryTable& table) {
  os << "t,x,y,theta,v,a_t,a_n,kappa,omega\n";
  char buf[256];
  for (const TrajectoryRow& r : table.rows) {
    std::snprintf(buf, sizeof buf,
                  "%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.t, r.x,
                  r.y, r.theta, r.v, r.a_t, r.a_n, r.kappa, r.omega);
    os << buf;
  }
}

}  // namespace ctraj
