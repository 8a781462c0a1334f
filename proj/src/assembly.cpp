#include "ctraj/assembly.hpp"

#include <cmath>
#include <limits>

#include "ctraj/quadrature.hpp"

namespace ctraj {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kQ = QuadratureRule::kPoints;

// z-space ordering used for the objective integrand: v, v', v'', th', th'',
// lambda.
using ZGrad = Eigen::Matrix<double, 6, 1>;
using ZHess = Eigen::Matrix<double, 6, 6>;
using ModeMap = Eigen::Matrix<double, 6, 9>;

struct ZVal {
  double v{0.0}, vp{0.0}, vpp{0.0}, tp{0.0}, tpp{0.0};
};

// Value, gradient and Hessian of the weighted integrand
//   lam/v + wt (v/lam^3) g^2 + wn (v^3/lam^3) hh^2
// with g = v'^2 + v v'' - v^2 th'^2 and hh = 3 v' th' + v th''.
// grad/hess may be null.  Returns false when v <= 0.
bool integrand(const ZVal& z, double lam, double wt, double wn, double& value,
               ZGrad* grad, ZHess* hess) {
  if (z.v <= 0.0 || lam <= 0.0) return false;
  const double v = z.v, vp = z.vp, vpp = z.vpp, tp = z.tp, tpp = z.tpp;
  const double v2 = v * v, v3 = v2 * v;
  const double l3 = lam * lam * lam, l4 = l3 * lam, l5 = l4 * lam;
  const double g = vp * vp + v * vpp - v2 * tp * tp;
  const double hh = 3.0 * vp * tp + v * tpp;

  value = lam / v + wt * v * g * g / l3 + wn * v3 * hh * hh / l3;
  if (!grad && !hess) return true;

  const double g_v = vpp - 2.0 * v * tp * tp;
  const double g_vp = 2.0 * vp;
  const double g_vpp = v;
  const double g_tp = -2.0 * v2 * tp;
  const double h_v = tpp;
  const double h_vp = 3.0 * tp;
  const double h_tp = 3.0 * vp;
  const double h_tpp = v;
  const double pt = wt / l3;
  const double pn = wn / l3;

  if (grad) {
    ZGrad& gr = *grad;
    gr.setZero();
    gr[0] = -lam / v2 + pt * (g * g + 2.0 * v * g * g_v) +
            pn * (3.0 * v2 * hh * hh + 2.0 * v3 * hh * h_v);
    gr[1] = pt * 2.0 * v * g * g_vp + pn * 2.0 * v3 * hh * h_vp;
    gr[2] = pt * 2.0 * v * g * g_vpp;
    gr[3] = pt * 2.0 * v * g * g_tp + pn * 2.0 * v3 * hh * h_tp;
    gr[4] = pn * 2.0 * v3 * hh * h_tpp;
    gr[5] = 1.0 / v - 3.0 * wt * v * g * g / l4 - 3.0 * wn * v3 * hh * hh / l4;
  }

  if (hess) {
    ZHess& H = *hess;
    H.setZero();
    // time term
    H(0, 0) += 2.0 * lam / (v2 * v);
    H(0, 5) += -1.0 / v2;
    // tangential jerk term
    H(0, 0) += pt * (4.0 * g * g_v + 2.0 * v * g_v * g_v + 2.0 * v * g * (-2.0 * tp * tp));
    H(0, 1) += pt * (2.0 * g * g_vp + 2.0 * v * g_v * g_vp);
    H(0, 2) += pt * (2.0 * g * g_vpp + 2.0 * v * g_v * g_vpp + 2.0 * v * g);
    H(0, 3) += pt * (2.0 * g * g_tp + 2.0 * v * g_v * g_tp + 2.0 * v * g * (-4.0 * v * tp));
    H(1, 1) += pt * 2.0 * v * (g_vp * g_vp + 2.0 * g);
    H(1, 2) += pt * 2.0 * v * g_vp * g_vpp;
    H(1, 3) += pt * 2.0 * v * g_vp * g_tp;
    H(2, 2) += pt * 2.0 * v * g_vpp * g_vpp;
    H(2, 3) += pt * 2.0 * v * g_vpp * g_tp;
    H(3, 3) += pt * 2.0 * v * (g_tp * g_tp + g * (-2.0 * v2));
    H(0, 5) += -3.0 * wt / l4 * (g * g + 2.0 * v * g * g_v);
    H(1, 5) += -6.0 * wt / l4 * v * g * g_vp;
    H(2, 5) += -6.0 * wt / l4 * v * g * g_vpp;
    H(3, 5) += -6.0 * wt / l4 * v * g * g_tp;
    H(5, 5) += 12.0 * wt / l5 * v * g * g;
    // normal jerk term
    H(0, 0) += pn * (6.0 * v * hh * hh + 12.0 * v2 * hh * h_v + 2.0 * v3 * h_v * h_v);
    H(0, 1) += pn * (6.0 * v2 * hh * h_vp + 2.0 * v3 * h_vp * h_v);
    H(0, 3) += pn * (6.0 * v2 * hh * h_tp + 2.0 * v3 * h_tp * h_v);
    H(0, 4) += pn * (6.0 * v2 * hh * h_tpp + 2.0 * v3 * (h_tpp * h_v + hh));
    H(1, 1) += pn * 2.0 * v3 * h_vp * h_vp;
    H(1, 3) += pn * 2.0 * v3 * (h_vp * h_tp + 3.0 * hh);
    H(1, 4) += pn * 2.0 * v3 * h_vp * h_tpp;
    H(3, 3) += pn * 2.0 * v3 * h_tp * h_tp;
    H(3, 4) += pn * 2.0 * v3 * h_tp * h_tpp;
    H(4, 4) += pn * 2.0 * v3 * h_tpp * h_tpp;
    H(0, 5) += -3.0 * wn / l4 * (3.0 * v2 * hh * hh + 2.0 * v3 * hh * h_v);
    H(1, 5) += -6.0 * wn / l4 * v3 * hh * h_vp;
    H(3, 5) += -6.0 * wn / l4 * v3 * hh * h_tp;
    H(4, 5) += -6.0 * wn / l4 * v3 * hh * h_tpp;
    H(5, 5) += 12.0 * wn / l5 * v3 * hh * hh;
    // mirror the upper triangle
    for (int i = 0; i < 6; ++i)
      for (int j = i + 1; j < 6; ++j) H(j, i) = H(i, j);
  }
  return true;
}

}  // namespace

DiscomfortNlp::DiscomfortNlp(const PlanningProblem& p, double theta_end,
                             const AssemblyOptions& opt)
    : p_(p), layout_(dof_layout(p, theta_end)), mesh_{p.disc.n} {
  scales_ = characteristic_scales(p);
  base_ = base_weight(scales_);
  weights_ = opt.use_weights_override ? opt.weights_override
                                      : effective_weights(base_, p.weights);
  dynamic_rows_ = opt.dynamic_rows;
  kappa_box_ = std::max(std::abs(p.bounds.curvature_min),
                        std::abs(p.bounds.curvature_max));

  const int n = layout_.n;
  const double h = mesh_.h();
  const auto& q = gauss12();

  elems_.resize(n);
  for (int e = 0; e < n; ++e) {
    ElementCache& ec = elems_[e];
    ec.slots = {layout_.theta_value(e),     layout_.theta_slope(e),
                layout_.theta_value(e + 1), layout_.theta_slope(e + 1),
                layout_.v_value(e),         layout_.v_slope(e),
                layout_.v_value(e + 1),     layout_.v_slope(e + 1),
                layout_.lambda_slot()};
    const ElementBasis kv =
        element_kind(mesh_, layout_.singular_left, layout_.singular_right, e);
    for (int k = 0; k < kQ; ++k) {
      ec.bt[k] = element_basis(h, ElementBasis::hermite, q.xi[k]);
      ec.bv[k] = element_basis(h, kv, q.xi[k]);
    }
    ec.pt.resize(p.disc.p);
    ec.pv.resize(p.disc.p);
    for (int k = 0; k < p.disc.p; ++k) {
      const double xi = (k + 0.5) / p.disc.p;
      ec.pt[k] = element_basis(h, ElementBasis::hermite, xi);
      ec.pv[k] = element_basis(h, kv, xi);
    }
    ec.mid_t = element_basis(h, ElementBasis::hermite, 0.5);
  }

  // Subintervals between consecutive position points; each sits inside one
  // element because the points subdivide every element evenly.
  const int npts = layout_.num_points;
  const int per = (npts - 1) / n;
  subs_.resize(npts - 1);
  for (int j = 0; j + 1 < npts; ++j) {
    SubCache& sc = subs_[j];
    sc.element = j / per;
    sc.len = layout_.point_u(j + 1) - layout_.point_u(j);
    sc.tslots = {layout_.theta_value(sc.element), layout_.theta_slope(sc.element),
                 layout_.theta_value(sc.element + 1),
                 layout_.theta_slope(sc.element + 1)};
    const int local = j - sc.element * per;
    for (int k = 0; k < kQ; ++k) {
      const double xi = (local + q.xi[k]) / per;
      const BasisEval b = element_basis(h, ElementBasis::hermite, xi);
      sc.basis[k] = {b.value[0], b.value[1], b.value[2], b.value[3]};
      sc.weight[k] = q.weight[k] * sc.len;
    }
  }

  num_eq_ = 2 * (npts - 1);
  if (p.start.v > 0.0)
    couplings_.push_back({layout_.v_slope(0), p.start.v, -p.start.a_t});
  if (p.end.v > 0.0)
    couplings_.push_back({layout_.v_slope(n), p.end.v, -p.end.a_t});
  if (p.start.kappa != 0.0)
    couplings_.push_back({layout_.theta_slope(0), 1.0, -p.start.kappa});
  if (p.end.kappa != 0.0)
    couplings_.push_back({layout_.theta_slope(n), 1.0, -p.end.kappa});
  num_eq_ += static_cast<int>(couplings_.size());

  // Inequality bounds, in the fixed row order described in the header.
  std::vector<double> lo, hi;
  const DynamicBounds& b = p.bounds;
  if (dynamic_rows_) {
    for (int e = 0; e < n; ++e) {
      for (int k = 0; k < p.disc.p; ++k) {
        lo.push_back(b.speed_min);
        hi.push_back(b.speed_max);
        lo.push_back(b.accel_t_min);
        hi.push_back(b.accel_t_max);
        lo.push_back(b.accel_n_min);
        hi.push_back(b.accel_n_max);
        lo.push_back(b.angular_speed_min);
        hi.push_back(b.angular_speed_max);
        lo.push_back(b.curvature_min);
        hi.push_back(b.curvature_max);
      }
    }
    for (int e = 0; e < n; ++e) {
      lo.push_back(0.0);
      hi.push_back(kInf);
    }
  }
  for (size_t o = 0; o < p.obstacles.size(); ++o) {
    for (int j = 0; j < npts; ++j) {
      lo.push_back(0.0);
      hi.push_back(kInf);
    }
  }
  num_ineq_ = static_cast<int>(lo.size());
  ineq_lower_.resize(num_ineq_);
  ineq_upper_.resize(num_ineq_);
  for (int i = 0; i < num_ineq_; ++i) {
    ineq_lower_[i] = lo[i];
    ineq_upper_[i] = hi[i];
  }

  // --- sparsity patterns; the eval loops mirror these exactly ---
  auto add = [&](SparsityPattern& pat, int row, int slot) {
    const int f = layout_.free_index[slot];
    if (f >= 0) pat.add(row, f);
  };

  for (int j = 0; j + 1 < npts; ++j) {
    const SubCache& sc = subs_[j];
    const int rx = 2 * j, ry = 2 * j + 1;
    add(eq_pattern_, rx, layout_.pos_x(j + 1));
    add(eq_pattern_, rx, layout_.pos_x(j));
    add(eq_pattern_, rx, layout_.lambda_slot());
    for (int t = 0; t < 4; ++t) add(eq_pattern_, rx, sc.tslots[t]);
    add(eq_pattern_, ry, layout_.pos_y(j + 1));
    add(eq_pattern_, ry, layout_.pos_y(j));
    add(eq_pattern_, ry, layout_.lambda_slot());
    for (int t = 0; t < 4; ++t) add(eq_pattern_, ry, sc.tslots[t]);
  }
  {
    int row = 2 * (npts - 1);
    for (const LinearRow& c : couplings_) {
      add(eq_pattern_, row, c.slot_a);
      add(eq_pattern_, row, layout_.lambda_slot());
      ++row;
    }
  }

  {
    int row = 0;
    if (dynamic_rows_) {
      for (int e = 0; e < n; ++e) {
        const auto& s = elems_[e].slots;
        for (int k = 0; k < p.disc.p; ++k) {
          for (int i = 4; i < 8; ++i) add(ineq_pattern_, row, s[i]);
          ++row;  // v
          for (int i = 4; i < 8; ++i) add(ineq_pattern_, row, s[i]);
          add(ineq_pattern_, row, s[8]);
          ++row;  // a_t
          for (int i = 4; i < 8; ++i) add(ineq_pattern_, row, s[i]);
          for (int i = 0; i < 4; ++i) add(ineq_pattern_, row, s[i]);
          add(ineq_pattern_, row, s[8]);
          ++row;  // a_n
          for (int i = 4; i < 8; ++i) add(ineq_pattern_, row, s[i]);
          for (int i = 0; i < 4; ++i) add(ineq_pattern_, row, s[i]);
          add(ineq_pattern_, row, s[8]);
          ++row;  // omega
          for (int i = 0; i < 4; ++i) add(ineq_pattern_, row, s[i]);
          add(ineq_pattern_, row, s[8]);
          ++row;  // kappa
        }
      }
      for (int e = 0; e < n; ++e) {
        const auto& s = elems_[e].slots;
        for (int i = 0; i < 4; ++i) add(ineq_pattern_, row, s[i]);
        add(ineq_pattern_, row, s[8]);
        ++row;  // curvature cap
      }
    }
    for (size_t o = 0; o < p.obstacles.size(); ++o) {
      for (int j = 0; j < npts; ++j) {
        add(ineq_pattern_, row, layout_.pos_x(j));
        add(ineq_pattern_, row, layout_.pos_y(j));
        ++row;
      }
    }
  }

  // Hessian pattern: lower-triangle pairs of each block's slot list, blocks
  // in the same order eval_hessian emits them.  Duplicate coordinates are
  // fine; consumers accumulate.
  auto add_block = [&](const int* slots, int count) {
    for (int i = 0; i < count; ++i) {
      for (int j = 0; j <= i; ++j) {
        const int fi = layout_.free_index[slots[i]];
        const int fj = layout_.free_index[slots[j]];
        if (fi >= 0 && fj >= 0) hess_pattern_.add(fi, fj);
      }
    }
  };
  for (int e = 0; e < n; ++e) add_block(elems_[e].slots.data(), 9);
  for (int j = 0; j + 1 < npts; ++j) {
    const SubCache& sc = subs_[j];
    const int s5[5] = {sc.tslots[0], sc.tslots[1], sc.tslots[2], sc.tslots[3],
                       layout_.lambda_slot()};
    add_block(s5, 5);  // x row
    add_block(s5, 5);  // y row
  }
  if (dynamic_rows_) {
    for (int e = 0; e < n; ++e) {
      const auto& s = elems_[e].slots;
      const int sv[5] = {s[4], s[5], s[6], s[7], s[8]};
      const int svt[9] = {s[4], s[5], s[6], s[7], s[0], s[1], s[2], s[3], s[8]};
      const int st[5] = {s[0], s[1], s[2], s[3], s[8]};
      for (int k = 0; k < p.disc.p; ++k) {
        add_block(sv, 5);   // a_t
        add_block(svt, 9);  // a_n
        add_block(svt, 9);  // omega
        add_block(st, 5);   // kappa
      }
    }
    for (int e = 0; e < n; ++e) {
      const auto& s = elems_[e].slots;
      const int st[5] = {s[0], s[1], s[2], s[3], s[8]};
      add_block(st, 5);  // curvature cap
    }
  }
  for (size_t o = 0; o < p_.obstacles.size(); ++o) {
    for (int j = 0; j < npts; ++j) {
      const int sp[2] = {layout_.pos_x(j), layout_.pos_y(j)};
      add_block(sp, 2);
    }
  }
}

int DiscomfortNlp::num_vars() const { return layout_.num_free(); }
int DiscomfortNlp::num_eq() const { return num_eq_; }
int DiscomfortNlp::num_ineq() const { return num_ineq_; }

void DiscomfortNlp::var_bounds(Eigen::VectorXd& lower,
                               Eigen::VectorXd& upper) const {
  lower = layout_.lower;
  upper = layout_.upper;
}

void DiscomfortNlp::ineq_bounds(Eigen::VectorXd& lower,
                                Eigen::VectorXd& upper) const {
  lower = ineq_lower_;
  upper = ineq_upper_;
}

Vec2 DiscomfortNlp::point_of(const Eigen::VectorXd& full, int j) const {
  return {full[layout_.pos_x(j)], full[layout_.pos_y(j)]};
}

Vec2 DiscomfortNlp::safe_query(const StarObstacle& o, Vec2 r) const {
  if (r.x == o.center().x && r.y == o.center().y) {
    ++center_events_;
    const double d = 1e-9 * scales_.length;
    return {r.x + d, r.y + d};
  }
  return r;
}

namespace {

void gather(const Eigen::VectorXd& full, const std::array<int, 9>& slots,
            double ct[4], double cv[4]) {
  for (int i = 0; i < 4; ++i) {
    ct[i] = full[slots[i]];
    cv[i] = full[slots[4 + i]];
  }
}

ZVal zval(const BasisEval& bt, const BasisEval& bv, const double ct[4],
          const double cv[4]) {
  ZVal z;
  for (int i = 0; i < 4; ++i) {
    z.v += cv[i] * bv.value[i];
    z.vp += cv[i] * bv.du[i];
    z.vpp += cv[i] * bv.duu[i];
    z.tp += ct[i] * bt.du[i];
    z.tpp += ct[i] * bt.duu[i];
  }
  return z;
}

ModeMap mode_map(const BasisEval& bt, const BasisEval& bv) {
  ModeMap m = ModeMap::Zero();
  for (int i = 0; i < 4; ++i) {
    m(0, 4 + i) = bv.value[i];
    m(1, 4 + i) = bv.du[i];
    m(2, 4 + i) = bv.duu[i];
    m(3, i) = bt.du[i];
    m(4, i) = bt.duu[i];
  }
  m(5, 8) = 1.0;
  return m;
}

}  // namespace

bool DiscomfortNlp::eval_objective(const Eigen::VectorXd& x, double& f) const {
  const Eigen::VectorXd full = layout_.expand(x);
  const double lam = full[layout_.lambda_slot()];
  const auto& q = gauss12();
  const double h = mesh_.h();
  f = 0.0;
  for (const ElementCache& ec : elems_) {
    double ct[4], cv[4];
    gather(full, ec.slots, ct, cv);
    for (int k = 0; k < kQ; ++k) {
      const ZVal z = zval(ec.bt[k], ec.bv[k], ct, cv);
      double val;
      if (!integrand(z, lam, weights_.w_t, weights_.w_n, val, nullptr, nullptr))
        return false;
      f += h * q.weight[k] * val;
    }
  }
  return std::isfinite(f);
}

bool DiscomfortNlp::components(const Eigen::VectorXd& x, Components& out) const {
  const Eigen::VectorXd full = layout_.expand(x);
  const double lam = full[layout_.lambda_slot()];
  const auto& q = gauss12();
  const double h = mesh_.h();
  out = {};
  for (const ElementCache& ec : elems_) {
    double ct[4], cv[4];
    gather(full, ec.slots, ct, cv);
    for (int k = 0; k < kQ; ++k) {
      const ZVal z = zval(ec.bt[k], ec.bv[k], ct, cv);
      if (z.v <= 0.0) return false;
      const double w = h * q.weight[k];
      const double l3 = lam * lam * lam;
      const double g = z.vp * z.vp + z.v * z.vpp - z.v * z.v * z.tp * z.tp;
      const double hh = 3.0 * z.vp * z.tp + z.v * z.tpp;
      out.time += w * lam / z.v;
      out.jerk_t_raw += w * z.v * g * g / l3;
      out.jerk_n_raw += w * z.v * z.v * z.v * hh * hh / l3;
    }
  }
  return std::isfinite(out.time) && std::isfinite(out.jerk_t_raw) &&
         std::isfinite(out.jerk_n_raw);
}

bool DiscomfortNlp::eval_objective_gradient(const Eigen::VectorXd& x,
                                            Eigen::VectorXd& grad) const {
  const Eigen::VectorXd full = layout_.expand(x);
  const double lam = full[layout_.lambda_slot()];
  const auto& q = gauss12();
  const double h = mesh_.h();
  grad = Eigen::VectorXd::Zero(layout_.num_free());
  for (const ElementCache& ec : elems_) {
    double ct[4], cv[4];
    gather(full, ec.slots, ct, cv);
    for (int k = 0; k < kQ; ++k) {
      const ZVal z = zval(ec.bt[k], ec.bv[k], ct, cv);
      double val;
      ZGrad gz;
      if (!integrand(z, lam, weights_.w_t, weights_.w_n, val, &gz, nullptr))
        return false;
      const ModeMap m = mode_map(ec.bt[k], ec.bv[k]);
      const Eigen::Matrix<double, 9, 1> gl = m.transpose() * gz;
      const double w = h * q.weight[k];
      for (int i = 0; i < 9; ++i) {
        const int fi = layout_.free_index[ec.slots[i]];
        if (fi >= 0) grad[fi] += w * gl[i];
      }
    }
  }
  return grad.allFinite();
}

bool DiscomfortNlp::eval_eq(const Eigen::VectorXd& x, Eigen::VectorXd& c) const {
  const Eigen::VectorXd full = layout_.expand(x);
  const double lam = full[layout_.lambda_slot()];
  c.resize(num_eq_);
  for (size_t j = 0; j < subs_.size(); ++j) {
    const SubCache& sc = subs_[j];
    double ct[4];
    for (int t = 0; t < 4; ++t) ct[t] = full[sc.tslots[t]];
    double qc = 0.0, qs = 0.0;
    for (int k = 0; k < kQ; ++k) {
      const double th = ct[0] * sc.basis[k][0] + ct[1] * sc.basis[k][1] +
                        ct[2] * sc.basis[k][2] + ct[3] * sc.basis[k][3];
      qc += sc.weight[k] * std::cos(th);
      qs += sc.weight[k] * std::sin(th);
    }
    const int jj = static_cast<int>(j);
    c[2 * jj] = full[layout_.pos_x(jj + 1)] - full[layout_.pos_x(jj)] - lam * qc;
    c[2 * jj + 1] =
        full[layout_.pos_y(jj + 1)] - full[layout_.pos_y(jj)] - lam * qs;
  }
  int row = 2 * static_cast<int>(subs_.size());
  for (const LinearRow& cr : couplings_) {
    c[row++] = cr.a * full[cr.slot_a] + cr.b * lam;
  }
  return c.allFinite();
}

bool DiscomfortNlp::eval_eq_jacobian(const Eigen::VectorXd& x,
                                     Eigen::VectorXd& values) const {
  const Eigen::VectorXd full = layout_.expand(x);
  const double lam = full[layout_.lambda_slot()];
  int idx = 0;
  auto emit = [&](int slot, double v) {
    if (layout_.free_index[slot] >= 0) values[idx++] = v;
  };
  for (size_t j = 0; j < subs_.size(); ++j) {
    const SubCache& sc = subs_[j];
    double ct[4];
    for (int t = 0; t < 4; ++t) ct[t] = full[sc.tslots[t]];
    double qc = 0.0, qs = 0.0, scv[4] = {0, 0, 0, 0}, ccv[4] = {0, 0, 0, 0};
    for (int k = 0; k < kQ; ++k) {
      const double th = ct[0] * sc.basis[k][0] + ct[1] * sc.basis[k][1] +
                        ct[2] * sc.basis[k][2] + ct[3] * sc.basis[k][3];
      const double cw = sc.weight[k] * std::cos(th);
      const double sw = sc.weight[k] * std::sin(th);
      qc += cw;
      qs += sw;
      for (int t = 0; t < 4; ++t) {
        scv[t] += sw * sc.basis[k][t];
        ccv[t] += cw * sc.basis[k][t];
      }
    }
    const int jj = static_cast<int>(j);
    emit(layout_.pos_x(jj + 1), 1.0);
    emit(layout_.pos_x(jj), -1.0);
    emit(layout_.lambda_slot(), -qc);
    for (int t = 0; t < 4; ++t) emit(sc.tslots[t], lam * scv[t]);
    emit(layout_.pos_y(jj + 1), 1.0);
    emit(layout_.pos_y(jj), -1.0);
    emit(layout_.lambda_slot(), -qs);
    for (int t = 0; t < 4; ++t) emit(sc.tslots[t], -lam * ccv[t]);
  }
  for (const LinearRow& cr : couplings_) {
    emit(cr.slot_a, cr.a);
    emit(layout_.lambda_slot(), cr.b);
  }
  return idx == eq_pattern_.size() &&
         values.head(idx).allFinite();
}

bool DiscomfortNlp::eval_ineq(const Eigen::VectorXd& x, Eigen::VectorXd& c) const {
  const Eigen::VectorXd full = layout_.expand(x);
  const double lam = full[layout_.lambda_slot()];
  c.resize(num_ineq_);
  int row = 0;
  if (dynamic_rows_) {
    for (const ElementCache& ec : elems_) {
      double ct[4], cv[4];
      gather(full, ec.slots, ct, cv);
      for (size_t k = 0; k < ec.pt.size(); ++k) {
        double v = 0.0, vp = 0.0, tp = 0.0;
        for (int i = 0; i < 4; ++i) {
          v += cv[i] * ec.pv[k].value[i];
          vp += cv[i] * ec.pv[k].du[i];
          tp += ct[i] * ec.pt[k].du[i];
        }
        c[row++] = v;
        c[row++] = v * vp / lam;
        c[row++] = v * v * tp / lam;
        c[row++] = v * tp / lam;
        c[row++] = tp / lam;
      }
    }
    for (const ElementCache& ec : elems_) {
      double tp = 0.0;
      for (int i = 0; i < 4; ++i) tp += full[ec.slots[i]] * ec.mid_t.du[i];
      c[row++] = lam * lam * kappa_box_ * kappa_box_ - tp * tp;
    }
  }
  for (const StarObstacle& o : p_.obstacles) {
    for (int j = 0; j < layout_.num_points; ++j) {
      c[row++] = clearance(o, safe_query(o, point_of(full, j)));
    }
  }
  return c.allFinite();
}

bool DiscomfortNlp::eval_ineq_jacobian(const Eigen::VectorXd& x,
                                       Eigen::VectorXd& values) const {
  const Eigen::VectorXd full = layout_.expand(x);
  const double lam = full[layout_.lambda_slot()];
  const double il = 1.0 / lam, il2 = il * il;
  int idx = 0;
  auto emit = [&](int slot, double v) {
    if (layout_.free_index[slot] >= 0) values[idx++] = v;
  };
  if (dynamic_rows_) {
    for (const ElementCache& ec : elems_) {
      const auto& s = ec.slots;
      double ct[4], cv[4];
      gather(full, s, ct, cv);
      for (size_t k = 0; k < ec.pt.size(); ++k) {
        const auto& bv = ec.pv[k];
        const auto& bt = ec.pt[k];
        double v = 0.0, vp = 0.0, tp = 0.0;
        for (int i = 0; i < 4; ++i) {
          v += cv[i] * bv.value[i];
          vp += cv[i] * bv.du[i];
          tp += ct[i] * bt.du[i];
        }
        // v row
        for (int i = 0; i < 4; ++i) emit(s[4 + i], bv.value[i]);
        // a_t row
        for (int i = 0; i < 4; ++i)
          emit(s[4 + i], il * (vp * bv.value[i] + v * bv.du[i]));
        emit(s[8], -v * vp * il2);
        // a_n row
        for (int i = 0; i < 4; ++i) emit(s[4 + i], 2.0 * v * tp * il * bv.value[i]);
        for (int i = 0; i < 4; ++i) emit(s[i], v * v * il * bt.du[i]);
        emit(s[8], -v * v * tp * il2);
        // omega row
        for (int i = 0; i < 4; ++i) emit(s[4 + i], tp * il * bv.value[i]);
        for (int i = 0; i < 4; ++i) emit(s[i], v * il * bt.du[i]);
        emit(s[8], -v * tp * il2);
        // kappa row
        for (int i = 0; i < 4; ++i) emit(s[i], il * bt.du[i]);
        emit(s[8], -tp * il2);
      }
    }
    for (const ElementCache& ec : elems_) {
      double tp = 0.0;
      for (int i = 0; i < 4; ++i) tp += full[ec.slots[i]] * ec.mid_t.du[i];
      for (int i = 0; i < 4; ++i) emit(ec.slots[i], -2.0 * tp * ec.mid_t.du[i]);
      emit(ec.slots[8], 2.0 * lam * kappa_box_ * kappa_box_);
    }
  }
  for (const StarObstacle& o : p_.obstacles) {
    for (int j = 0; j < layout_.num_points; ++j) {
      const Vec2 g = clearance_gradient(o, safe_query(o, point_of(full, j)));
      emit(layout_.pos_x(j), g.x);
      emit(layout_.pos_y(j), g.y);
    }
  }
  return idx == ineq_pattern_.size() && values.head(idx).allFinite();
}

bool DiscomfortNlp::eval_hessian(const Eigen::VectorXd& x, double sigma,
                                 const Eigen::VectorXd& y_eq,
                                 const Eigen::VectorXd& y_ineq,
                                 Eigen::VectorXd& values) const {
  const Eigen::VectorXd full = layout_.expand(x);
  const double lam = full[layout_.lambda_slot()];
  const double il = 1.0 / lam, il2 = il * il, il3 = il2 * il;
  const auto& q = gauss12();
  const double h = mesh_.h();
  int idx = 0;

  // Emits the lower triangle of a dense local block, skipping fixed slots,
  // in the same order the pattern was built.
  auto emit_block = [&](const int* slots, const double* dense, int count) {
    for (int i = 0; i < count; ++i) {
      for (int j = 0; j <= i; ++j) {
        if (layout_.free_index[slots[i]] >= 0 &&
            layout_.free_index[slots[j]] >= 0) {
          values[idx++] = dense[i * count + j];
        }
      }
    }
  };

  // objective blocks
  for (const ElementCache& ec : elems_) {
    double ct[4], cv[4];
    gather(full, ec.slots, ct, cv);
    Eigen::Matrix<double, 9, 9> Hl = Eigen::Matrix<double, 9, 9>::Zero();
    for (int k = 0; k < kQ; ++k) {
      const ZVal z = zval(ec.bt[k], ec.bv[k], ct, cv);
      double val;
      ZHess Hz;
      if (!integrand(z, lam, weights_.w_t, weights_.w_n, val, nullptr, &Hz))
        return false;
      const ModeMap m = mode_map(ec.bt[k], ec.bv[k]);
      Hl.noalias() += (h * q.weight[k] * sigma) * (m.transpose() * Hz * m);
    }
    emit_block(ec.slots.data(), Hl.data(), 9);
  }

  // chain rows
  for (size_t j = 0; j < subs_.size(); ++j) {
    const SubCache& sc = subs_[j];
    double ct[4];
    for (int t = 0; t < 4; ++t) ct[t] = full[sc.tslots[t]];
    double scv[4] = {0, 0, 0, 0}, ccv[4] = {0, 0, 0, 0};
    double snn[4][4] = {}, cnn[4][4] = {};
    for (int k = 0; k < kQ; ++k) {
      const double th = ct[0] * sc.basis[k][0] + ct[1] * sc.basis[k][1] +
                        ct[2] * sc.basis[k][2] + ct[3] * sc.basis[k][3];
      const double cw = sc.weight[k] * std::cos(th);
      const double sw = sc.weight[k] * std::sin(th);
      for (int a = 0; a < 4; ++a) {
        scv[a] += sw * sc.basis[k][a];
        ccv[a] += cw * sc.basis[k][a];
        for (int b = 0; b < 4; ++b) {
          snn[a][b] += sw * sc.basis[k][a] * sc.basis[k][b];
          cnn[a][b] += cw * sc.basis[k][a] * sc.basis[k][b];
        }
      }
    }
    const int s5[5] = {sc.tslots[0], sc.tslots[1], sc.tslots[2], sc.tslots[3],
                       layout_.lambda_slot()};
    const double yx = y_eq[2 * j];
    double dx[25] = {};
    for (int a = 0; a < 4; ++a) {
      for (int b = 0; b < 4; ++b) dx[a * 5 + b] = yx * lam * cnn[a][b];
      dx[4 * 5 + a] = yx * scv[a];
      dx[a * 5 + 4] = yx * scv[a];
    }
    emit_block(s5, dx, 5);
    const double yy = y_eq[2 * j + 1];
    double dy[25] = {};
    for (int a = 0; a < 4; ++a) {
      for (int b = 0; b < 4; ++b) dy[a * 5 + b] = yy * lam * snn[a][b];
      dy[4 * 5 + a] = -yy * ccv[a];
      dy[a * 5 + 4] = -yy * ccv[a];
    }
    emit_block(s5, dy, 5);
  }

  // dynamic rows
  int row = 0;
  if (dynamic_rows_) {
    const int np = static_cast<int>(elems_[0].pt.size());
    for (const ElementCache& ec : elems_) {
      const auto& s = ec.slots;
      const int sv[5] = {s[4], s[5], s[6], s[7], s[8]};
      const int svt[9] = {s[4], s[5], s[6], s[7], s[0], s[1], s[2], s[3], s[8]};
      const int st[5] = {s[0], s[1], s[2], s[3], s[8]};
      double ct[4], cv[4];
      gather(full, s, ct, cv);
      for (int k = 0; k < np; ++k) {
        const auto& bv = ec.pv[k];
        const auto& bt = ec.pt[k];
        double v = 0.0, vp = 0.0, tp = 0.0;
        for (int i = 0; i < 4; ++i) {
          v += cv[i] * bv.value[i];
          vp += cv[i] * bv.du[i];
          tp += ct[i] * bt.du[i];
        }
        const double y_at = y_ineq[row + 1];
        const double y_an = y_ineq[row + 2];
        const double y_w = y_ineq[row + 3];
        const double y_k = y_ineq[row + 4];
        row += 5;

        // a_t = v v' / lam over (v4, lam)
        double at[25] = {};
        for (int a = 0; a < 4; ++a) {
          for (int b = 0; b < 4; ++b) {
            at[a * 5 + b] = y_at * il *
                            (bv.value[a] * bv.du[b] + bv.du[a] * bv.value[b]);
          }
          const double cross = -y_at * il2 * (vp * bv.value[a] + v * bv.du[a]);
          at[a * 5 + 4] = cross;
          at[4 * 5 + a] = cross;
        }
        at[24] = y_at * 2.0 * v * vp * il3;
        emit_block(sv, at, 5);

        // a_n = v^2 th' / lam over (v4, th4, lam)
        double an[81] = {};
        for (int a = 0; a < 4; ++a) {
          for (int b = 0; b < 4; ++b) {
            an[a * 9 + b] = y_an * 2.0 * tp * il * bv.value[a] * bv.value[b];
            const double vt = y_an * 2.0 * v * il * bv.value[a] * bt.du[b];
            an[a * 9 + (4 + b)] = vt;
            an[(4 + b) * 9 + a] = vt;
          }
          const double vl = -y_an * 2.0 * v * tp * il2 * bv.value[a];
          an[a * 9 + 8] = vl;
          an[8 * 9 + a] = vl;
          const double tl = -y_an * v * v * il2 * bt.du[a];
          an[(4 + a) * 9 + 8] = tl;
          an[8 * 9 + (4 + a)] = tl;
        }
        an[80] = y_an * 2.0 * v * v * tp * il3;
        emit_block(svt, an, 9);

        // omega = v th' / lam over (v4, th4, lam)
        double om[81] = {};
        for (int a = 0; a < 4; ++a) {
          for (int b = 0; b < 4; ++b) {
            const double vt = y_w * il * bv.value[a] * bt.du[b];
            om[a * 9 + (4 + b)] = vt;
            om[(4 + b) * 9 + a] = vt;
          }
          const double vl = -y_w * tp * il2 * bv.value[a];
          om[a * 9 + 8] = vl;
          om[8 * 9 + a] = vl;
          const double tl = -y_w * v * il2 * bt.du[a];
          om[(4 + a) * 9 + 8] = tl;
          om[8 * 9 + (4 + a)] = tl;
        }
        om[80] = y_w * 2.0 * v * tp * il3;
        emit_block(svt, om, 9);

        // kappa = th' / lam over (th4, lam)
        double kp[25] = {};
        for (int a = 0; a < 4; ++a) {
          const double tl = -y_k * il2 * bt.du[a];
          kp[a * 5 + 4] = tl;
          kp[4 * 5 + a] = tl;
        }
        kp[24] = y_k * 2.0 * tp * il3;
        emit_block(st, kp, 5);
      }
    }
    for (const ElementCache& ec : elems_) {
      const auto& s = ec.slots;
      const int st[5] = {s[0], s[1], s[2], s[3], s[8]};
      const double y = y_ineq[row++];
      double mp[25] = {};
      for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) {
          mp[a * 5 + b] = -2.0 * y * ec.mid_t.du[a] * ec.mid_t.du[b];
        }
      }
      mp[24] = 2.0 * y * kappa_box_ * kappa_box_;
      emit_block(st, mp, 5);
    }
  }

  // obstacle rows
  for (const StarObstacle& o : p_.obstacles) {
    for (int j = 0; j < layout_.num_points; ++j) {
      const double y = y_ineq[row++];
      const SymMat2 m = clearance_hessian(o, safe_query(o, point_of(full, j)));
      const int sp[2] = {layout_.pos_x(j), layout_.pos_y(j)};
      const double d[4] = {y * m.xx, y * m.xy, y * m.xy, y * m.yy};
      emit_block(sp, d, 2);
    }
  }

  return idx == hess_pattern_.size() && values.head(idx).allFinite();
}

const SparsityPattern& DiscomfortNlp::eq_jacobian_pattern() const {
  return eq_pattern_;
}
const SparsityPattern& DiscomfortNlp::ineq_jacobian_pattern() const {
  return ineq_pattern_;
}
const SparsityPattern& DiscomfortNlp::hessian_pattern() const {
  return hess_pattern_;
}

}  // namespace ctraj
