#include "ctraj/solver.hpp"

#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace ctraj {

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::iteration_limit: return "iteration_limit";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

// Interior-point working state and machinery.  Inequalities are shifted to
// slacks (c_ineq(x) = s), and every finite bound side of x and s carries a
// log barrier with its own dual z.
class InteriorPoint {
 public:
  InteriorPoint(const NlpProblem& p, const SolverOptions& opt)
      : p_(p), opt_(opt), n_(p.num_vars()), me_(p.num_eq()), mi_(p.num_ineq()) {
    p_.var_bounds(xl_, xu_);
    p_.ineq_bounds(il_, iu_);
    // Work against slightly relaxed copies of finite nonzero bounds.  A bound
    // that the equalities also pin to within machine precision would force
    // its barrier dual, and through it the equality multipliers, sky high
    // while mu is still moderate; widening by a relative hair keeps that
    // degeneracy out of the barrier.  Zero bounds stay exact because the
    // evaluators rely on their signs.
    const double relax = 1e-8;
    for (int i = 0; i < n_; ++i) {
      if (xl_[i] > -kInf) xl_[i] -= relax * std::abs(xl_[i]);
      if (xu_[i] < kInf) xu_[i] += relax * std::abs(xu_[i]);
    }
    for (int r = 0; r < mi_; ++r) {
      if (il_[r] > -kInf) il_[r] -= relax * std::abs(il_[r]);
      if (iu_[r] < kInf) iu_[r] += relax * std::abs(iu_[r]);
    }
    g_.resize(n_);
    ce_.resize(me_);
    ci_.resize(mi_);
    je_.resize(p_.eq_jacobian_pattern().size());
    ji_.resize(p_.ineq_jacobian_pattern().size());
    hv_.resize(p_.hessian_pattern().size());
  }

  SolveReport run(const Eigen::VectorXd& x0);

 private:
  // Pointwise evaluations at x (values only).
  bool eval_values(const Eigen::VectorXd& x, double& f, Eigen::VectorXd& ce,
                   Eigen::VectorXd& ci) const {
    if (!p_.eval_objective(x, f) || !std::isfinite(f)) return false;
    if (me_ > 0 && (!p_.eval_eq(x, ce) || !all_finite(ce))) return false;
    if (mi_ > 0 && (!p_.eval_ineq(x, ci) || !all_finite(ci))) return false;
    return true;
  }

  bool eval_derivatives(const Eigen::VectorXd& x) {
    if (!p_.eval_objective_gradient(x, g_) || !all_finite(g_)) return false;
    if (me_ > 0 && (!p_.eval_eq_jacobian(x, je_) || !all_finite(je_))) return false;
    if (mi_ > 0 && (!p_.eval_ineq_jacobian(x, ji_) || !all_finite(ji_)))
      return false;
    return true;
  }

  // J^T y for a pattern/value pair.
  void add_jt_y(const SparsityPattern& pat, const Eigen::VectorXd& vals,
                const Eigen::VectorXd& y, Eigen::VectorXd& out) const {
    for (int k = 0; k < pat.size(); ++k) out[pat.col[k]] += vals[k] * y[pat.row[k]];
  }

  void add_j_dx(const SparsityPattern& pat, const Eigen::VectorXd& vals,
                const Eigen::VectorXd& dx, Eigen::VectorXd& out) const {
    for (int k = 0; k < pat.size(); ++k) out[pat.row[k]] += vals[k] * dx[pat.col[k]];
  }

  double barrier_value(double f, const Eigen::VectorXd& x,
                       const Eigen::VectorXd& s) const {
    double b = f;
    for (int i = 0; i < n_; ++i) {
      if (xl_[i] > -kInf) b -= mu_ * std::log(x[i] - xl_[i]);
      if (xu_[i] < kInf) b -= mu_ * std::log(xu_[i] - x[i]);
    }
    for (int r = 0; r < mi_; ++r) {
      if (il_[r] > -kInf) b -= mu_ * std::log(s[r] - il_[r]);
      if (iu_[r] < kInf) b -= mu_ * std::log(iu_[r] - s[r]);
    }
    return b;
  }

  double constraint_l1(const Eigen::VectorXd& ce, const Eigen::VectorXd& ci,
                       const Eigen::VectorXd& s) const {
    double t = 0.0;
    for (int r = 0; r < me_; ++r) t += std::abs(ce[r]);
    for (int r = 0; r < mi_; ++r) t += std::abs(ci[r] - s[r]);
    return t;
  }

  const NlpProblem& p_;
  const SolverOptions& opt_;
  int n_, me_, mi_;
  Eigen::VectorXd xl_, xu_, il_, iu_;

  // Current evaluations.
  double f_{0.0};
  Eigen::VectorXd g_, ce_, ci_, je_, ji_, hv_;
  double mu_{0.1};
};

SolveReport InteriorPoint::run(const Eigen::VectorXd& x0) {
  SolveReport rep;
  rep.x = x0;
  rep.y_eq = Eigen::VectorXd::Zero(me_);
  rep.y_ineq = Eigen::VectorXd::Zero(mi_);

  // Degenerate bound data is a modelling error we report as infeasible.
  for (int i = 0; i < n_; ++i) {
    if (xl_[i] > xu_[i]) {
      rep.status = SolveStatus::infeasible;
      rep.message = "variable bounds cross";
      return rep;
    }
  }
  for (int r = 0; r < mi_; ++r) {
    if (il_[r] > iu_[r]) {
      rep.status = SolveStatus::infeasible;
      rep.message = "inequality bounds cross";
      return rep;
    }
    if (il_[r] == -kInf && iu_[r] == kInf) {
      rep.status = SolveStatus::numerical_failure;
      rep.message = "inequality row without finite bounds";
      return rep;
    }
  }

  // Push the start point strictly inside its bounds.
  auto push_interior = [](double v, double lo, double hi) {
    const double kappa = 1e-2;
    if (lo > -kInf && hi < kInf) {
      const double pl = std::min(kappa * std::max(1.0, std::abs(lo)),
                                 kappa * (hi - lo));
      const double pu = std::min(kappa * std::max(1.0, std::abs(hi)),
                                 kappa * (hi - lo));
      return std::min(std::max(v, lo + pl), hi - pu);
    }
    if (lo > -kInf) return std::max(v, lo + kappa * std::max(1.0, std::abs(lo)));
    if (hi < kInf) return std::min(v, hi - kappa * std::max(1.0, std::abs(hi)));
    return v;
  };

  Eigen::VectorXd x = x0;
  for (int i = 0; i < n_; ++i) x[i] = push_interior(x[i], xl_[i], xu_[i]);

  // First evaluation, with one deterministic perturbation retry.
  if (!eval_values(x, f_, ce_, ci_) || !eval_derivatives(x)) {
    for (int i = 0; i < n_; ++i) {
      const double bump = 1e-9 * (1.0 + std::abs(x[i])) * (i % 2 == 0 ? 1.0 : -1.0);
      x[i] = push_interior(x[i] + bump, xl_[i], xu_[i]);
    }
    if (!eval_values(x, f_, ce_, ci_) || !eval_derivatives(x)) {
      rep.status = SolveStatus::numerical_failure;
      rep.message = "objective or constraints not finite at the start point";
      return rep;
    }
  }
  const double g0_norm = g_.lpNorm<Eigen::Infinity>();
  const double dual_tol = opt_.relative_tolerance * std::max(1.0, g0_norm);

  Eigen::VectorXd s(mi_);
  for (int r = 0; r < mi_; ++r) s[r] = push_interior(ci_[r], il_[r], iu_[r]);

  mu_ = 1e-6;
  const double mu_min = std::max(opt_.relative_tolerance / 10.0, 1e-13);
  double tau = std::max(0.99, 1.0 - mu_);

  auto zinit = [&](double slack) {
    return std::min(std::max(mu_ / slack, 1e-8), 1e8);
  };
  Eigen::VectorXd zxl = Eigen::VectorXd::Zero(n_), zxu = Eigen::VectorXd::Zero(n_);
  Eigen::VectorXd zsl = Eigen::VectorXd::Zero(mi_), zsu = Eigen::VectorXd::Zero(mi_);
  for (int i = 0; i < n_; ++i) {
    if (xl_[i] > -kInf) zxl[i] = zinit(x[i] - xl_[i]);
    if (xu_[i] < kInf) zxu[i] = zinit(xu_[i] - x[i]);
  }
  for (int r = 0; r < mi_; ++r) {
    if (il_[r] > -kInf) zsl[r] = zinit(s[r] - il_[r]);
    if (iu_[r] < kInf) zsu[r] = zinit(iu_[r] - s[r]);
  }
  Eigen::VectorXd ye = Eigen::VectorXd::Zero(me_);
  Eigen::VectorXd yi = zsu - zsl;

  const int nk = n_ + me_ + mi_;
  const bool dense = nk < 300;
  SpMat kkt(nk, nk);
  Eigen::SimplicialLDLT<SpMat> sparse_ldlt;
  Eigen::LDLT<Eigen::MatrixXd> dense_ldlt;
  bool analyzed = false;

  double delta_last = 0.0;
  bool force_regularize = false;
  double nu = 1.0;
  int rejected_in_row = 0;
  double theta_best = kInf;
  int theta_stall = 0;
  double dual_best = kInf;
  int dual_stall = 0;
  double alpha_prev = 0.0;

  const auto& pe = p_.eq_jacobian_pattern();
  const auto& pi = p_.ineq_jacobian_pattern();
  const auto& ph = p_.hessian_pattern();

  // Least-squares start for the equality multipliers.  Starting them at
  // zero means they can only grow through the accepted step length, and on
  // problems whose objective has a strong slope along the constraint
  // manifold that wastes dozens of crawling iterations before the duals
  // carry the gradient.  Keep zeros if the fit is absurdly large.
  if (me_ > 0) {
    Eigen::MatrixXd ls = Eigen::MatrixXd::Zero(n_ + me_, n_ + me_);
    for (int i = 0; i < n_; ++i) ls(i, i) = 1.0;
    for (int k = 0; k < pe.size(); ++k) {
      ls(n_ + pe.row[k], pe.col[k]) = je_[k];
      ls(pe.col[k], n_ + pe.row[k]) = je_[k];
    }
    for (int r = 0; r < me_; ++r) ls(n_ + r, n_ + r) = -1e-10;
    Eigen::VectorXd gt = g_ - zxl + zxu;
    add_jt_y(pi, ji_, yi, gt);
    Eigen::VectorXd rhs_ls = Eigen::VectorXd::Zero(n_ + me_);
    rhs_ls.head(n_) = -gt;
    const Eigen::VectorXd sol =
        Eigen::LDLT<Eigen::MatrixXd>(ls).solve(rhs_ls);
    if (sol.allFinite() && sol.tail(me_).lpNorm<Eigen::Infinity>() <= 1e3)
      ye = sol.tail(me_);
  }

  int iter = 0;
  for (; iter < opt_.max_iterations; ++iter) {
    // Residual-based error measures.
    Eigen::VectorXd dual = g_;
    add_jt_y(pe, je_, ye, dual);
    add_jt_y(pi, ji_, yi, dual);
    dual -= zxl;
    dual += zxu;
    double dual_inf = dual.lpNorm<Eigen::Infinity>();
    double s_stat = 0.0;
    for (int r = 0; r < mi_; ++r)
      s_stat = std::max(s_stat, std::abs(-yi[r] - zsl[r] + zsu[r]));
    dual_inf = std::max(dual_inf, s_stat);

    double primal_inf = 0.0;
    int pmax = -1;
    for (int r = 0; r < me_; ++r)
      if (std::abs(ce_[r]) > primal_inf) {
        primal_inf = std::abs(ce_[r]);
        pmax = r;
      }
    for (int r = 0; r < mi_; ++r)
      if (std::abs(ci_[r] - s[r]) > primal_inf) {
        primal_inf = std::abs(ci_[r] - s[r]);
        pmax = me_ + r;
      }

    double comp0 = 0.0, comp_mu = 0.0, mult_sum = 0.0;
    int mult_count = 0;
    auto comp_side = [&](double z, double slack) {
      comp0 = std::max(comp0, std::abs(z * slack));
      comp_mu = std::max(comp_mu, std::abs(z * slack - mu_));
      mult_sum += std::abs(z);
      ++mult_count;
    };
    for (int i = 0; i < n_; ++i) {
      if (xl_[i] > -kInf) comp_side(zxl[i], x[i] - xl_[i]);
      if (xu_[i] < kInf) comp_side(zxu[i], xu_[i] - x[i]);
    }
    for (int r = 0; r < mi_; ++r) {
      if (il_[r] > -kInf) comp_side(zsl[r], s[r] - il_[r]);
      if (iu_[r] < kInf) comp_side(zsu[r], iu_[r] - s[r]);
    }
    mult_sum += ye.lpNorm<1>() + yi.lpNorm<1>();
    mult_count += me_ + mi_;
    const double sd =
        std::max(100.0, mult_count > 0 ? mult_sum / mult_count : 0.0) / 100.0;

    if (opt_.verbose) {
      int amax = 0;
      for (int i = 1; i < n_; ++i)
        if (std::abs(dual[i]) > std::abs(dual[amax])) amax = i;
      std::printf(
          "iter %4d  f % .8e  inf_pr %.2e@%d  inf_du %.2e@%d  mu %.1e  nu "
          "%.1e  delta %.1e  |ye| %.1e  |yi| %.1e  alpha %.1e\n",
          iter, f_, primal_inf, pmax, dual_inf, amax, mu_, nu, delta_last,
          me_ > 0 ? ye.lpNorm<Eigen::Infinity>() : 0.0,
          mi_ > 0 ? yi.lpNorm<Eigen::Infinity>() : 0.0, alpha_prev);
      const double jty = dual[amax] - g_[amax] + zxl[amax] - zxu[amax];
      std::printf(
          "      row %d: g %.2e  jty %.2e  zl %.2e  zu %.2e  sl %.2e  su "
          "%.2e\n",
          amax, g_[amax], jty, zxl[amax], zxu[amax],
          xl_[amax] > -kInf ? x[amax] - xl_[amax] : kInf,
          xu_[amax] < kInf ? xu_[amax] - x[amax] : kInf);
      if (n_ > 126) {
        const int q = 126;
        const double jtyq = dual[q] - g_[q] + zxl[q] - zxu[q];
        std::printf(
            "      lam row %d: g %.2e  jty %.2e  zl %.2e  sl %.2e  dual "
            "%.2e\n",
            q, g_[q], jtyq, zxl[q],
            xl_[q] > -kInf ? x[q] - xl_[q] : kInf, dual[q]);
      }
    }

    if (dual_inf / sd <= dual_tol && comp0 / sd <= dual_tol &&
        primal_inf <= opt_.feasibility_tolerance) {
      rep.status = SolveStatus::converged;
      break;
    }

    // Local infeasibility: the constraint violation has stopped improving
    // and either the violation is stationary or the multipliers have blown
    // up, the usual signature of a dead end.
    if (primal_inf < theta_best * 0.999) {
      theta_best = primal_inf;
      theta_stall = 0;
    } else if (++theta_stall >= 50 &&
               theta_best > opt_.feasibility_tolerance) {
      Eigen::VectorXd jtc = Eigen::VectorXd::Zero(n_);
      add_jt_y(pe, je_, ce_, jtc);
      Eigen::VectorXd ri = ci_ - s;
      add_jt_y(pi, ji_, ri, jtc);
      double y_norm =
          std::max(me_ > 0 ? ye.lpNorm<Eigen::Infinity>() : 0.0,
                   mi_ > 0 ? yi.lpNorm<Eigen::Infinity>() : 0.0);
      if (mi_ > 0) {
        y_norm = std::max({y_norm, zsl.lpNorm<Eigen::Infinity>(),
                           zsu.lpNorm<Eigen::Infinity>()});
      }
      if (jtc.lpNorm<Eigen::Infinity>() <= 1e-4 * std::max(1.0, primal_inf) ||
          y_norm > 1e7) {
        rep.status = SolveStatus::infeasible;
        rep.message = "constraint violation stalled away from feasibility";
        break;
      }
    }

    // Barrier update: when the inner problem is solved to within its own
    // tolerance, tighten mu (possibly several notches).
    bool mu_changed = false;
    while (mu_ > mu_min &&
           std::max({dual_inf / sd, primal_inf, comp_mu / sd}) <= 10.0 * mu_) {
      mu_ = std::max(mu_min, std::min(0.2 * mu_, std::pow(mu_, 1.5)));
      tau = std::max(0.99, 1.0 - mu_);
      mu_changed = true;
    }

    // A nearly feasible iterate whose dual error has stopped improving is
    // fighting the current barrier, not the problem; tightening mu
    // re-centers the subproblem instead of grinding on it.  Degenerate
    // active sets (a bound that duplicates an equality) land here.
    if (dual_inf < 0.9 * dual_best) {
      dual_best = dual_inf;
      dual_stall = 0;
    } else if (++dual_stall >= 40 && mu_ > mu_min &&
               primal_inf <= 100.0 * opt_.feasibility_tolerance) {
      mu_ = std::max(mu_min, 0.2 * mu_);
      tau = std::max(0.99, 1.0 - mu_);
      mu_changed = true;
    }
    if (mu_changed) {
      dual_best = kInf;
      dual_stall = 0;
    }

    // Newton system on (dx, dy_eq, dy_ineq) with slacks and bound duals
    // eliminated.
    if (!p_.eval_hessian(x, 1.0, ye, yi, hv_) || !all_finite(hv_)) {
      rep.status = SolveStatus::numerical_failure;
      rep.message = "Lagrangian Hessian not finite";
      break;
    }

    Eigen::VectorXd sigma_x = Eigen::VectorXd::Zero(n_);
    for (int i = 0; i < n_; ++i) {
      if (xl_[i] > -kInf) sigma_x[i] += zxl[i] / (x[i] - xl_[i]);
      if (xu_[i] < kInf) sigma_x[i] += zxu[i] / (xu_[i] - x[i]);
    }
    Eigen::VectorXd sigma_s = Eigen::VectorXd::Zero(mi_);
    for (int r = 0; r < mi_; ++r) {
      if (il_[r] > -kInf) sigma_s[r] += zsl[r] / (s[r] - il_[r]);
      if (iu_[r] < kInf) sigma_s[r] += zsu[r] / (iu_[r] - s[r]);
    }

    Eigen::VectorXd rhs(nk);
    for (int i = 0; i < n_; ++i) {
      double v = -g_[i];
      if (xl_[i] > -kInf) v += mu_ / (x[i] - xl_[i]);
      if (xu_[i] < kInf) v -= mu_ / (xu_[i] - x[i]);
      rhs[i] = v;
    }
    {
      Eigen::VectorXd jty = Eigen::VectorXd::Zero(n_);
      add_jt_y(pe, je_, ye, jty);
      add_jt_y(pi, ji_, yi, jty);
      rhs.head(n_) -= jty;
    }
    for (int r = 0; r < me_; ++r) rhs[n_ + r] = -ce_[r];
    Eigen::VectorXd slack_rhs(mi_);
    for (int r = 0; r < mi_; ++r) {
      double v = yi[r];
      if (il_[r] > -kInf) v += mu_ / (s[r] - il_[r]);
      if (iu_[r] < kInf) v -= mu_ / (iu_[r] - s[r]);
      slack_rhs[r] = v;
      rhs[n_ + me_ + r] = -(ci_[r] - s[r]) + v / sigma_s[r];
    }

    Eigen::VectorXd step(nk);
    bool factored = false;
    double delta = force_regularize ? std::max(delta_last, 1e-6) : 0.0;
    force_regularize = false;
    // The constraint-block shift exists to get the factorization through
    // rank trouble, but it also leaves a persistent feasibility residual of
    // order delta_c * |dy|.  Keep it at roundoff level and raise it only
    // once a factorization actually breaks down; wrong inertia is handled
    // by the primal shift alone.
    double delta_c = 1e-11;
    for (int attempt = 0; attempt < 30; ++attempt) {
      std::vector<Triplet> trip;
      trip.reserve(ph.size() + pe.size() + pi.size() + nk);
      for (int k = 0; k < ph.size(); ++k) {
        const int r = std::max(ph.row[k], ph.col[k]);
        const int c = std::min(ph.row[k], ph.col[k]);
        trip.emplace_back(r, c, hv_[k]);
      }
      for (int i = 0; i < n_; ++i)
        trip.emplace_back(i, i, sigma_x[i] + delta);
      for (int k = 0; k < pe.size(); ++k)
        trip.emplace_back(n_ + pe.row[k], pe.col[k], je_[k]);
      for (int r = 0; r < me_; ++r)
        trip.emplace_back(n_ + r, n_ + r, -delta_c);
      for (int k = 0; k < pi.size(); ++k)
        trip.emplace_back(n_ + me_ + pi.row[k], pi.col[k], ji_[k]);
      for (int r = 0; r < mi_; ++r)
        trip.emplace_back(n_ + me_ + r, n_ + me_ + r, -1.0 / sigma_s[r] - delta_c);

      kkt.setFromTriplets(trip.begin(), trip.end());

      int pos = 0, neg = 0;
      bool ok = false;
      bool broke = false;
      if (dense) {
        Eigen::MatrixXd dm = Eigen::MatrixXd(kkt).selfadjointView<Eigen::Lower>();
        dense_ldlt.compute(dm);
        if (dense_ldlt.info() != Eigen::Success) {
          broke = true;
        } else {
          const auto d = dense_ldlt.vectorD();
          for (int i = 0; i < nk; ++i) {
            if (d[i] > 0.0) ++pos;
            else if (d[i] < 0.0) ++neg;
          }
          if (pos == n_ && neg == me_ + mi_) {
            step = dense_ldlt.solve(rhs);
            ok = step.allFinite();
            broke = !ok;
          }
        }
      } else {
        if (!analyzed) {
          sparse_ldlt.analyzePattern(kkt);
          analyzed = true;
        }
        sparse_ldlt.factorize(kkt);
        if (sparse_ldlt.info() != Eigen::Success) {
          broke = true;
        } else {
          const auto d = sparse_ldlt.vectorD();
          for (int i = 0; i < nk; ++i) {
            if (d[i] > 0.0) ++pos;
            else if (d[i] < 0.0) ++neg;
          }
          if (pos == n_ && neg == me_ + mi_) {
            step = sparse_ldlt.solve(rhs);
            ok = step.allFinite();
            broke = !ok;
          }
        }
      }
      if (ok) {
        factored = true;
        delta_last = delta;
        break;
      }
      if (broke && delta_c < 1e-8) {
        delta_c = 1e-8;
        continue;
      }
      delta = delta == 0.0 ? std::max(1e-10, delta_last / 3.0) : delta * 10.0;
      if (delta > 1e12) break;
    }
    if (!factored) {
      rep.status = SolveStatus::numerical_failure;
      rep.message = "KKT factorization failed";
      break;
    }

    // Iterative refinement against the factored matrix.  The active-bound
    // barrier terms can push the condition number high enough that a single
    // backsolve leaves constraint residuals around 1e-9, which then reads
    // as a feasibility floor; a refinement pass or two recovers it.
    {
      const double rhs_scale = 1.0 + rhs.lpNorm<Eigen::Infinity>();
      for (int pass = 0; pass < 2; ++pass) {
        Eigen::VectorXd resid =
            rhs - kkt.selfadjointView<Eigen::Lower>() * step;
        if (!resid.allFinite() ||
            resid.lpNorm<Eigen::Infinity>() <= 1e-14 * rhs_scale)
          break;
        Eigen::VectorXd corr = dense ? Eigen::VectorXd(dense_ldlt.solve(resid))
                                     : Eigen::VectorXd(sparse_ldlt.solve(resid));
        if (!corr.allFinite()) break;
        step += corr;
      }
    }

    const Eigen::VectorXd dx = step.head(n_);
    const Eigen::VectorXd dye = step.segment(n_, me_);
    const Eigen::VectorXd dyi = step.tail(mi_);
    Eigen::VectorXd ds(mi_), dzsl(mi_), dzsu(mi_);
    // Recover ds from the slack-feasibility row, Ji dx - ds = -(ci - s) +
    // delta_c dyi, rather than from the barrier row; dividing by sigma_s
    // amplifies roundoff in dyi badly on rows whose multiplier is tiny.
    {
      Eigen::VectorXd jdx = Eigen::VectorXd::Zero(mi_);
      add_j_dx(pi, ji_, dx, jdx);
      for (int r = 0; r < mi_; ++r)
        ds[r] = jdx[r] + (ci_[r] - s[r]) - delta_c * dyi[r];
    }
    for (int r = 0; r < mi_; ++r) {
      dzsl[r] = il_[r] > -kInf
                    ? mu_ / (s[r] - il_[r]) - zsl[r] - zsl[r] / (s[r] - il_[r]) * ds[r]
                    : 0.0;
      dzsu[r] = iu_[r] < kInf
                    ? mu_ / (iu_[r] - s[r]) - zsu[r] + zsu[r] / (iu_[r] - s[r]) * ds[r]
                    : 0.0;
    }
    Eigen::VectorXd dzxl(n_), dzxu(n_);
    for (int i = 0; i < n_; ++i) {
      dzxl[i] = xl_[i] > -kInf
                    ? mu_ / (x[i] - xl_[i]) - zxl[i] - zxl[i] / (x[i] - xl_[i]) * dx[i]
                    : 0.0;
      dzxu[i] = xu_[i] < kInf
                    ? mu_ / (xu_[i] - x[i]) - zxu[i] + zxu[i] / (xu_[i] - x[i]) * dx[i]
                    : 0.0;
    }

    // Fraction-to-boundary limits.
    double alpha_max = 1.0, alpha_z = 1.0;
    auto limit_side = [&tau](double slack, double d, double& a) {
      if (d < 0.0) a = std::min(a, -tau * slack / d);
    };
    for (int i = 0; i < n_; ++i) {
      if (xl_[i] > -kInf) limit_side(x[i] - xl_[i], dx[i], alpha_max);
      if (xu_[i] < kInf) limit_side(xu_[i] - x[i], -dx[i], alpha_max);
    }
    for (int r = 0; r < mi_; ++r) {
      if (il_[r] > -kInf) limit_side(s[r] - il_[r], ds[r], alpha_max);
      if (iu_[r] < kInf) limit_side(iu_[r] - s[r], -ds[r], alpha_max);
    }
    for (int i = 0; i < n_; ++i) {
      if (xl_[i] > -kInf) limit_side(zxl[i], dzxl[i], alpha_z);
      if (xu_[i] < kInf) limit_side(zxu[i], dzxu[i], alpha_z);
    }
    for (int r = 0; r < mi_; ++r) {
      if (il_[r] > -kInf) limit_side(zsl[r], dzsl[r], alpha_z);
      if (iu_[r] < kInf) limit_side(zsu[r], dzsu[r], alpha_z);
    }

    // Penalty parameter: large enough for the multiplier estimate and for a
    // negative directional derivative.
    double y_norm = 0.0;
    for (int r = 0; r < me_; ++r) y_norm = std::max(y_norm, std::abs(ye[r] + dye[r]));
    for (int r = 0; r < mi_; ++r) y_norm = std::max(y_norm, std::abs(yi[r] + dyi[r]));
    double nu_req = 1.1 * y_norm + 0.1;

    const double theta0 = constraint_l1(ce_, ci_, s);
    double dir_smooth = g_.dot(dx);
    for (int i = 0; i < n_; ++i) {
      if (xl_[i] > -kInf) dir_smooth -= mu_ / (x[i] - xl_[i]) * dx[i];
      if (xu_[i] < kInf) dir_smooth += mu_ / (xu_[i] - x[i]) * dx[i];
    }
    for (int r = 0; r < mi_; ++r) {
      if (il_[r] > -kInf) dir_smooth -= mu_ / (s[r] - il_[r]) * ds[r];
      if (iu_[r] < kInf) dir_smooth += mu_ / (iu_[r] - s[r]) * ds[r];
    }
    // Only let the descent requirement drive the penalty when there is a
    // meaningful violation to trade against; dividing by a near-zero
    // violation would send the weight sky-high and freeze the line search
    // over harmless curvature wiggles.
    if (theta0 > opt_.feasibility_tolerance) {
      nu_req = std::max(nu_req, (dir_smooth + 1e-12) / (0.5 * theta0));
    }
    // Follow the requirement both ways; decaying after a multiplier spike
    // keeps one bad estimate from anchoring the merit function for good.
    nu = nu_req >= nu ? nu_req : std::max(nu_req, 0.2 * nu);
    const double dir = dir_smooth - nu * theta0;

    const double merit0 = barrier_value(f_, x, s) + nu * theta0;
    const double armijo_slack = 1e-12 * std::abs(merit0);
    double alpha = alpha_max;
    bool accepted = false;
    double f_trial = 0.0, merit_trial = 0.0;
    Eigen::VectorXd x_trial, s_trial, ce_trial(me_), ci_trial(mi_);
    for (int ls = 0; ls < 40; ++ls) {
      x_trial = x + alpha * dx;
      s_trial = s + alpha * ds;
      const bool evald = eval_values(x_trial, f_trial, ce_trial, ci_trial);
      if (evald) {
        merit_trial = barrier_value(f_trial, x_trial, s_trial) +
                      nu * constraint_l1(ce_trial, ci_trial, s_trial);
        if (std::isfinite(merit_trial) &&
            merit_trial <=
                merit0 + 1e-4 * alpha * std::min(dir, 0.0) + armijo_slack) {
          accepted = true;
          break;
        }
      }
      if (ls == 0 && evald) {
        // Second-order correction: a full step that only failed on the
        // curvature of the constraints can be rescued by reusing the KKT
        // factorization against the constraint values at the trial point.
        Eigen::VectorXd rhs_soc = Eigen::VectorXd::Zero(nk);
        for (int r = 0; r < me_; ++r) rhs_soc[n_ + r] = -ce_trial[r];
        for (int r = 0; r < mi_; ++r)
          rhs_soc[n_ + me_ + r] = -(ci_trial[r] - s_trial[r]);
        const Eigen::VectorXd corr =
            dense ? Eigen::VectorXd(dense_ldlt.solve(rhs_soc))
                  : Eigen::VectorXd(sparse_ldlt.solve(rhs_soc));
        if (corr.allFinite()) {
          Eigen::VectorXd cx = alpha * dx + corr.head(n_);
          Eigen::VectorXd cs(mi_);
          {
            Eigen::VectorXd jdxc = Eigen::VectorXd::Zero(mi_);
            add_j_dx(pi, ji_, corr.head(n_), jdxc);
            for (int r = 0; r < mi_; ++r)
              cs[r] = alpha * ds[r] + jdxc[r] + (ci_trial[r] - s_trial[r]) -
                      delta_c * corr[n_ + me_ + r];
          }
          double beta = 1.0;
          for (int i = 0; i < n_; ++i) {
            if (xl_[i] > -kInf) limit_side(x[i] - xl_[i], cx[i], beta);
            if (xu_[i] < kInf) limit_side(xu_[i] - x[i], -cx[i], beta);
          }
          for (int r = 0; r < mi_; ++r) {
            if (il_[r] > -kInf) limit_side(s[r] - il_[r], cs[r], beta);
            if (iu_[r] < kInf) limit_side(iu_[r] - s[r], -cs[r], beta);
          }
          const Eigen::VectorXd x_soc = x + beta * cx;
          const Eigen::VectorXd s_soc = s + beta * cs;
          double f_soc = 0.0;
          Eigen::VectorXd ce_soc(me_), ci_soc(mi_);
          if (eval_values(x_soc, f_soc, ce_soc, ci_soc)) {
            const double merit_soc =
                barrier_value(f_soc, x_soc, s_soc) +
                nu * constraint_l1(ce_soc, ci_soc, s_soc);
            if (std::isfinite(merit_soc) &&
                merit_soc <=
                    merit0 + 1e-4 * alpha * std::min(dir, 0.0) + armijo_slack) {
              x_trial = x_soc;
              s_trial = s_soc;
              f_trial = f_soc;
              ce_trial = ce_soc;
              ci_trial = ci_soc;
              merit_trial = merit_soc;
              accepted = true;
              break;
            }
          }
        }
      }
      alpha *= 0.5;
      if (alpha < 1e-14) break;
    }

    if (!accepted) {
      // A failed search usually means the local model was poor; convexify
      // harder and try again from the same point.
      delta_last = std::max(delta_last * 10.0, 1e-6);
      force_regularize = true;
      if (++rejected_in_row >= 5) {
        rep.status = SolveStatus::numerical_failure;
        rep.message = "line search failed repeatedly";
        ++iter;
        break;
      }
      continue;
    }
    rejected_in_row = 0;
    alpha_prev = alpha;

    x = x_trial;
    s = s_trial;
    f_ = f_trial;
    ce_ = ce_trial;
    ci_ = ci_trial;
    ye += alpha * dye;
    yi += alpha * dyi;
    zxl += alpha_z * dzxl;
    zxu += alpha_z * dzxu;
    zsl += alpha_z * dzsl;
    zsu += alpha_z * dzsu;

    // Keep bound duals within a broad band of mu/slack.
    const double ks = 1e10;
    for (int i = 0; i < n_; ++i) {
      if (xl_[i] > -kInf) {
        const double sl = x[i] - xl_[i];
        zxl[i] = std::min(std::max(zxl[i], mu_ / (ks * sl)), ks * mu_ / sl);
      }
      if (xu_[i] < kInf) {
        const double sl = xu_[i] - x[i];
        zxu[i] = std::min(std::max(zxu[i], mu_ / (ks * sl)), ks * mu_ / sl);
      }
    }
    for (int r = 0; r < mi_; ++r) {
      if (il_[r] > -kInf) {
        const double sl = s[r] - il_[r];
        zsl[r] = std::min(std::max(zsl[r], mu_ / (ks * sl)), ks * mu_ / sl);
      }
      if (iu_[r] < kInf) {
        const double sl = iu_[r] - s[r];
        zsu[r] = std::min(std::max(zsu[r], mu_ / (ks * sl)), ks * mu_ / sl);
      }
    }

    if (!eval_derivatives(x)) {
      rep.status = SolveStatus::numerical_failure;
      rep.message = "derivatives not finite after an accepted step";
      ++iter;
      break;
    }

    IterationRecord rec;
    rec.iter = iter;
    rec.objective = f_;
    rec.primal_infeasibility = constraint_l1(ce_, ci_, s);
    rec.dual_infeasibility = dual_inf;
    rec.mu = mu_;
    rec.step = alpha;
    rec.merit_before = merit0;
    rec.merit_after = merit_trial;
    rep.log.push_back(rec);
  }

  if (iter >= opt_.max_iterations) rep.status = SolveStatus::iteration_limit;
  rep.iterations = std::min(iter, opt_.max_iterations);
  rep.x = x;
  rep.objective = f_;
  rep.y_eq = ye;
  rep.y_ineq = yi;

  {
    Eigen::VectorXd dual = g_;
    add_jt_y(pe, je_, ye, dual);
    add_jt_y(pi, ji_, yi, dual);
    dual -= zxl;
    dual += zxu;
    rep.dual_infeasibility = dual.lpNorm<Eigen::Infinity>();

    double viol = 0.0;
    for (int r = 0; r < me_; ++r) viol = std::max(viol, std::abs(ce_[r]));
    for (int r = 0; r < mi_; ++r) {
      if (il_[r] > -kInf) viol = std::max(viol, il_[r] - ci_[r]);
      if (iu_[r] < kInf) viol = std::max(viol, ci_[r] - iu_[r]);
    }
    for (int i = 0; i < n_; ++i) {
      if (xl_[i] > -kInf) viol = std::max(viol, xl_[i] - x[i]);
      if (xu_[i] < kInf) viol = std::max(viol, x[i] - xu_[i]);
    }
    rep.max_violation = viol;
  }
  return rep;
}

}  // namespace

SolveReport solve(const NlpProblem& problem, const Eigen::VectorXd& x0,
                  const SolverOptions& options) {
  try {
    InteriorPoint ip(problem, options);
    return ip.run(x0);
  } catch (const std::exception& e) {
    SolveReport rep;
    rep.status = SolveStatus::numerical_failure;
    rep.message = e.what();
    rep.x = x0;
    return rep;
  }
}

}  // namespace ctraj
