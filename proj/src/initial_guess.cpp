#include "ctraj/initial_guess.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>

#include "ctraj/fem.hpp"
#include "ctraj/nlp.hpp"
#include "ctraj/quadrature.hpp"
#include "ctraj/solver.hpp"

namespace ctraj {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kQ = QuadratureRule::kPoints;
constexpr double kTwoPi = 2.0 * M_PI;

double wrap_ccw(double a) {  // into [0, 2pi)
  double w = std::fmod(a, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  return w;
}

double wrap_cw(double a) {  // into (-2pi, 0]
  double w = std::fmod(a, kTwoPi);
  if (w > 0.0) w -= kTwoPi;
  return w;
}

struct ArcLineArc {
  double d1{0.0};    // first sweep in rad, sign is the turn direction
  double d2{0.0};    // second sweep
  double line{0.0};  // straight length in m
  double radius{0.0};
  double length() const {
    return radius * (std::abs(d1) + std::abs(d2)) + line;
  }
};

// Arc-line-arc candidate with prescribed turn directions (t = +1 left,
// -1 right).  The sweeps are adjusted by whole turns so the heading ends
// exactly on target; candidates that cannot reach the target with the
// required turn signs are rejected.
std::optional<ArcLineArc> csc_candidate(const PlanningProblem& p, double target,
                                        int t1, int t2, double R) {
  const double th0 = p.start.theta;
  const double c0x = p.start.x - t1 * R * std::sin(th0);
  const double c0y = p.start.y + t1 * R * std::cos(th0);
  const double c1x = p.end.x - t2 * R * std::sin(target);
  const double c1y = p.end.y + t2 * R * std::cos(target);
  const double dx = c1x - c0x, dy = c1y - c0y;
  const double dist = std::hypot(dx, dy);
  double psi, line;
  if (t1 == t2) {
    psi = dist > 1e-12 ? std::atan2(dy, dx) : th0;
    line = dist;
  } else {
    if (dist < 2.0 * R) return std::nullopt;
    const double alpha = std::asin(std::min(1.0, 2.0 * R / dist));
    psi = std::atan2(dy, dx) + t1 * alpha;
    line = dist * std::cos(alpha);
  }
  ArcLineArc c;
  c.radius = R;
  c.line = line;
  c.d1 = t1 > 0 ? wrap_ccw(psi - th0) : wrap_cw(psi - th0);
  const double rep2 = t2 > 0 ? wrap_ccw(target - psi) : wrap_cw(target - psi);
  const double need2 = target - th0 - c.d1;   // second sweep if d1 stays
  const double need1 = target - th0 - rep2;   // first sweep if d2 = rep2
  const double tol = 1e-9;
  if ((t2 > 0 && need2 >= -tol) || (t2 < 0 && need2 <= tol)) {
    c.d2 = need2;
  } else if ((t1 > 0 && need1 >= -tol) || (t1 < 0 && need1 <= tol)) {
    c.d1 = need1;
    c.d2 = rep2;
  } else {
    return std::nullopt;
  }
  return c;
}

PathGuess sample_seed(const PlanningProblem& p, GuessVariant variant,
                      double target, const ArcLineArc& c) {
  const int n = p.disc.n;
  PathGuess g;
  g.variant = variant;
  g.theta_end = target;
  g.lambda = c.length();
  g.theta.resize(2 * (n + 1));
  const double stot = g.lambda;
  const double th0 = p.start.theta;
  const double tol = 1e-9 * std::max(stot, 1.0);

  // Arc, line, arc pieces of the heading profile; empty pieces drop out.
  struct Piece {
    double len;
    double slope;  // dtheta/ds on the piece
  };
  std::vector<Piece> pieces;
  if (c.radius * std::abs(c.d1) > tol)
    pieces.push_back({c.radius * std::abs(c.d1),
                      (c.d1 > 0.0 ? 1.0 : -1.0) / c.radius});
  if (c.line > tol) pieces.push_back({c.line, 0.0});
  if (c.radius * std::abs(c.d2) > tol)
    pieces.push_back({c.radius * std::abs(c.d2),
                      (c.d2 > 0.0 ? 1.0 : -1.0) / c.radius});
  if (pieces.empty()) pieces.push_back({std::max(stot, 1.0), 0.0});

  // Piecewise-linear theta(s) would put a slope kink at each junction and
  // the smoothing energy of the interpolant blows up there.  Ramp the slope
  // linearly across a window around each junction instead; the ramp has the
  // same integral as the profile it replaces, so headings outside the
  // window are untouched.
  struct Seg {
    double s0, s1, th, m0, m1;  // theta at s0, slope endpoints
  };
  std::vector<Seg> segs;
  const int nj = static_cast<int>(pieces.size()) - 1;
  std::vector<double> half(std::max(nj, 0));
  for (int j = 0; j < nj; ++j)
    half[j] = 0.5 * std::min(pieces[j].len, pieces[j + 1].len);
  // The curvature at the path ends is prescribed, so ease the slope from
  // that value into the first piece and back out of the last one; without
  // the lead ramps the interpolant gets an end kink the smoothing energy
  // of which dwarfs everything else.
  const double lead_in = 0.5 * pieces.front().len;
  const double lead_out = 0.5 * pieces.back().len;
  {
    double s = 0.0, th = th0;
    if (lead_in > tol) {
      segs.push_back({0.0, lead_in, th, p.start.kappa, pieces[0].slope});
      th += 0.5 * (p.start.kappa + pieces[0].slope) * lead_in;
      s = lead_in;
    }
    double cum = 0.0;
    for (int i = 0; i < static_cast<int>(pieces.size()); ++i) {
      cum += pieces[i].len;
      double flat_end = i < nj ? cum - half[i] : cum;
      if (i + 1 == static_cast<int>(pieces.size())) flat_end = cum - lead_out;
      if (flat_end > s + tol) {
        segs.push_back({s, flat_end, th, pieces[i].slope, pieces[i].slope});
        th += pieces[i].slope * (flat_end - s);
        s = flat_end;
      }
      if (i < nj && half[i] > tol) {
        const double ramp_end = cum + half[i];
        segs.push_back({s, ramp_end, th, pieces[i].slope, pieces[i + 1].slope});
        th += 0.5 * (pieces[i].slope + pieces[i + 1].slope) * (ramp_end - s);
        s = ramp_end;
      }
    }
    if (lead_out > tol && stot > s + tol)
      segs.push_back({s, stot, th, pieces.back().slope, p.end.kappa});
    if (segs.empty()) segs.push_back({0.0, std::max(stot, 1.0), th0, 0.0, 0.0});
  }

  // The lead ramps change the heading integral, and clamped junction
  // windows can too.  Spread whatever is missing across the whole profile
  // with a bump that vanishes at both ends so the boundary slopes stay put.
  double deficit = target - th0;
  for (const Seg& seg : segs)
    deficit -= 0.5 * (seg.m0 + seg.m1) * (seg.s1 - seg.s0);

  auto eval_profile = [&](double s, double& th, double& m) {
    const Seg* seg = &segs.back();
    for (const Seg& cand : segs)
      if (s <= cand.s1 + tol) {
        seg = &cand;
        break;
      }
    const double w = seg->s1 - seg->s0;
    const double t = w > tol ? std::clamp((s - seg->s0) / w, 0.0, 1.0) : 0.0;
    m = seg->m0 + (seg->m1 - seg->m0) * t;
    th = seg->th + (s - seg->s0) * (seg->m0 + 0.5 * (seg->m1 - seg->m0) * t);
  };

  for (int k = 0; k <= n; ++k) {
    const double u = static_cast<double>(k) / n;
    const double s = stot * u;
    double th, m;
    eval_profile(s, th, m);
    g.theta[2 * k] = th + deficit * u * u * (3.0 - 2.0 * u);
    g.theta[2 * k + 1] = stot * m + deficit * 6.0 * u * (1.0 - u);
  }
  g.theta[0] = th0;
  g.theta[2 * n] = target;
  return g;
}

// Auxiliary heading problem: minimize lambda + w * integral(theta''^2)
// subject to the two whole-path position constraints, optional endpoint
// curvature couplings and the curvature box at the dynamic points.
class PathNlp : public NlpProblem {
 public:
  PathNlp(const PlanningProblem& p, double theta_end, double lambda_cap)
      : p_(p), n_(p.disc.n), mesh_{p.disc.n} {
    const double h = mesh_.h();
    const auto& q = gauss12();
    const int slots = 2 * (n_ + 1) + 1;  // theta coefficients then lambda
    fixed_.assign(slots, false);
    fixed_value_.assign(slots, 0.0);
    auto fix = [&](int s, double v) {
      fixed_[s] = true;
      fixed_value_[s] = v;
    };
    fix(0, p.start.theta);
    fix(2 * n_, theta_end);
    if (p.start.kappa == 0.0) fix(1, 0.0);
    if (p.end.kappa == 0.0) fix(2 * n_ + 1, 0.0);
    free_index_.assign(slots, -1);
    int nf = 0;
    for (int s = 0; s < slots; ++s)
      if (!fixed_[s]) free_index_[s] = nf++;
    nfree_ = nf;

    dx_ = p.end.x - p.start.x;
    dy_ = p.end.y - p.start.y;
    const double dist = std::hypot(dx_, dy_);
    lambda_lower_ = dist * (1.0 - 1e-9);
    lambda_upper_ = std::max(lambda_cap, 2.0 * dist);
    w_ = 2e-4 * std::max(dist, p.min_turn_radius);

    for (int k = 0; k < kQ; ++k)
      bq_[k] = element_basis(h, ElementBasis::hermite, q.xi[k]);
    bp_.reserve(p.disc.p);
    for (int k = 0; k < p.disc.p; ++k)
      bp_.push_back(element_basis(h, ElementBasis::hermite, (k + 0.5) / p.disc.p));
    K_.setZero();
    for (int k = 0; k < kQ; ++k)
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
          K_(a, b) += h * q.weight[k] * bq_[k].duu[a] * bq_[k].duu[b];

    if (p.start.kappa != 0.0) couplings_.push_back({1, -p.start.kappa});
    if (p.end.kappa != 0.0) couplings_.push_back({2 * n_ + 1, -p.end.kappa});
    num_eq_ = 2 + static_cast<int>(couplings_.size());
    num_ineq_ = 2 * n_ * p.disc.p;

    auto add = [&](SparsityPattern& pat, int row, int slot) {
      if (free_index_[slot] >= 0) pat.add(row, free_index_[slot]);
    };
    for (int row = 0; row < 2; ++row) {
      for (int e = 0; e < n_; ++e)
        for (int i = 0; i < 4; ++i) add(eq_pattern_, row, 2 * e + i);
      add(eq_pattern_, row, lambda_slot());
    }
    {
      int row = 2;
      for (const auto& c : couplings_) {
        add(eq_pattern_, row, c.first);
        add(eq_pattern_, row, lambda_slot());
        ++row;
      }
    }
    {
      int row = 0;
      for (int e = 0; e < n_; ++e) {
        for (int k = 0; k < p.disc.p; ++k) {
          for (int r = 0; r < 2; ++r) {
            for (int i = 0; i < 4; ++i) add(ineq_pattern_, row, 2 * e + i);
            add(ineq_pattern_, row, lambda_slot());
            ++row;
          }
        }
      }
    }
    auto add_block = [&](const int* sl, int count) {
      for (int i = 0; i < count; ++i)
        for (int j = 0; j <= i; ++j)
          if (free_index_[sl[i]] >= 0 && free_index_[sl[j]] >= 0)
            hess_pattern_.add(free_index_[sl[i]], free_index_[sl[j]]);
    };
    for (int e = 0; e < n_; ++e) {
      const int t4[4] = {2 * e, 2 * e + 1, 2 * e + 2, 2 * e + 3};
      add_block(t4, 4);
    }
    for (int e = 0; e < n_; ++e) {
      const int t5[5] = {2 * e, 2 * e + 1, 2 * e + 2, 2 * e + 3, lambda_slot()};
      add_block(t5, 5);  // x row
      add_block(t5, 5);  // y row
    }
  }

  int lambda_slot() const { return 2 * (n_ + 1); }

  Eigen::VectorXd expand(const Eigen::VectorXd& x) const {
    Eigen::VectorXd full(fixed_.size());
    for (size_t s = 0; s < fixed_.size(); ++s)
      full[s] = fixed_[s] ? fixed_value_[s] : x[free_index_[s]];
    return full;
  }

  Eigen::VectorXd reduce(const Eigen::VectorXd& full) const {
    Eigen::VectorXd x(nfree_);
    for (size_t s = 0; s < fixed_.size(); ++s)
      if (free_index_[s] >= 0) x[free_index_[s]] = full[s];
    return x;
  }

  int num_vars() const override { return nfree_; }
  int num_eq() const override { return num_eq_; }
  int num_ineq() const override { return num_ineq_; }

  void var_bounds(Eigen::VectorXd& lower, Eigen::VectorXd& upper) const override {
    lower = Eigen::VectorXd::Constant(nfree_, -kInf);
    upper = Eigen::VectorXd::Constant(nfree_, kInf);
    lower[free_index_[lambda_slot()]] = lambda_lower_;
    upper[free_index_[lambda_slot()]] = lambda_upper_;
  }

  void ineq_bounds(Eigen::VectorXd& lower, Eigen::VectorXd& upper) const override {
    lower.resize(num_ineq_);
    upper.resize(num_ineq_);
    for (int i = 0; i < num_ineq_; i += 2) {
      lower[i] = -kInf;  // theta' - lambda kappa_max <= 0
      upper[i] = 0.0;
      lower[i + 1] = 0.0;  // theta' - lambda kappa_min >= 0
      upper[i + 1] = kInf;
    }
  }

  bool eval_objective(const Eigen::VectorXd& x, double& f) const override {
    const Eigen::VectorXd full = expand(x);
    f = full[lambda_slot()];
    for (int e = 0; e < n_; ++e) {
      const Eigen::Vector4d c = full.segment<4>(2 * e);
      f += w_ * c.dot(K_ * c);
    }
    return std::isfinite(f);
  }

  bool eval_objective_gradient(const Eigen::VectorXd& x,
                               Eigen::VectorXd& grad) const override {
    const Eigen::VectorXd full = expand(x);
    grad = Eigen::VectorXd::Zero(nfree_);
    grad[free_index_[lambda_slot()]] = 1.0;
    for (int e = 0; e < n_; ++e) {
      const Eigen::Vector4d c = full.segment<4>(2 * e);
      const Eigen::Vector4d ge = 2.0 * w_ * (K_ * c);
      for (int i = 0; i < 4; ++i) {
        const int fi = free_index_[2 * e + i];
        if (fi >= 0) grad[fi] += ge[i];
      }
    }
    return grad.allFinite();
  }

  bool eval_eq(const Eigen::VectorXd& x, Eigen::VectorXd& c) const override {
    const Eigen::VectorXd full = expand(x);
    const double lam = full[lambda_slot()];
    const auto& q = gauss12();
    const double h = mesh_.h();
    double qc = 0.0, qs = 0.0;
    for (int e = 0; e < n_; ++e) {
      for (int k = 0; k < kQ; ++k) {
        double th = 0.0;
        for (int i = 0; i < 4; ++i)
          th += full[2 * e + i] * bq_[k].value[i];
        qc += h * q.weight[k] * std::cos(th);
        qs += h * q.weight[k] * std::sin(th);
      }
    }
    c.resize(num_eq_);
    c[0] = lam * qc - dx_;
    c[1] = lam * qs - dy_;
    int row = 2;
    for (const auto& cp : couplings_)
      c[row++] = full[cp.first] + cp.second * lam;
    return c.allFinite();
  }

  bool eval_eq_jacobian(const Eigen::VectorXd& x,
                        Eigen::VectorXd& values) const override {
    const Eigen::VectorXd full = expand(x);
    const double lam = full[lambda_slot()];
    const auto& q = gauss12();
    const double h = mesh_.h();
    double qc = 0.0, qs = 0.0;
    std::vector<std::array<double, 4>> sc(n_), cc(n_);
    for (int e = 0; e < n_; ++e) {
      sc[e] = {0.0, 0.0, 0.0, 0.0};
      cc[e] = {0.0, 0.0, 0.0, 0.0};
      for (int k = 0; k < kQ; ++k) {
        double th = 0.0;
        for (int i = 0; i < 4; ++i)
          th += full[2 * e + i] * bq_[k].value[i];
        const double cw = h * q.weight[k] * std::cos(th);
        const double sw = h * q.weight[k] * std::sin(th);
        qc += cw;
        qs += sw;
        for (int i = 0; i < 4; ++i) {
          sc[e][i] += sw * bq_[k].value[i];
          cc[e][i] += cw * bq_[k].value[i];
        }
      }
    }
    int idx = 0;
    auto emit = [&](int slot, double v) {
      if (free_index_[slot] >= 0) values[idx++] = v;
    };
    for (int e = 0; e < n_; ++e)
      for (int i = 0; i < 4; ++i) emit(2 * e + i, -lam * sc[e][i]);
    emit(lambda_slot(), qc);
    for (int e = 0; e < n_; ++e)
      for (int i = 0; i < 4; ++i) emit(2 * e + i, lam * cc[e][i]);
    emit(lambda_slot(), qs);
    for (const auto& cp : couplings_) {
      emit(cp.first, 1.0);
      emit(lambda_slot(), cp.second);
    }
    return idx == eq_pattern_.size() && values.head(idx).allFinite();
  }

  bool eval_ineq(const Eigen::VectorXd& x, Eigen::VectorXd& c) const override {
    const Eigen::VectorXd full = expand(x);
    const double lam = full[lambda_slot()];
    c.resize(num_ineq_);
    int row = 0;
    for (int e = 0; e < n_; ++e) {
      for (const BasisEval& b : bp_) {
        double tp = 0.0;
        for (int i = 0; i < 4; ++i) tp += full[2 * e + i] * b.du[i];
        c[row++] = tp - lam * p_.bounds.curvature_max;
        c[row++] = tp - lam * p_.bounds.curvature_min;
      }
    }
    return c.allFinite();
  }

  bool eval_ineq_jacobian(const Eigen::VectorXd& x,
                          Eigen::VectorXd& values) const override {
    (void)x;
    int idx = 0;
    auto emit = [&](int slot, double v) {
      if (free_index_[slot] >= 0) values[idx++] = v;
    };
    for (int e = 0; e < n_; ++e) {
      for (const BasisEval& b : bp_) {
        for (int i = 0; i < 4; ++i) emit(2 * e + i, b.du[i]);
        emit(lambda_slot(), -p_.bounds.curvature_max);
        for (int i = 0; i < 4; ++i) emit(2 * e + i, b.du[i]);
        emit(lambda_slot(), -p_.bounds.curvature_min);
      }
    }
    return idx == ineq_pattern_.size() && values.head(idx).allFinite();
  }

  bool eval_hessian(const Eigen::VectorXd& x, double sigma,
                    const Eigen::VectorXd& y_eq, const Eigen::VectorXd& y_ineq,
                    Eigen::VectorXd& values) const override {
    (void)y_ineq;
    const Eigen::VectorXd full = expand(x);
    const double lam = full[lambda_slot()];
    const auto& q = gauss12();
    const double h = mesh_.h();
    int idx = 0;
    auto emit_block = [&](const int* sl, const double* dense, int count) {
      for (int i = 0; i < count; ++i)
        for (int j = 0; j <= i; ++j)
          if (free_index_[sl[i]] >= 0 && free_index_[sl[j]] >= 0)
            values[idx++] = dense[i * count + j];
    };
    for (int e = 0; e < n_; ++e) {
      const int t4[4] = {2 * e, 2 * e + 1, 2 * e + 2, 2 * e + 3};
      double d[16];
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) d[a * 4 + b] = sigma * 2.0 * w_ * K_(a, b);
      emit_block(t4, d, 4);
    }
    for (int e = 0; e < n_; ++e) {
      double sc[4] = {0, 0, 0, 0}, cc[4] = {0, 0, 0, 0};
      double snn[4][4] = {}, cnn[4][4] = {};
      for (int k = 0; k < kQ; ++k) {
        double th = 0.0;
        for (int i = 0; i < 4; ++i)
          th += full[2 * e + i] * bq_[k].value[i];
        const double cw = h * q.weight[k] * std::cos(th);
        const double sw = h * q.weight[k] * std::sin(th);
        for (int a = 0; a < 4; ++a) {
          sc[a] += sw * bq_[k].value[a];
          cc[a] += cw * bq_[k].value[a];
          for (int b = 0; b < 4; ++b) {
            snn[a][b] += sw * bq_[k].value[a] * bq_[k].value[b];
            cnn[a][b] += cw * bq_[k].value[a] * bq_[k].value[b];
          }
        }
      }
      const int t5[5] = {2 * e, 2 * e + 1, 2 * e + 2, 2 * e + 3, lambda_slot()};
      double hx[25] = {};
      for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) hx[a * 5 + b] = -y_eq[0] * lam * cnn[a][b];
        hx[a * 5 + 4] = -y_eq[0] * sc[a];
        hx[4 * 5 + a] = -y_eq[0] * sc[a];
      }
      emit_block(t5, hx, 5);
      double hy[25] = {};
      for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) hy[a * 5 + b] = -y_eq[1] * lam * snn[a][b];
        hy[a * 5 + 4] = y_eq[1] * cc[a];
        hy[4 * 5 + a] = y_eq[1] * cc[a];
      }
      emit_block(t5, hy, 5);
    }
    return idx == hess_pattern_.size() && values.head(idx).allFinite();
  }

  const SparsityPattern& eq_jacobian_pattern() const override {
    return eq_pattern_;
  }
  const SparsityPattern& ineq_jacobian_pattern() const override {
    return ineq_pattern_;
  }
  const SparsityPattern& hessian_pattern() const override {
    return hess_pattern_;
  }

 private:
  const PlanningProblem& p_;
  int n_;
  Mesh mesh_;
  std::vector<bool> fixed_;
  std::vector<double> fixed_value_;
  std::vector<int> free_index_;
  int nfree_{0};
  double dx_{0.0}, dy_{0.0};
  double lambda_lower_{0.0};
  double lambda_upper_{0.0};
  double w_{0.0};
  std::array<BasisEval, kQ> bq_;
  std::vector<BasisEval> bp_;
  Eigen::Matrix4d K_;
  std::vector<std::pair<int, double>> couplings_;  // slot, lambda coefficient
  int num_eq_{0};
  int num_ineq_{0};
  SparsityPattern eq_pattern_, ineq_pattern_, hess_pattern_;
};

// Minimum-bending speed profile: minimize integral(v''^2) over Hermite
// coefficients with all four endpoint values and slopes fixed, plus constant
// bounds on v (and optionally v') at the dynamic points.
class SpeedNlp : public NlpProblem {
 public:
  SpeedNlp(int n, const std::array<double, 4>& bc, const Eigen::VectorXd& vlo,
           const Eigen::VectorXd& vhi, bool slope_rows, double slo, double shi)
      : n_(n), mesh_{n}, vlo_(vlo), vhi_(vhi), slope_rows_(slope_rows),
        slo_(slo), shi_(shi) {
    const double h = mesh_.h();
    const auto& q = gauss12();
    const int slots = 2 * (n_ + 1);
    fixed_.assign(slots, false);
    fixed_value_.assign(slots, 0.0);
    fixed_[0] = true;
    fixed_value_[0] = bc[0];
    fixed_[1] = true;
    fixed_value_[1] = bc[1];
    fixed_[2 * n_] = true;
    fixed_value_[2 * n_] = bc[2];
    fixed_[2 * n_ + 1] = true;
    fixed_value_[2 * n_ + 1] = bc[3];
    free_index_.assign(slots, -1);
    int nf = 0;
    for (int s = 0; s < slots; ++s)
      if (!fixed_[s]) free_index_[s] = nf++;
    nfree_ = nf;

    const int np = static_cast<int>(vlo_.size()) / n_;
    bp_.reserve(np);
    for (int k = 0; k < np; ++k)
      bp_.push_back(element_basis(h, ElementBasis::hermite, (k + 0.5) / np));
    std::array<BasisEval, kQ> bq;
    for (int k = 0; k < kQ; ++k)
      bq[k] = element_basis(h, ElementBasis::hermite, q.xi[k]);
    K_.setZero();
    for (int k = 0; k < kQ; ++k)
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
          K_(a, b) += h * q.weight[k] * bq[k].duu[a] * bq[k].duu[b];

    num_ineq_ = n_ * np * (slope_rows_ ? 2 : 1);
    auto add = [&](SparsityPattern& pat, int row, int slot) {
      if (free_index_[slot] >= 0) pat.add(row, free_index_[slot]);
    };
    int row = 0;
    for (int e = 0; e < n_; ++e) {
      for (int k = 0; k < np; ++k) {
        for (int i = 0; i < 4; ++i) add(ineq_pattern_, row, 2 * e + i);
        ++row;
        if (slope_rows_) {
          for (int i = 0; i < 4; ++i) add(ineq_pattern_, row, 2 * e + i);
          ++row;
        }
      }
    }
    for (int e = 0; e < n_; ++e) {
      const int t4[4] = {2 * e, 2 * e + 1, 2 * e + 2, 2 * e + 3};
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j <= i; ++j)
          if (free_index_[t4[i]] >= 0 && free_index_[t4[j]] >= 0)
            hess_pattern_.add(free_index_[t4[i]], free_index_[t4[j]]);
    }
  }

  Eigen::VectorXd expand(const Eigen::VectorXd& x) const {
    Eigen::VectorXd full(fixed_.size());
    for (size_t s = 0; s < fixed_.size(); ++s)
      full[s] = fixed_[s] ? fixed_value_[s] : x[free_index_[s]];
    return full;
  }

  Eigen::VectorXd reduce(const Eigen::VectorXd& full) const {
    Eigen::VectorXd x(nfree_);
    for (size_t s = 0; s < fixed_.size(); ++s)
      if (free_index_[s] >= 0) x[free_index_[s]] = full[s];
    return x;
  }

  int num_vars() const override { return nfree_; }
  int num_eq() const override { return 0; }
  int num_ineq() const override { return num_ineq_; }

  void var_bounds(Eigen::VectorXd& lower, Eigen::VectorXd& upper) const override {
    lower = Eigen::VectorXd::Constant(nfree_, -kInf);
    upper = Eigen::VectorXd::Constant(nfree_, kInf);
  }

  void ineq_bounds(Eigen::VectorXd& lower, Eigen::VectorXd& upper) const override {
    lower.resize(num_ineq_);
    upper.resize(num_ineq_);
    int row = 0;
    const int np = static_cast<int>(bp_.size());
    for (int e = 0; e < n_; ++e) {
      for (int k = 0; k < np; ++k) {
        lower[row] = vlo_[e * np + k];
        upper[row] = vhi_[e * np + k];
        ++row;
        if (slope_rows_) {
          lower[row] = slo_;
          upper[row] = shi_;
          ++row;
        }
      }
    }
  }

  bool eval_objective(const Eigen::VectorXd& x, double& f) const override {
    const Eigen::VectorXd full = expand(x);
    f = 0.0;
    for (int e = 0; e < n_; ++e) {
      const Eigen::Vector4d c = full.segment<4>(2 * e);
      f += c.dot(K_ * c);
    }
    return std::isfinite(f);
  }

  bool eval_objective_gradient(const Eigen::VectorXd& x,
                               Eigen::VectorXd& grad) const override {
    const Eigen::VectorXd full = expand(x);
    grad = Eigen::VectorXd::Zero(nfree_);
    for (int e = 0; e < n_; ++e) {
      const Eigen::Vector4d c = full.segment<4>(2 * e);
      const Eigen::Vector4d ge = 2.0 * (K_ * c);
      for (int i = 0; i < 4; ++i) {
        const int fi = free_index_[2 * e + i];
        if (fi >= 0) grad[fi] += ge[i];
      }
    }
    return grad.allFinite();
  }

  bool eval_eq(const Eigen::VectorXd&, Eigen::VectorXd& c) const override {
    c.resize(0);
    return true;
  }
  bool eval_eq_jacobian(const Eigen::VectorXd&,
                        Eigen::VectorXd&) const override {
    return true;
  }

  bool eval_ineq(const Eigen::VectorXd& x, Eigen::VectorXd& c) const override {
    const Eigen::VectorXd full = expand(x);
    c.resize(num_ineq_);
    int row = 0;
    for (int e = 0; e < n_; ++e) {
      for (const BasisEval& b : bp_) {
        double v = 0.0, vp = 0.0;
        for (int i = 0; i < 4; ++i) {
          v += full[2 * e + i] * b.value[i];
          vp += full[2 * e + i] * b.du[i];
        }
        c[row++] = v;
        if (slope_rows_) c[row++] = vp;
      }
    }
    return c.allFinite();
  }

  bool eval_ineq_jacobian(const Eigen::VectorXd&,
                          Eigen::VectorXd& values) const override {
    int idx = 0;
    auto emit = [&](int slot, double v) {
      if (free_index_[slot] >= 0) values[idx++] = v;
    };
    for (int e = 0; e < n_; ++e) {
      for (const BasisEval& b : bp_) {
        for (int i = 0; i < 4; ++i) emit(2 * e + i, b.value[i]);
        if (slope_rows_)
          for (int i = 0; i < 4; ++i) emit(2 * e + i, b.du[i]);
      }
    }
    return idx == ineq_pattern_.size() && values.head(idx).allFinite();
  }

  bool eval_hessian(const Eigen::VectorXd&, double sigma,
                    const Eigen::VectorXd&, const Eigen::VectorXd&,
                    Eigen::VectorXd& values) const override {
    int idx = 0;
    for (int e = 0; e < n_; ++e) {
      const int t4[4] = {2 * e, 2 * e + 1, 2 * e + 2, 2 * e + 3};
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j <= i; ++j)
          if (free_index_[t4[i]] >= 0 && free_index_[t4[j]] >= 0)
            values[idx++] = sigma * 2.0 * K_(i, j);
    }
    return idx == hess_pattern_.size();
  }

  const SparsityPattern& eq_jacobian_pattern() const override {
    return eq_pattern_;
  }
  const SparsityPattern& ineq_jacobian_pattern() const override {
    return ineq_pattern_;
  }
  const SparsityPattern& hessian_pattern() const override {
    return hess_pattern_;
  }

 private:
  int n_;
  Mesh mesh_;
  Eigen::VectorXd vlo_, vhi_;
  bool slope_rows_{false};
  double slo_{0.0}, shi_{0.0};
  std::vector<bool> fixed_;
  std::vector<double> fixed_value_;
  std::vector<int> free_index_;
  int nfree_{0};
  std::vector<BasisEval> bp_;
  Eigen::Matrix4d K_;
  int num_ineq_{0};
  SparsityPattern eq_pattern_, ineq_pattern_, hess_pattern_;
};

// Hermite interpolant of the four endpoint conditions on [0, 1]; the
// unconstrained minimizer of the bending objective.
void cubic_profile(double v0, double s0, double v1, double s1, double u,
                   double& value, double& slope) {
  const double u2 = u * u, u3 = u2 * u;
  value = v0 * (1.0 - 3.0 * u2 + 2.0 * u3) + s0 * (u - 2.0 * u2 + u3) +
          v1 * (3.0 * u2 - 2.0 * u3) + s1 * (u3 - u2);
  slope = v0 * (-6.0 * u + 6.0 * u2) + s0 * (1.0 - 4.0 * u + 3.0 * u2) +
          v1 * (6.0 * u - 6.0 * u2) + s1 * (3.0 * u2 - 2.0 * u);
}

SolverOptions aux_options(const PlanningProblem& p) {
  SolverOptions opt;
  opt.relative_tolerance = p.solver.relative_tolerance;
  opt.feasibility_tolerance = p.solver.feasibility_tolerance;
  opt.max_iterations = 200;
  return opt;
}

}  // namespace

const char* to_string(GuessVariant v) {
  switch (v) {
    case GuessVariant::base_a: return "base_a";
    case GuessVariant::base_b: return "base_b";
    case GuessVariant::plus_2pi: return "plus_2pi";
    case GuessVariant::minus_2pi: return "minus_2pi";
  }
  return "unknown";
}


PathGuess path_seed(const PlanningProblem& p, GuessVariant variant) {
  double target = p.end.theta;
  if (variant == GuessVariant::plus_2pi) target += kTwoPi;
  if (variant == GuessVariant::minus_2pi) target -= kTwoPi;

  const double kbox = std::max(std::abs(p.bounds.curvature_min),
                               std::abs(p.bounds.curvature_max));
  double radius = p.min_turn_radius;
  if (kbox > 0.0)
    radius = std::max(radius, 1.05 / kbox);

  for (int attempt = 0; attempt < 60; ++attempt) {
    const double r = radius * std::pow(0.5, attempt);
    std::optional<ArcLineArc> best;
    for (int t1 : {+1, -1}) {
      if (variant == GuessVariant::base_a && t1 < 0) continue;
      if (variant == GuessVariant::base_b && t1 > 0) continue;
      for (int t2 : {+1, -1}) {
        const auto c = csc_candidate(p, target, t1, t2, r);
        if (c && (!best || c->length() < best->length())) best = c;
      }
    }
    if (best) return sample_seed(p, variant, target, *best);
  }

  // Distinct endpoints always admit a candidate above; keep a plain chord
  // ramp as a safety net.
  const int n = p.disc.n;
  PathGuess g;
  g.variant = variant;
  g.theta_end = target;
  g.lambda = std::max(std::hypot(p.end.x - p.start.x, p.end.y - p.start.y),
                      p.min_turn_radius);
  g.theta.resize(2 * (n + 1));
  for (int k = 0; k <= n; ++k) {
    const double u = static_cast<double>(k) / n;
    g.theta[2 * k] = p.start.theta + (target - p.start.theta) * u;
    g.theta[2 * k + 1] = target - p.start.theta;
  }
  return g;
}

std::vector<PathGuess> path_guesses(const PlanningProblem& p) {
  std::vector<PathGuess> out;
  for (GuessVariant v : {GuessVariant::base_a, GuessVariant::base_b,
                         GuessVariant::plus_2pi, GuessVariant::minus_2pi}) {
    const PathGuess seed = path_seed(p, v);
    // Cap the length so the solve stays near the seed's shape instead of
    // drifting into unrelated long-path minima.
    PathNlp nlp(p, seed.theta_end, 1.5 * seed.lambda);
    Eigen::VectorXd full_seed(2 * (p.disc.n + 1) + 1);
    full_seed.head(2 * (p.disc.n + 1)) = seed.theta;
    full_seed[2 * (p.disc.n + 1)] = seed.lambda;
    // A seed that already closes the position gap needs no smoothing pass.
    // That covers straight runs, where the solve would be degenerate: the
    // chord length admits exactly one heading profile, so there is no
    // interior for the barrier to walk through.
    Eigen::VectorXd ceq(nlp.num_eq());
    const Eigen::VectorXd x_seed = nlp.reduce(full_seed);
    if (nlp.eval_eq(x_seed, ceq) &&
        ceq.lpNorm<Eigen::Infinity>() <= p.solver.feasibility_tolerance) {
      out.push_back(seed);
      continue;
    }
    const SolveReport rep = solve(nlp, x_seed, aux_options(p));
    const bool usable =
        rep.status == SolveStatus::converged ||
        (rep.status == SolveStatus::iteration_limit &&
         rep.max_violation <= p.solver.feasibility_tolerance);
    if (!usable) continue;
    PathGuess g = seed;
    const Eigen::VectorXd full = nlp.expand(rep.x);
    g.theta = full.head(2 * (p.disc.n + 1));
    g.lambda = full[2 * (p.disc.n + 1)];
    out.push_back(std::move(g));
  }
  return out;
}

bool speed_guess(const PlanningProblem& p, const PathGuess& g,
                 SpeedGuess& out) {
  const int n = p.disc.n;
  const double h = 1.0 / n;
  const double vmax = p.bounds.speed_max;
  const double v0 = p.start.v, v1 = p.end.v;
  const bool zl = v0 == 0.0, zr = v1 == 0.0;
  out.v.resize(2 * (n + 1));
  out.closed_form = false;

  // Tight arcs limit speed through the angular-rate and normal-acceleration
  // bounds long before the speed bound does; a profile that ignores that
  // starts the main solve with violations the size of v^2 * kappa.
  auto cap_at = [&](double dth) {
    double c = vmax;
    const double adth = std::abs(dth);
    if (adth > 1e-9 * std::max(1.0, g.lambda)) {
      const double wlim = dth > 0.0 ? p.bounds.angular_speed_max
                                    : -p.bounds.angular_speed_min;
      const double alim =
          dth > 0.0 ? p.bounds.accel_n_max : -p.bounds.accel_n_min;
      if (wlim > 0.0) c = std::min(c, wlim * g.lambda / adth);
      if (alim > 0.0) c = std::min(c, std::sqrt(alim * g.lambda / adth));
    }
    return std::max(c, 1e-2 * vmax);
  };
  std::vector<double> node_cap(n + 1);
  double veff = vmax;
  for (int k = 0; k <= n; ++k) {
    node_cap[k] = cap_at(g.theta[2 * k + 1]);
    veff = std::min(veff, node_cap[k]);
  }

  if (zl && zr) {
    const double amp = veff * std::pow(4.0, 2.0 / 3.0);
    for (int k = 1; k < n; ++k) {
      const double u = static_cast<double>(k) / n;
      const double base = u * (1.0 - u);
      out.v[2 * k] = veff * std::pow(4.0 * base, 2.0 / 3.0);
      out.v[2 * k + 1] = amp * (2.0 / 3.0) * std::pow(base, -1.0 / 3.0) *
                         (1.0 - 2.0 * u);
    }
    out.v[0] = 0.0;
    out.v[1] = amp * std::pow(h, 2.0 / 3.0);  // singular amplitude
    out.v[2 * n] = 0.0;
    out.v[2 * n + 1] = amp * std::pow(h, 2.0 / 3.0);
    out.closed_form = true;
    return true;
  }

  // Closed-form singular part for a single zero-speed end; identically zero
  // when both end speeds are positive.
  const double camp = (16.0 / 9.0) * std::pow(2.0, 1.0 / 3.0) * veff;
  auto vs = [&](double u) {
    if (zr) return camp * u * u * std::pow(1.0 - u, 2.0 / 3.0);
    if (zl) return camp * (1.0 - u) * (1.0 - u) * std::pow(u, 2.0 / 3.0);
    return 0.0;
  };
  auto vs_slope = [&](double u) {
    if (zr)
      return camp * (2.0 * u * std::pow(1.0 - u, 2.0 / 3.0) -
                     (2.0 / 3.0) * u * u * std::pow(1.0 - u, -1.0 / 3.0));
    if (zl)
      return camp * (-2.0 * (1.0 - u) * std::pow(u, 2.0 / 3.0) +
                     (2.0 / 3.0) * (1.0 - u) * (1.0 - u) *
                         std::pow(u, -1.0 / 3.0));
    return 0.0;
  };

  std::array<double, 4> bc{};
  bc[0] = zl ? 0.0 : v0;
  bc[1] = zl ? 0.0 : p.start.a_t * g.lambda / v0;
  bc[2] = zr ? 0.0 : v1;
  bc[3] = zr ? 0.0 : p.end.a_t * g.lambda / v1;

  const int np = p.disc.p;
  Eigen::VectorXd vlo(n * np), vhi(n * np);
  bool slope_rows = false;
  double slo = 0.0, shi = 0.0;
  // The boundary speeds are pinned, so the boxes in the end elements must
  // admit them even when the cap there is lower.
  auto end_floor = [&](int e) {
    double f = 0.0;
    if (e == 0) f = std::max(f, v0);
    if (e == n - 1) f = std::max(f, v1);
    return f;
  };
  if (zl || zr) {
    for (int e = 0; e < n; ++e) {
      const double ecap =
          std::max(std::min(node_cap[e], node_cap[e + 1]), end_floor(e));
      for (int k = 0; k < np; ++k) {
        const double u_pt = (e + (k + 0.5) / np) / n;
        vlo[e * np + k] = -vs(u_pt);
        vhi[e * np + k] =
            std::max(ecap - vs(u_pt), vlo[e * np + k] + 0.05 * vmax);
      }
    }
  } else {
    const double vm = std::min(v0, v1);
    slope_rows = true;
    slo = 10.0 * p.bounds.accel_t_min * g.lambda / vm;
    shi = 10.0 * p.bounds.accel_t_max * g.lambda / vm;
    for (int e = 0; e < n; ++e) {
      const double ecap =
          std::max(std::min(node_cap[e], node_cap[e + 1]), end_floor(e));
      for (int k = 0; k < np; ++k) {
        vlo[e * np + k] = std::min(vm / 2.0, 0.5 * ecap);
        vhi[e * np + k] = std::max(ecap, vlo[e * np + k] + 0.05 * vmax);
      }
    }
  }

  SpeedNlp nlp(n, bc, vlo, vhi, slope_rows, slo, shi);
  Eigen::VectorXd full0(2 * (n + 1));
  for (int k = 0; k <= n; ++k) {
    double value, slope;
    cubic_profile(bc[0], bc[1], bc[2], bc[3], static_cast<double>(k) / n,
                  value, slope);
    full0[2 * k] = value;
    full0[2 * k + 1] = slope;
  }
  const SolveReport rep = solve(nlp, nlp.reduce(full0), aux_options(p));
  if (rep.status != SolveStatus::converged) return false;
  const Eigen::VectorXd full = nlp.expand(rep.x);

  for (int k = 0; k <= n; ++k) {
    const double u = static_cast<double>(k) / n;
    out.v[2 * k] = full[2 * k] + vs(u);
    out.v[2 * k + 1] = full[2 * k + 1] + ((k == 0 && zl) || (k == n && zr)
                                              ? 0.0
                                              : vs_slope(u));
  }
  if (zl) {
    out.v[0] = 0.0;
    out.v[1] = camp * std::pow(h, 2.0 / 3.0);  // singular amplitude
  }
  if (zr) {
    out.v[2 * n] = 0.0;
    out.v[2 * n + 1] = camp * std::pow(h, 2.0 / 3.0);
  }
  return true;
}

std::vector<StartingPoint> starting_points(const PlanningProblem& p) {
  std::vector<StartingPoint> out;
  const int n = p.disc.n;
  const Mesh mesh{n};
  const auto& q = gauss12();
  for (const PathGuess& g : path_guesses(p)) {
    SpeedGuess sv;
    if (!speed_guess(p, g, sv)) continue;
    const DofLayout lay = dof_layout(p, g.theta_end);
    Eigen::VectorXd full = Eigen::VectorXd::Zero(lay.total_slots());
    const int nth = 2 * (n + 1);
    full.head(nth) = g.theta;
    full.segment(nth, nth) = sv.v;
    full[lay.lambda_slot()] = g.lambda;

    const FieldCoefficients th{g.theta, false, false};
    double px = p.start.x, py = p.start.y;
    full[lay.pos_x(0)] = px;
    full[lay.pos_y(0)] = py;
    for (int j = 0; j + 1 < lay.num_points; ++j) {
      const double ua = lay.point_u(j);
      const double len = lay.point_u(j + 1) - ua;
      double qc = 0.0, qs = 0.0;
      for (int k = 0; k < kQ; ++k) {
        const double t = evaluate_field(mesh, th, ua + len * q.xi[k]).value;
        qc += q.weight[k] * std::cos(t);
        qs += q.weight[k] * std::sin(t);
      }
      px += g.lambda * len * qc;
      py += g.lambda * len * qs;
      full[lay.pos_x(j + 1)] = px;
      full[lay.pos_y(j + 1)] = py;
    }
    out.push_back({g.variant, g.theta_end, lay.reduce(full)});
  }
  return out;
}

}  // namespace ctraj
