#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "butcher.hpp"
#include "errors.hpp"
#include "material.hpp"
#include "strain_path.hpp"
#include "tensor.hpp"

namespace radau_ep {

struct StageSolution {
  std::vector<SymTensor2> Ep_stages;
  std::vector<SymTensor2> dEp_stages;  // Ep_stages - Ep_n
  std::vector<double> dGamma_stages;
  std::vector<double> Lambda_stages;
  std::vector<SymTensor2> flow_directions;
  std::vector<double> x_norms;
  std::vector<bool> active;
  /// False when no clamping made all interior increments nonnegative.
  bool kkt_consistent = true;
  int iterations = 0;
  double residual = 0.0;
};

struct StageSolverOptions {
  double tol = 1e-12;
  /// Keep iterating below tol until this level or until progress stalls
  /// (zero: stop on stagnation only).
  double polish_tol = 0.0;
  int max_iterations = 50;
  /// Optional linear coupling E_j = Ebar_j + L Ep_j (used by the material
  /// point driver to keep S_zz = 0). Null means L = 0.
  const Mat6* coupling = nullptr;
  /// Clamp negative interior increments (off: every stage stays plastic).
  bool active_set = true;
};

namespace detail {

struct StageSystem {
  const MaterialParams& p;
  const ButcherTableau& t;
  const PlasticState& st;
  const std::vector<SymTensor2>& Ebar;
  Mat6 M;   // I - P L
  Mat6 PL;  // P L
  std::vector<Vec6> x0;  // x_i at Ep_i = Ep_n

  StageSystem(const MaterialParams& p_, const ButcherTableau& t_, const PlasticState& st_,
              const std::vector<SymTensor2>& Ebar_, const Mat6* L)
      : p(p_), t(t_), st(st_), Ebar(Ebar_) {
    const Mat6& P = deviatoric_projector().mat();
    PL = L ? Mat6(P * *L) : Mat6(Mat6::Zero());
    M = Mat6::Identity() - PL;
    for (const auto& e : Ebar) x0.push_back(P * e.vec() - M * st.Ep.vec());
  }

  int s() const { return t.s; }
  int n() const { return 7 * t.s; }

  SymTensor2 Ep(const Eigen::VectorXd& z, int i) const {
    return SymTensor2(Vec6(st.Ep.vec() + z.segment<6>(6 * i)));
  }
  double dG(const Eigen::VectorXd& z, int i) const { return z[6 * s() + i]; }

  /// x_i = P E_i - Ep_i with E_i = Ebar_i + L Ep_i; the unknowns are the
  /// increments Ep_i - Ep_n.
  SymTensor2 xdev(const Eigen::VectorXd& z, int i) const {
    return SymTensor2(Vec6(x0[i] - M * z.segment<6>(6 * i)));
  }

  double Lambda(const Eigen::VectorXd& z, int i) const {
    double a = 0.0;
    for (int j = 0; j < s(); ++j) a += t.A(i, j) * dG(z, j);
    return st.alpha + kSqrt23 * a;
  }

  struct Eval {
    Eigen::VectorXd R;
    Eigen::MatrixXd J;
    std::vector<SymTensor2> N;
    std::vector<double> xn;
  };

  Eval evaluate(const Eigen::VectorXd& z, const std::vector<bool>& active,
                bool with_jacobian) const {
    const int ns = s();
    const double two_mu = 2.0 * p.mu();
    Eval ev;
    ev.R.setZero(n());
    if (with_jacobian) ev.J.setZero(n(), n());
    ev.N.resize(ns);
    ev.xn.resize(ns);
    std::vector<Mat6> DM(ns, Mat6::Zero());
    for (int j = 0; j < ns; ++j) {
      const SymTensor2 x = xdev(z, j);
      const double xn = norm(x);
      ev.xn[j] = xn;
      if (xn > 0.0) {
        ev.N[j] = x / xn;
        if (with_jacobian) {
          const SymTensor4 D = (1.0 / xn) * (SymTensor4::identity() - dyad(ev.N[j], ev.N[j]));
          DM[j] = D.mat() * M;
        }
      } else if (active[j]) {
        throw StepFailure("stage solver: undefined flow direction (zero deviator)", 0.0);
      }
    }
    for (int i = 0; i < ns; ++i) {
      Vec6 r1 = z.segment<6>(6 * i);
      for (int j = 0; j < ns; ++j) r1 -= t.A(i, j) * dG(z, j) * ev.N[j].vec();
      ev.R.segment<6>(6 * i) = r1;
      const int row3 = 6 * ns + i;
      if (active[i]) {
        const double lam = Lambda(z, i);
        ev.R[row3] = ev.xn[i] - kSqrt23 * (p.sigma_Y + hardening(p, lam)) / two_mu;
      } else {
        ev.R[row3] = dG(z, i);
      }
      if (!with_jacobian) continue;
      for (int k = 0; k < ns; ++k) {
        auto blk = ev.J.block<6, 6>(6 * i, 6 * k);
        if (i == k) blk.setIdentity();
        blk += t.A(i, k) * dG(z, k) * DM[k];
        ev.J.block<6, 1>(6 * i, 6 * ns + k) = -t.A(i, k) * ev.N[k].vec();
      }
      if (active[i]) {
        ev.J.block<1, 6>(row3, 6 * i) = -contraction_row(ev.N[i]) * M;
        const double k2 = hardening_d1(p, Lambda(z, i));
        for (int k = 0; k < ns; ++k)
          ev.J(row3, 6 * ns + k) = -(2.0 / 3.0) * k2 * t.A(i, k) / two_mu;
      } else {
        ev.J(row3, 6 * ns + i) = 1.0;
      }
    }
    return ev;
  }

  /// Yield function of stage i in stress units.
  double stage_yield(const Eigen::VectorXd& z, int i) const {
    return 2.0 * p.mu() * norm(xdev(z, i)) - yield_radius(p, Lambda(z, i));
  }
};

inline int newton(const StageSystem& sys, Eigen::VectorXd& z, const std::vector<bool>& active,
                  const StageSolverOptions& opt, double& res_out) {
  double res = sys.evaluate(z, active, false).R.norm();
  int it = 0;
  bool below = res <= opt.tol;
  while (it < opt.max_iterations) {
    if (res <= opt.polish_tol) break;
    auto ev = sys.evaluate(z, active, true);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(ev.J);
    const Eigen::VectorXd dz = lu.solve(-ev.R);
    if (!dz.allFinite()) break;
    Eigen::VectorXd zt = z + dz;
    double rt;
    try {
      rt = sys.evaluate(zt, active, false).R.norm();
    } catch (const StepFailure&) {
      break;
    }
    ++it;
    if (below && !(rt < 0.5 * res)) {
      // Polishing stalled at round-off; keep the better iterate.
      if (rt < res) { z = zt; res = rt; }
      break;
    }
    z = zt;
    res = rt;
    below = res <= opt.tol;
  }
  res_out = res;
  return it;
}

}  // namespace detail

/// Solves the coupled stage equations for one quadrature point. Interior
/// stages whose consistency increment turns negative are clamped to zero.
inline StageSolution solve_stages(const MaterialParams& p, const ButcherTableau& t,
                                  const PlasticState& state_n,
                                  const std::vector<SymTensor2>& stage_strains,
                                  const StageSolverOptions& opt = {}) {
  const int s = t.s;
  if (static_cast<int>(stage_strains.size()) != s)
    throw InvalidArgument("solve_stages: expected one strain per stage");
  for (const auto& e : stage_strains)
    if (!e.all_finite()) throw InvalidArgument("solve_stages: non-finite stage strain");

  detail::StageSystem sys(p, t, state_n, stage_strains, opt.coupling);
  std::vector<bool> active(s, true);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(7 * s);
  auto reset = [&] { z.setZero(); };

  int total_it = 0;
  double res = 0.0;
  total_it += detail::newton(sys, z, active, opt, res);
  bool kkt = true;
  if (res <= opt.tol && opt.active_set) {
    // Clamp negative interior increments one at a time (most negative first).
    // If a clamped stage then lies outside the yield surface the collocation
    // system has no sign-consistent solution and the unclamped one is kept.
    const Eigen::VectorXd z_all = z;
    const double res_all = res;
    const double f_tol = 1e-10 * std::max(1.0, yield_radius(p, state_n.alpha));
    bool clamped = false;
    for (int pass = 0; pass + 1 < s; ++pass) {
      int worst = -1;
      double worst_val = -1e-14;
      for (int i = 0; i + 1 < s; ++i) {
        if (active[i] && z[6 * s + i] < worst_val) {
          worst_val = z[6 * s + i];
          worst = i;
        }
      }
      if (worst < 0) break;
      active[worst] = false;
      clamped = true;
      reset();
      total_it += detail::newton(sys, z, active, opt, res);
      if (!(res <= opt.tol)) break;
    }
    if (clamped) {
      bool ok = res <= opt.tol;
      for (int i = 0; ok && i < s; ++i)
        if (!active[i] && sys.stage_yield(z, i) > f_tol) ok = false;
      for (int i = 0; ok && i < s; ++i)
        if (active[i] && z[6 * s + i] < -1e-14 && i + 1 < s) ok = false;
      if (!ok) {
        std::fill(active.begin(), active.end(), true);
        z = z_all;
        res = res_all;
        kkt = false;
      }
    }
    for (int i = 0; i < s; ++i)
      if (z[6 * s + i] < -1e-14) kkt = false;
  }
  if (!(res <= opt.tol))
    throw StepFailure("stage solver did not converge (residual " + std::to_string(res) + ")",
                      res);

  StageSolution sol;
  sol.iterations = total_it;
  sol.residual = res;
  sol.active = active;
  sol.kkt_consistent = kkt;
  auto ev = sys.evaluate(z, active, false);
  for (int i = 0; i < s; ++i) {
    sol.Ep_stages.push_back(sys.Ep(z, i));
    sol.dEp_stages.push_back(SymTensor2(Vec6(z.segment<6>(6 * i))));
    sol.dGamma_stages.push_back(sys.dG(z, i));
    sol.Lambda_stages.push_back(sys.Lambda(z, i));
    sol.flow_directions.push_back(ev.N[i]);
    sol.x_norms.push_back(ev.xn[i]);
  }
  return sol;
}

/// dEp_s/dE_{n+1} given G_i = dE_i/dE_{n+1} for every stage (6x6 each).
inline Mat6 plastic_strain_sensitivity(const MaterialParams& p, const ButcherTableau& t,
                                       const PlasticState& state_n,
                                       const std::vector<SymTensor2>& stage_strains,
                                       const StageSolution& sol,
                                       const std::vector<Mat6>& G) {
  const int s = t.s;
  detail::StageSystem sys(p, t, state_n, stage_strains, nullptr);
  Eigen::VectorXd z(7 * s);
  for (int i = 0; i < s; ++i) {
    z.segment<6>(6 * i) = sol.dEp_stages[i].vec();
    z[6 * s + i] = sol.dGamma_stages[i];
  }
  auto ev = sys.evaluate(z, sol.active, true);
  const Mat6& P = deviatoric_projector().mat();
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(7 * s, 6);
  for (int i = 0; i < s; ++i) {
    Mat6 d1 = Mat6::Zero();
    for (int j = 0; j < s; ++j) {
      if (sol.x_norms[j] <= 0.0) continue;
      const Mat6 D = (1.0 / sol.x_norms[j]) *
                     (Mat6::Identity() - dyad(ev.N[j], ev.N[j]).mat());
      d1 -= t.A(i, j) * sol.dGamma_stages[j] * D * P * G[j];
    }
    rhs.block<6, 6>(6 * i, 0) = -d1;
    if (sol.active[i]) rhs.block<1, 6>(6 * s + i, 0) = -contraction_row(ev.N[i]) * P * G[i];
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(ev.J);
  if (!lu.isInvertible())
    throw TangentFailure("consistent tangent: singular stage Jacobian");
  const Eigen::MatrixXd dz = lu.solve(rhs);
  if (!dz.allFinite()) throw TangentFailure("consistent tangent: non-finite solution");
  return dz.block<6, 6>(6 * (s - 1), 0);
}

/// Tangent for a step without switching point: G_i = cbar_i I.
inline SymTensor4 consistent_tangent(const MaterialParams& p, const ButcherTableau& t,
                                     const PlasticState& state_n, const StageSolution& sol,
                                     const std::vector<SymTensor2>& stage_strains,
                                     Interpolation mode) {
  std::vector<Mat6> G;
  for (int i = 0; i < t.s; ++i) {
    const double c = t.c[i];
    double cbar = 1.0;
    if (mode == Interpolation::Linear) cbar = c;
    if (mode == Interpolation::Quadratic) cbar = 0.5 * c * (c + 1.0);
    G.push_back(cbar * Mat6::Identity());
  }
  const Mat6 dEp = plastic_strain_sensitivity(p, t, state_n, stage_strains, sol, G);
  return SymTensor4(elasticity_tensor(p).mat() - 2.0 * p.mu() * dEp);
}

struct StepConfig {
  Interpolation interpolation = Interpolation::Linear;
  SpDetection sp_detection = SpDetection::Off;
  bool compute_tangent = true;
  StageSolverOptions solver;
};

struct StepResult {
  PlasticState new_state;
  StressResult stress;
  SymTensor4 tangent;
  std::vector<SymTensor2> stage_strains_used;
  StageSolution stages;
  std::optional<SwitchingPoint> sp;
  Interpolation interpolation_used = Interpolation::Constant;
  bool plastic = false;
  int iterations = 0;
};

namespace detail {

/// Start-of-step trial values at least this far below zero count as elastic
/// for switching-point purposes.
inline double sp_elastic_margin(const MaterialParams& p, const PlasticState& st) {
  return 1e-9 * std::max(1.0, yield_radius(p, st.alpha));
}

inline StepResult elastic_result(const MaterialParams& p, const PlasticState& st,
                                 const SymTensor2& E) {
  StepResult r;
  r.new_state = st;
  r.stress = stress(p, E, st);
  r.tangent = elasticity_tensor(p);
  return r;
}

}  // namespace detail

/// One predictor-corrector step at a quadrature point.
inline StepResult step(const MaterialParams& p, const ButcherTableau& t,
                       const PlasticState& state_n, const StrainHistory& h,
                       const StepConfig& cfg) {
  const double f_tr = yield_trial(p, h.E_next, state_n);
  if (!(f_tr > 0.0)) return detail::elastic_result(p, state_n, h.E_next);

  Interpolation mode = cfg.interpolation;
  if (mode == Interpolation::Quadratic && !h.E_prev) mode = Interpolation::Linear;

  std::optional<SwitchingPoint> sp;
  if (cfg.sp_detection != SpDetection::Off &&
      yield_trial(p, h.E_n, state_n) < -detail::sp_elastic_margin(p, state_n)) {
    SpDetection v = cfg.sp_detection;
    // A linear interpolation run never uses the quadratic path.
    if (v == SpDetection::Quadratic && mode != Interpolation::Quadratic) v = SpDetection::Linear;
    sp = detect_sp(v, h, p, state_n);
    if (sp && 1.0 - sp->x < 1e-14) return detail::elastic_result(p, state_n, h.E_next);
  }

  const int s = t.s;
  std::vector<SymTensor2> Es(s);
  for (int i = 0; i < s; ++i)
    Es[i] = sp ? post_sp_stage_strain(h, *sp, mode, t.c[i]) : stage_strain(h, mode, t.c[i]);
  Es[s - 1] = h.E_next;

  StepResult r;
  r.sp = sp;
  r.interpolation_used = mode;
  r.stage_strains_used = Es;
  r.stages = solve_stages(p, t, state_n, Es, cfg.solver);
  r.iterations = r.stages.iterations;
  r.new_state.Ep = r.stages.Ep_stages[s - 1];
  r.new_state.alpha = r.stages.Lambda_stages[s - 1];
  r.plastic = true;
  r.stress = stress(p, h.E_next, r.new_state);
  if (!cfg.compute_tangent) {
    r.tangent = elasticity_tensor(p);
    return r;
  }

  std::vector<Mat6> G(s);
  for (int i = 0; i < s; ++i) {
    const double c = t.c[i];
    if (mode == Interpolation::Constant) {
      G[i] = Mat6::Identity();
    } else if (!sp) {
      G[i] = (mode == Interpolation::Quadratic ? 0.5 * c * (c + 1.0) : c) * Mat6::Identity();
    } else if (sp->variant == SpDetection::Extrapolation) {
      G[i] = c * Mat6::Identity();
    } else {
      // E_i = path(tau_i), tau_i = x + c_i (1 - x), x = x(E_{n+1}).
      const SpDetection v = sp->variant;
      const double x = sp->x;
      const double tau = x + c * (1.0 - x);
      const SymTensor2 rate_x = v == SpDetection::Quadratic ? path_quadratic_rate(h, x)
                                                            : path_linear_rate(h, x);
      const SymTensor2 rate_tau = v == SpDetection::Quadratic ? path_quadratic_rate(h, tau)
                                                              : path_linear_rate(h, tau);
      const SymTensor2 xsp = deviator(sp->E_sp) - state_n.Ep;
      const SymTensor2 Nsp = xsp / norm(xsp);
      const double denom = contract(Nsp, rate_x);
      if (denom == 0.0) throw TangentFailure("switching point tangent: path tangent to yield surface");
      const Eigen::RowVector<double, 6> dx = -path_weight_next(v, x) * contraction_row(Nsp) / denom;
      G[i] = path_weight_next(v, tau) * Mat6::Identity() +
             (1.0 - c) * rate_tau.vec() * dx;
    }
  }
  if (sp || mode == Interpolation::Constant) G[s - 1] = Mat6::Identity();
  const Mat6 dEp = plastic_strain_sensitivity(p, t, state_n, Es, r.stages, G);
  r.tangent = SymTensor4(elasticity_tensor(p).mat() - 2.0 * p.mu() * dEp);
  return r;
}

}  // namespace radau_ep
