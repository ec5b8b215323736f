#pragma once

// Independent oracles shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>

#include "radau_ep/stage_solver.hpp"

namespace radau_ep::oracle {

// Textbook radial return for linear isotropic hardening, written out directly.
struct RadialReturn {
  PlasticState state;
  SymTensor2 S;
  Mat6 C;
};

inline RadialReturn radial_return(const MaterialParams& p, const PlasticState& st, const SymTensor2& E) {
  const double mu = p.mu(), k = p.kappa();
  const Mat3 e = E.to_matrix();
  const Mat3 dev = e - (e.trace() / 3.0) * Mat3::Identity();
  const Mat3 s_tr = 2.0 * mu * (dev - st.Ep.to_matrix());
  const double q = std::sqrt((s_tr.array() * s_tr.array()).sum());
  const double r = std::sqrt(2.0 / 3.0) * (p.sigma_Y + p.H * st.alpha);
  RadialReturn out;
  Mat6 Cel = k * dyad(SymTensor2::identity(), SymTensor2::identity()).mat() +
             2.0 * mu * deviatoric_projector().mat();
  if (q - r <= 0.0) {
    out.state = st;
    out.S = SymTensor2::from_matrix(s_tr + k * e.trace() * Mat3::Identity());
    out.C = Cel;
    return out;
  }
  const double dg = (q - r) / (2.0 * mu + 2.0 / 3.0 * p.H);
  const Mat3 n = s_tr / q;
  out.state.Ep = SymTensor2::from_matrix(st.Ep.to_matrix() + dg * n);
  out.state.alpha = st.alpha + std::sqrt(2.0 / 3.0) * dg;
  out.S = SymTensor2::from_matrix(s_tr - 2.0 * mu * dg * n + k * e.trace() * Mat3::Identity());
  const double theta = 1.0 - 2.0 * mu * dg / q;
  const double theta_bar = 1.0 / (1.0 + p.H / (3.0 * mu)) - (1.0 - theta);
  const SymTensor2 N = SymTensor2::from_matrix(n);
  out.C = k * dyad(SymTensor2::identity(), SymTensor2::identity()).mat() +
          2.0 * mu * theta * deviatoric_projector().mat() - 2.0 * mu * theta_bar * dyad(N, N).mat();
  return out;
}

// Central differences of the step map E_{n+1} -> S_{n+1}.
inline Mat6 fd_tangent(const MaterialParams& p, const ButcherTableau& t, const PlasticState& st,
                StrainHistory h, const StepConfig& cfg, double eps = 1e-7) {
  Mat6 C;
  StepConfig c2 = cfg;
  c2.compute_tangent = false;
  const double scale = std::max(norm(h.E_next), 1e-6);
  for (int k = 0; k < 6; ++k) {
    StrainHistory hp = h, hm = h;
    const double d = eps * scale;
    hp.E_next[k] += d;
    hm.E_next[k] -= d;
    const Vec6 col = (step(p, t, st, hp, c2).stress.S.vec() -
                      step(p, t, st, hm, c2).stress.S.vec()) / (2.0 * d);
    C.col(k) = col;
  }
  return C;
}

inline double rel_diff(const Mat6& a, const Mat6& b) { return (a - b).norm() / b.norm(); }

}  // namespace radau_ep::oracle
