#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "butcher.hpp"
#include "errors.hpp"
#include "material.hpp"
#include "stage_solver.hpp"
#include "strain_path.hpp"
#include "tensor.hpp"

namespace radau_ep {

using Vec3 = Eigen::Vector3d;

/// Prescribed displacement of one DOF (node * 3 + component).
struct DofConstraint {
  int dof = 0;
  std::function<double(double)> u;  // empty: fixed at zero
  double value(double t) const { return u ? u(t) : 0.0; }
};

/// Hex8 mesh; element nodes follow the usual ordering (bottom face
/// counter-clockwise, then top face).
struct Mesh {
  std::vector<Vec3> nodes;
  std::vector<std::array<int, 8>> elements;
  std::vector<DofConstraint> constraints;

  int num_dofs() const { return 3 * static_cast<int>(nodes.size()); }
};

inline constexpr int kGaussPerElement = 8;

inline const std::array<Vec3, 8>& hex8_corners() {
  static const std::array<Vec3, 8> c = {Vec3(-1, -1, -1), Vec3(1, -1, -1), Vec3(1, 1, -1),
                                        Vec3(-1, 1, -1),  Vec3(-1, -1, 1), Vec3(1, -1, 1),
                                        Vec3(1, 1, 1),    Vec3(-1, 1, 1)};
  return c;
}

/// 2x2x2 Gauss points (weights all one).
inline const std::array<Vec3, 8>& gauss_points() {
  static const std::array<Vec3, 8> g = [] {
    std::array<Vec3, 8> r;
    const double a = 1.0 / std::sqrt(3.0);
    for (int k = 0; k < 8; ++k) r[k] = a * hex8_corners()[k];
    return r;
  }();
  return g;
}

/// Shape function derivatives with respect to the parent coordinates (8x3).
inline Eigen::Matrix<double, 8, 3> hex8_dshape(const Vec3& xi) {
  Eigen::Matrix<double, 8, 3> d;
  for (int a = 0; a < 8; ++a) {
    const Vec3& c = hex8_corners()[a];
    d(a, 0) = 0.125 * c[0] * (1 + c[1] * xi[1]) * (1 + c[2] * xi[2]);
    d(a, 1) = 0.125 * c[1] * (1 + c[0] * xi[0]) * (1 + c[2] * xi[2]);
    d(a, 2) = 0.125 * c[2] * (1 + c[0] * xi[0]) * (1 + c[1] * xi[1]);
  }
  return d;
}

/// Reference-configuration data at one Gauss point.
struct GaussGeometry {
  Eigen::Matrix<double, 8, 3> dNdX;
  double dV = 0.0;  // detJ * weight
};

inline GaussGeometry gauss_geometry(const Mesh& m, int e, int g) {
  Eigen::Matrix<double, 8, 3> X;
  for (int a = 0; a < 8; ++a) X.row(a) = m.nodes[m.elements[e][a]].transpose();
  const Eigen::Matrix<double, 8, 3> dNdxi = hex8_dshape(gauss_points()[g]);
  const Mat3 J = X.transpose() * dNdxi;  // dX/dxi
  const double det = J.determinant();
  if (!(det > 0.0))
    throw ElementInversion("element " + std::to_string(e) + " gauss point " +
                           std::to_string(g) + ": non-positive Jacobian");
  GaussGeometry gg;
  gg.dNdX = dNdxi * J.inverse();
  gg.dV = det;
  return gg;
}

inline Mat3 deformation_gradient(const GaussGeometry& gg, const Eigen::Matrix<double, 8, 3>& ue) {
  return Mat3::Identity() + ue.transpose() * gg.dNdX;
}

inline SymTensor2 green_lagrange(const Mat3& F) {
  return SymTensor2::from_matrix(0.5 * (F.transpose() * F - Mat3::Identity()));
}

inline Eigen::Matrix<double, 8, 3> element_displacements(const Mesh& m, int e,
                                                         const Eigen::VectorXd& u) {
  Eigen::Matrix<double, 8, 3> ue;
  for (int a = 0; a < 8; ++a)
    for (int k = 0; k < 3; ++k) ue(a, k) = u[3 * m.elements[e][a] + k];
  return ue;
}

/// Green-Lagrange strain at Gauss point g of element e.
inline SymTensor2 green_lagrange_strain(const Mesh& m, int e, const Eigen::VectorXd& u, int g) {
  const GaussGeometry gg = gauss_geometry(m, e, g);
  return green_lagrange(deformation_gradient(gg, element_displacements(m, e, u)));
}

/// Strain-displacement matrix for true tensor components (6x24).
inline Eigen::Matrix<double, 6, 24> strain_displacement(const GaussGeometry& gg, const Mat3& F) {
  static constexpr int I[6] = {0, 1, 2, 0, 1, 2};
  static constexpr int J[6] = {0, 1, 2, 1, 2, 0};
  Eigen::Matrix<double, 6, 24> B;
  for (int r = 0; r < 6; ++r)
    for (int a = 0; a < 8; ++a)
      for (int k = 0; k < 3; ++k)
        B(r, 3 * a + k) = 0.5 * (F(k, I[r]) * gg.dNdX(a, J[r]) + F(k, J[r]) * gg.dNdX(a, I[r]));
  return B;
}

/// Committed data at one Gauss point.
struct GaussPointState {
  PlasticState state;
  std::optional<SymTensor2> E_prev;
  SymTensor2 E_n;
  SymTensor2 S;
};

enum class TangentMode { Consistent, Elastic, Perturbed };

struct FemOptions {
  StepConfig step;
  TangentMode tangent = TangentMode::Consistent;
  // Converged when ||r|| <= rel_tol ||f_int|| + abs_tol, or at the round-off
  // floor: ||r|| is below stall_tol ||f_int|| and no longer halves relative
  // to the best earlier iterate.
  double rel_tol = 1e-15;
  double abs_tol = 1e-300;
  double stall_tol = 1e-8;
  int max_iterations = 25;
  bool extrapolate_guess = true;
};

struct GlobalState {
  Eigen::VectorXd u;
  Eigen::VectorXd u_prev;
  double time = 0.0;
  double last_dt = 0.0;
  std::vector<GaussPointState> gp;
  int steps = 0;
};

struct NewtonLog {
  std::vector<double> residuals;  // free-DOF residual norm per assembly
  int iterations = 0;
};

class FemSolver {
 public:
  FemSolver(Mesh mesh, MaterialParams params, ButcherTableau tableau, FemOptions opt = {})
      : mesh_(std::move(mesh)), p_(params), t_(std::move(tableau)), opt_(opt) {
    const int n = mesh_.num_dofs();
    prescribed_.assign(n, -1);
    for (int k = 0; k < static_cast<int>(mesh_.constraints.size()); ++k) {
      const int d = mesh_.constraints[k].dof;
      if (d < 0 || d >= n) throw InvalidArgument("constraint on unknown dof");
      prescribed_[d] = k;
    }
    free_index_.assign(n, -1);
    for (int d = 0; d < n; ++d)
      if (prescribed_[d] < 0) free_index_[d] = n_free_++;
    geom_.reserve(mesh_.elements.size() * kGaussPerElement);
    for (int e = 0; e < static_cast<int>(mesh_.elements.size()); ++e)
      for (int g = 0; g < kGaussPerElement; ++g) geom_.push_back(gauss_geometry(mesh_, e, g));
  }

  const Mesh& mesh() const { return mesh_; }
  const MaterialParams& params() const { return p_; }
  const ButcherTableau& tableau() const { return t_; }
  FemOptions& options() { return opt_; }
  int num_free() const { return n_free_; }

  GlobalState initial_state() const {
    GlobalState s;
    s.u = Eigen::VectorXd::Zero(mesh_.num_dofs());
    s.u_prev = s.u;
    s.gp.resize(geom_.size());
    for (auto& g : s.gp) g.S = SymTensor2::zero();
    return s;
  }

  struct Assembly {
    Eigen::VectorXd f_int;
    Eigen::SparseMatrix<double> K_ff;
    Eigen::SparseMatrix<double> K_fp;  // free rows, constraint columns
    std::vector<StepResult> results;
    std::vector<SymTensor2> strains;
  };

  /// Internal forces and free-free tangent at displacement u for a step
  /// of size dt starting from the committed state.
  Assembly assemble(const GlobalState& st, const Eigen::VectorXd& u, double dt,
                    bool with_tangent = true) const {
    Assembly a;
    a.f_int = Eigen::VectorXd::Zero(mesh_.num_dofs());
    a.results.resize(geom_.size());
    a.strains.resize(geom_.size());
    std::vector<Eigen::Triplet<double>> trip;
    std::vector<Eigen::Triplet<double>> trip_p;
    if (with_tangent) trip.reserve(mesh_.elements.size() * 24 * 24);
    const Vec6& w = contraction_weights();
    const SymTensor4 Cel = elasticity_tensor(p_);
    StepConfig cfg = opt_.step;
    cfg.compute_tangent = with_tangent && opt_.tangent != TangentMode::Elastic;
    for (int e = 0; e < static_cast<int>(mesh_.elements.size()); ++e) {
      const Eigen::Matrix<double, 8, 3> ue = element_displacements(mesh_, e, u);
      Eigen::Matrix<double, 24, 1> fe = Eigen::Matrix<double, 24, 1>::Zero();
      Eigen::Matrix<double, 24, 24> Ke = Eigen::Matrix<double, 24, 24>::Zero();
      for (int g = 0; g < kGaussPerElement; ++g) {
        const int idx = e * kGaussPerElement + g;
        const GaussGeometry& gg = geom_[idx];
        const Mat3 F = deformation_gradient(gg, ue);
        if (!(F.determinant() > 0.0))
          throw ElementInversion("element " + std::to_string(e) + ": inverted deformation");
        const SymTensor2 E = green_lagrange(F);
        const GaussPointState& gs = st.gp[idx];
        StrainHistory h{gs.E_prev, gs.E_n, E, dt, st.time};
        StepResult r;
        try {
          r = step(p_, t_, gs.state, h, cfg);
        } catch (const StepFailure& ex) {
          throw StepFailure("element " + std::to_string(e) + " gauss point " +
                                std::to_string(g) + ": " + ex.what(),
                            ex.residual());
        }
        const Eigen::Matrix<double, 6, 24> B = strain_displacement(gg, F);
        const Vec6 wS = w.cwiseProduct(r.stress.S.vec());
        fe += B.transpose() * wS * gg.dV;
        if (with_tangent) {
          Mat6 C = r.tangent.mat();
          if (opt_.tangent == TangentMode::Elastic) C = Cel.mat();
          if (opt_.tangent == TangentMode::Perturbed) C = 0.5 * (C + Cel.mat());
          Ke += B.transpose() * w.asDiagonal() * C * B * gg.dV;
          const Mat3 S = r.stress.S.to_matrix();
          for (int a1 = 0; a1 < 8; ++a1)
            for (int b1 = 0; b1 < 8; ++b1) {
              const double gab = gg.dNdX.row(a1) * S * gg.dNdX.row(b1).transpose();
              for (int k = 0; k < 3; ++k) Ke(3 * a1 + k, 3 * b1 + k) += gab * gg.dV;
            }
        }
        a.strains[idx] = E;
        a.results[idx] = std::move(r);
      }
      for (int i = 0; i < 24; ++i) {
        const int gi = 3 * mesh_.elements[e][i / 3] + i % 3;
        a.f_int[gi] += fe[i];
        if (!with_tangent || free_index_[gi] < 0) continue;
        for (int j = 0; j < 24; ++j) {
          const int gj = 3 * mesh_.elements[e][j / 3] + j % 3;
          if (free_index_[gj] < 0)
            trip_p.emplace_back(free_index_[gi], prescribed_[gj], Ke(i, j));
          else
            trip.emplace_back(free_index_[gi], free_index_[gj], Ke(i, j));
        }
      }
    }
    if (with_tangent) {
      a.K_ff.resize(n_free_, n_free_);
      a.K_ff.setFromTriplets(trip.begin(), trip.end());
      a.K_fp.resize(n_free_, static_cast<int>(mesh_.constraints.size()));
      a.K_fp.setFromTriplets(trip_p.begin(), trip_p.end());
    }
    return a;
  }

  /// Advances the state to t_next by global Newton iteration and commits
  /// the Gauss-point results on convergence.
  NewtonLog solve_time_step(GlobalState& st, double t_next) const {
    const double dt = t_next - st.time;
    if (!(dt > 0.0)) throw InvalidArgument("solve_time_step: t_next must exceed current time");
    Eigen::VectorXd u = st.u;
    if (opt_.extrapolate_guess && st.steps > 0) {
      const double ratio = dt / last_dt_or(st, dt);
      u += ratio * (st.u - st.u_prev);
      for (const auto& c : mesh_.constraints) u[c.dof] = c.value(t_next);
    } else {
      u = dirichlet_predictor(st, t_next);
    }

    NewtonLog log;
    double best = std::numeric_limits<double>::infinity();
    for (int it = 0; it <= opt_.max_iterations; ++it) {
      Assembly a = assemble(st, u, dt, true);
      Eigen::VectorXd r(n_free_);
      for (int d = 0; d < mesh_.num_dofs(); ++d)
        if (free_index_[d] >= 0) r[free_index_[d]] = a.f_int[d];
      const double rn = r.norm();
      log.residuals.push_back(rn);
      const double fn = a.f_int.norm();
      const bool tight = rn <= opt_.rel_tol * fn + opt_.abs_tol;
      const bool stalled = rn <= opt_.stall_tol * fn && rn > 0.5 * best;
      best = std::min(best, rn);
      if (tight || stalled) {
        commit(st, u, t_next, a);
        log.iterations = it;
        return log;
      }
      if (it == opt_.max_iterations) break;
      Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
      lu.compute(a.K_ff);
      if (lu.info() != Eigen::Success) throw NonConvergence("global tangent is singular");
      const Eigen::VectorXd du = lu.solve(-r);
      for (int d = 0; d < mesh_.num_dofs(); ++d)
        if (free_index_[d] >= 0) u[d] += du[free_index_[d]];
    }
    throw NonConvergence("global Newton did not converge in " +
                         std::to_string(opt_.max_iterations) + " iterations at t=" +
                         std::to_string(t_next));
  }

  /// Linearized response of the free DOFs to the prescribed increment,
  /// using the tangent at the committed state.
  Eigen::VectorXd dirichlet_predictor(const GlobalState& st, double t_next) const {
    Eigen::VectorXd u = st.u;
    Eigen::VectorXd dup(static_cast<int>(mesh_.constraints.size()));
    for (int k = 0; k < dup.size(); ++k) {
      const DofConstraint& c = mesh_.constraints[k];
      dup[k] = c.value(t_next) - st.u[c.dof];
      u[c.dof] = c.value(t_next);
    }
    if (n_free_ == 0 || dup.norm() == 0.0) return u;
    const Assembly a = assemble(st, st.u, t_next - st.time, true);
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(a.K_ff);
    if (lu.info() != Eigen::Success) return u;
    const Eigen::VectorXd duf = lu.solve(-(a.K_fp * dup));
    for (int d = 0; d < mesh_.num_dofs(); ++d)
      if (free_index_[d] >= 0) u[d] += duf[free_index_[d]];
    return u;
  }

  /// Free-DOF index or -1 for prescribed DOFs.
  int free_index(int dof) const { return free_index_[dof]; }

  /// Plain-text dump: "v x y z" per node, "h n0 ... n7" per element (0-based).
  void write_mesh(std::ostream& os) const {
    os.precision(17);
    for (const auto& x : mesh_.nodes) os << "v " << x[0] << ' ' << x[1] << ' ' << x[2] << '\n';
    for (const auto& el : mesh_.elements) {
      os << 'h';
      for (int a : el) os << ' ' << a;
      os << '\n';
    }
  }

 private:
  static double last_dt_or(const GlobalState& st, double dt) {
    return st.last_dt > 0.0 ? st.last_dt : dt;
  }

  void commit(GlobalState& st, const Eigen::VectorXd& u, double t_next, Assembly& a) const {
    for (std::size_t i = 0; i < st.gp.size(); ++i) {
      GaussPointState& g = st.gp[i];
      const StepResult& r = a.results[i];
      // A step that crossed a switching point does not serve as a support
      // point for the next quadratic interpolation.
      g.E_prev = r.sp ? std::nullopt : std::optional<SymTensor2>(g.E_n);
      g.E_n = a.strains[i];
      g.state = r.new_state;
      g.S = r.stress.S;
    }
    st.u_prev = st.u;
    st.u = u;
    st.last_dt = t_next - st.time;
    st.time = t_next;
    ++st.steps;
  }

  Mesh mesh_;
  MaterialParams p_;
  ButcherTableau t_;
  FemOptions opt_;
  std::vector<int> prescribed_;
  std::vector<int> free_index_;
  int n_free_ = 0;
  std::vector<GaussGeometry> geom_;
};

}  // namespace radau_ep
