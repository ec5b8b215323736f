#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "butcher.hpp"
#include "errors.hpp"
#include "fem.hpp"
#include "material.hpp"
#include "stage_solver.hpp"
#include "strain_path.hpp"
#include "tensor.hpp"

namespace radau_ep {

/// Integrator variant: stage count plus interpolation and SP treatment.
struct Method {
  std::string label;
  int s = 2;
  Interpolation interpolation = Interpolation::Linear;
  SpDetection sp_detection = SpDetection::Off;

  StepConfig step_config() const {
    StepConfig c;
    c.interpolation = interpolation;
    c.sp_detection = sp_detection;
    // Without SP detection no stage is meant to sit before the kink, so the
    // stages stay all-plastic as in the unclamped formulation.
    c.solver.active_set = sp_detection != SpDetection::Off;
    return c;
  }
};

inline const std::vector<std::string>& method_labels() {
  static const std::vector<std::string> l = {"BE", "RIIa-l", "RIIa-l-SP",
                                             "RIIa-q", "RIIa-q-SP", "RIIa-q-exSP"};
  return l;
}

/// BE ignores s and always uses one stage with the end-point strain.
inline Method make_method(const std::string& label, int s) {
  if (s < 1 || s > 3) throw InvalidArgument("stage count must be 1, 2 or 3");
  Method m;
  m.label = label;
  m.s = s;
  if (label == "BE") {
    m.s = 1;
    m.interpolation = Interpolation::Constant;
  } else if (label == "RIIa-l") {
    m.interpolation = Interpolation::Linear;
  } else if (label == "RIIa-l-SP") {
    m.interpolation = Interpolation::Linear;
    m.sp_detection = SpDetection::Linear;
  } else if (label == "RIIa-q") {
    m.interpolation = Interpolation::Quadratic;
  } else if (label == "RIIa-q-SP") {
    m.interpolation = Interpolation::Quadratic;
    m.sp_detection = SpDetection::Quadratic;
  } else if (label == "RIIa-q-exSP") {
    m.interpolation = Interpolation::Quadratic;
    m.sp_detection = SpDetection::Extrapolation;
  } else {
    std::string valid;
    for (const auto& v : method_labels()) valid += (valid.empty() ? "" : ", ") + v;
    throw InvalidArgument("unknown method '" + label + "' (valid: " + valid + ")");
  }
  return m;
}

struct Scenario {
  std::string name;
  MaterialParams params;
  bool material_point = false;
  std::function<Mesh()> mesh;                    // FEM scenarios
  std::function<SymTensor2(double)> strain;      // material point: prescribed part
  Mat6 coupling = Mat6::Zero();                  // material point: E = Ebar + L Ep
  std::vector<double> eval_times;
  std::vector<double> dts;
  double ref_dt = 1e-4;
  std::string ref_method = "RIIa-q-exSP";
  int ref_stages = 2;
  std::string quantity = "S";

  double t_end() const { return *std::max_element(eval_times.begin(), eval_times.end()); }
};

// ---------------------------------------------------------------- meshes

/// Single hex element occupying [x0, x0+L] x [y0, y0+L] x [z0, z0+L].
inline Mesh unit_cube(double L, const Vec3& origin) {
  Mesh m;
  for (const Vec3& c : hex8_corners())
    m.nodes.push_back(origin + 0.5 * L * (c + Vec3::Ones()));
  m.elements.push_back({0, 1, 2, 3, 4, 5, 6, 7});
  return m;
}

/// Replaces or adds the constraint on a DOF.
inline void constrain(Mesh& m, int dof, std::function<double(double)> u) {
  for (auto& c : m.constraints)
    if (c.dof == dof) {
      c.u = std::move(u);
      return;
    }
  m.constraints.push_back({dof, std::move(u)});
}

inline std::function<double(double)> ramp(double rate) {
  return [rate](double t) { return rate * t; };
}

/// Centered cube with u_x = 0.0005 t on x = +L/2, u_y = -/+ 0.001 t on
/// y = -/+L/2, u_x = 0 on x = -L/2, u_z = 0 on z = -L/2; top face free.
inline Mesh biaxial_mesh() {
  const double L = 1.0;
  Mesh m = unit_cube(L, Vec3(-0.5, -0.5, -0.5));
  for (int a = 0; a < 8; ++a) {
    const Vec3& x = m.nodes[a];
    constrain(m, 3 * a + 0, x[0] > 0 ? ramp(0.0005 * L) : nullptr);
    constrain(m, 3 * a + 1, ramp(x[1] > 0 ? 0.001 * L : -0.001 * L));
    if (x[2] < 0) constrain(m, 3 * a + 2, nullptr);
  }
  return m;
}

/// Cube on [0, L]^3: z = 0 fixed, u_y = 0.001 L t on z = L, u_x = u_z = 0
/// everywhere. A free top face would let the single element bend, so every
/// DOF is prescribed and the state is exactly homogeneous.
inline Mesh simple_shear_mesh() {
  const double L = 1.0;
  Mesh m = unit_cube(L, Vec3::Zero());
  for (int a = 0; a < 8; ++a) {
    const Vec3& x = m.nodes[a];
    constrain(m, 3 * a + 0, nullptr);
    constrain(m, 3 * a + 1, x[2] < 0.5 * L ? nullptr : ramp(0.001 * L));
    constrain(m, 3 * a + 2, nullptr);
  }
  return m;
}

/// Quarter annulus in the first quadrant, nr radial x nt circumferential x 1
/// elements. Rollers on both symmetry planes, u_z = 0 on z = 0, inner rim
/// displaced radially by u_r(t) = rate * t.
inline Mesh annulus_mesh(int nr = 10, int nt = 10, double ri = 20.0, double ro = 40.0,
                         double h = 1.0, double rate = 1.0) {
  Mesh m;
  auto id = [&](int i, int j, int k) { return (k * (nt + 1) + j) * (nr + 1) + i; };
  for (int k = 0; k <= 1; ++k)
    for (int j = 0; j <= nt; ++j)
      for (int i = 0; i <= nr; ++i) {
        const double r = ri + (ro - ri) * i / nr;
        const double th = 0.5 * std::numbers::pi * j / nt;
        m.nodes.emplace_back(r * std::cos(th), r * std::sin(th), h * k);
      }
  for (int j = 0; j < nt; ++j)
    for (int i = 0; i < nr; ++i)
      m.elements.push_back({id(i, j, 0), id(i + 1, j, 0), id(i + 1, j + 1, 0), id(i, j + 1, 0),
                            id(i, j, 1), id(i + 1, j, 1), id(i + 1, j + 1, 1), id(i, j + 1, 1)});
  for (int k = 0; k <= 1; ++k)
    for (int j = 0; j <= nt; ++j)
      for (int i = 0; i <= nr; ++i) {
        const int n = id(i, j, k);
        if (j == 0) constrain(m, 3 * n + 1, nullptr);
        if (j == nt) constrain(m, 3 * n + 0, nullptr);
        if (k == 0) constrain(m, 3 * n + 2, nullptr);
        if (i == 0) {
          const double th = 0.5 * std::numbers::pi * j / nt;
          const double c = j == nt ? 0.0 : std::cos(th);
          const double s = j == 0 ? 0.0 : std::sin(th);
          constrain(m, 3 * n + 0, ramp(rate * c));
          constrain(m, 3 * n + 1, ramp(rate * s));
        }
      }
  return m;
}

// ------------------------------------------------------------- scenarios

inline std::vector<double> default_dts() {
  return {0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625};
}

inline Scenario simple_shear() {
  Scenario s;
  s.name = "simple_shear";
  s.params = MaterialParams(210000.0, 0.3, 460.0, 0.0, 10000.0, 0.0);
  s.mesh = simple_shear_mesh;
  s.eval_times = {20.0, 60.0, 100.0};
  s.dts = {4.0, 2.0, 1.0, 0.5, 0.25, 0.125};
  s.ref_dt = 1e-3;
  return s;
}

inline MaterialParams biaxial_params() { return {700000.0, 0.2, 875.0, 211.0, 1500.0, 300.0}; }

inline Scenario biaxial() {
  Scenario s;
  s.name = "biaxial";
  s.params = biaxial_params();
  s.mesh = biaxial_mesh;
  s.eval_times = {1.0, 2.0, 5.0, 10.0};
  s.dts = default_dts();
  s.ref_dt = 1e-4;
  return s;
}

inline Scenario case_I() {
  Scenario s = biaxial();
  s.name = "case_I";
  s.params.sigma_Y = 0.0;
  s.eval_times = {1.5, 3.0};
  return s;
}

/// Material point with E_xx = 0.0005 t, E_yy = 0.002 t and E_zz = Ep_zz
/// (zero normal stress in z for nu = 0).
inline Scenario case_II() {
  Scenario s;
  s.name = "case_II";
  s.params = biaxial_params();
  s.params.nu = 0.0;
  s.material_point = true;
  s.strain = [](double t) { return SymTensor2::diagonal(0.0005 * t, 0.002 * t, 0.0); };
  s.coupling(ZZ, ZZ) = 1.0;
  s.eval_times = {1.0, 2.0, 5.0, 10.0};
  s.dts = default_dts();
  s.ref_dt = 1e-4;
  s.ref_method = "RIIa-l-SP";
  s.ref_stages = 3;
  s.quantity = "Ep_zz";
  return s;
}

inline Scenario annulus(const std::string& variant) {
  Scenario s;
  s.name = "annulus_" + variant;
  double sy, sat, H, delta;
  if (variant == "A0") { sy = 0; sat = 0; H = 10000; delta = 0; }
  else if (variant == "B0") { sy = 0; sat = 200; H = 3000; delta = 5000; }
  else if (variant == "A") { sy = 300; sat = 0; H = 10000; delta = 0; }
  else if (variant == "B") { sy = 300; sat = 200; H = 3000; delta = 5000; }
  else throw InvalidArgument("unknown annulus variant '" + variant + "'");
  s.params = MaterialParams(68900.0, 0.33, sy, sat, H, delta);
  s.mesh = [] { return annulus_mesh(); };
  s.eval_times = {0.10, 0.25, 0.50};
  s.dts = {0.05, 0.025, 0.0125, 0.00625, 0.003125};
  s.ref_dt = 1e-4;
  return s;
}

inline std::vector<Scenario> builtin_scenarios() {
  return {simple_shear(), biaxial(), case_I(), case_II(),
          annulus("A0"), annulus("B0"), annulus("A"), annulus("B")};
}

inline Scenario find_scenario(const std::string& name) {
  std::string valid;
  for (auto& s : builtin_scenarios()) {
    if (s.name == name) return s;
    valid += (valid.empty() ? "" : ", ") + s.name;
  }
  throw InvalidArgument("unknown scenario '" + name + "' (valid: " + valid + ")");
}

// ------------------------------------------------------------------- runs

struct Sample {
  SymTensor2 E;
  SymTensor2 Ep;
  SymTensor2 S;
  double alpha = 0.0;
};

struct Trajectory {
  std::vector<double> times;                 // evaluation times
  std::vector<std::vector<Sample>> samples;  // per evaluation time, per point
  std::vector<SwitchingPoint> switching_points;  // material point only
  double wall_seconds = 0.0;                 // time-stepping loop only
  long steps = 0;
  long newton_iterations = 0;
  int max_newton_iterations = 0;
};

struct RunOptions {
  FemOptions fem;
  /// Runs per step size in a convergence study; wall time is their median.
  int timing_repeats = 1;
  /// Called after every committed FEM step.
  std::function<void(const FemSolver&, const GlobalState&, const NewtonLog&)> on_step;
};

/// Step index for each evaluation time; throws when a time is not a multiple of dt.
inline std::vector<long> eval_steps(const std::vector<double>& times, double dt) {
  std::vector<long> n;
  for (double t : times) {
    const long k = std::lround(t / dt);
    if (k <= 0 || std::abs(k * dt - t) > 1e-9 * std::max(1.0, t))
      throw InvalidArgument("evaluation time " + std::to_string(t) +
                            " is not a multiple of dt = " + std::to_string(dt));
    n.push_back(k);
  }
  return n;
}

namespace detail {

/// Smallest x in (0, 1] with |a + x b| = rho, if any.
inline std::optional<double> linear_path_crossing(const SymTensor2& a, const SymTensor2& b,
                                                  double rho) {
  const double bb = contract(b, b), ab = contract(a, b), aa = contract(a, a) - rho * rho;
  if (bb == 0.0) return std::nullopt;
  const double disc = ab * ab - bb * aa;
  if (disc < 0.0) return std::nullopt;
  const double sq = std::sqrt(disc);
  // Numerically stable pair of roots.
  const double q = -(ab + std::copysign(sq, ab));
  double r1 = q / bb, r2 = q != 0.0 ? aa / q : r1;
  if (r1 > r2) std::swap(r1, r2);
  for (double x : {r1, r2})
    if (x > 0.0 && x <= 1.0) return x;
  return std::nullopt;
}

}  // namespace detail

struct MaterialPointStep {
  PlasticState state;
  StressResult stress;
  SymTensor2 E;
  std::optional<SwitchingPoint> sp;
};

/// One step of the material-point driver: stage strains are sampled from
/// the prescribed path exactly and the switching point is computed in
/// closed form (the prescribed path is linear within a step).
inline MaterialPointStep material_point_step(const Scenario& sc, const ButcherTableau& t,
                                             const Method& m, const PlasticState& st,
                                             double tn, double dt) {
  const MaterialParams& p = sc.params;
  const Mat6& L = sc.coupling;
  auto total = [&](double tt, const SymTensor2& Ep) {
    return SymTensor2(Vec6(sc.strain(tt).vec() + L * Ep.vec()));
  };
  MaterialPointStep out;
  const double t1 = tn + dt;
  const SymTensor2 E1 = total(t1, st.Ep);
  const double f_tr = yield_trial(p, E1, st);
  if (!(f_tr > 0.0)) {
    out.state = st;
    out.E = E1;
    out.stress = stress(p, E1, st);
    return out;
  }
  double t_start = tn;
  const double f_n = yield_trial(p, total(tn, st.Ep), st);
  if (m.sp_detection != SpDetection::Off && f_n < -detail::sp_elastic_margin(p, st)) {
    const SymTensor2 a = deviator(total(tn, st.Ep)) - st.Ep;
    const SymTensor2 b = deviator(sc.strain(t1) - sc.strain(tn));
    const auto x = detail::linear_path_crossing(a, b, yield_radius(p, st.alpha) / (2.0 * p.mu()));
    if (x) {
      SwitchingPoint sp;
      sp.x = *x;
      sp.t_sp = tn + *x * dt;
      sp.E_sp = total(sp.t_sp, st.Ep);
      sp.variant = SpDetection::Linear;
      out.sp = sp;
      t_start = sp.t_sp;
    }
  }
  std::vector<SymTensor2> Ebar(t.s);
  for (int i = 0; i < t.s; ++i) {
    const double ti = m.interpolation == Interpolation::Constant
                          ? t1 : t_start + t.c[i] * (t1 - t_start);
    Ebar[i] = sc.strain(ti);
  }
  Ebar[t.s - 1] = sc.strain(t1);
  StageSolverOptions opt;
  opt.coupling = &L;
  opt.active_set = m.step_config().solver.active_set;
  const StageSolution sol = solve_stages(p, t, st, Ebar, opt);
  out.state.Ep = sol.Ep_stages[t.s - 1];
  out.state.alpha = sol.Lambda_stages[t.s - 1];
  out.E = total(t1, out.state.Ep);
  out.stress = stress(p, out.E, out.state);
  return out;
}

inline Trajectory run_material_point(const Scenario& sc, const Method& m, double dt) {
  if (!sc.material_point) throw InvalidArgument(sc.name + " is not a material-point scenario");
  const ButcherTableau t = radau_iia(m.s);
  const auto steps = eval_steps(sc.eval_times, dt);
  const long n_end = *std::max_element(steps.begin(), steps.end());
  Trajectory tr;
  tr.times = sc.eval_times;
  tr.samples.resize(steps.size());
  PlasticState st;
  const auto t0 = std::chrono::steady_clock::now();
  for (long n = 0; n < n_end; ++n) {
    const MaterialPointStep r = material_point_step(sc, t, m, st, n * dt, dt);
    st = r.state;
    if (r.sp) tr.switching_points.push_back(*r.sp);
    for (std::size_t k = 0; k < steps.size(); ++k)
      if (steps[k] == n + 1) tr.samples[k] = {Sample{r.E, st.Ep, r.stress.S, st.alpha}};
  }
  tr.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  tr.steps = n_end;
  return tr;
}

inline Trajectory run_fem(const Scenario& sc, const Method& m, double dt,
                          const RunOptions& ro = {}) {
  FemOptions fo = ro.fem;
  fo.step = m.step_config();
  FemSolver solver(sc.mesh(), sc.params, radau_iia(m.s), fo);
  const auto steps = eval_steps(sc.eval_times, dt);
  const long n_end = *std::max_element(steps.begin(), steps.end());
  Trajectory tr;
  tr.times = sc.eval_times;
  tr.samples.resize(steps.size());
  GlobalState gs = solver.initial_state();
  const auto t0 = std::chrono::steady_clock::now();
  for (long n = 0; n < n_end; ++n) {
    const NewtonLog log = solver.solve_time_step(gs, (n + 1) * dt);
    tr.newton_iterations += log.iterations;
    tr.max_newton_iterations = std::max(tr.max_newton_iterations, log.iterations);
    if (ro.on_step) ro.on_step(solver, gs, log);
    for (std::size_t k = 0; k < steps.size(); ++k) {
      if (steps[k] != n + 1) continue;
      auto& out = tr.samples[k];
      out.reserve(gs.gp.size());
      for (const auto& g : gs.gp) out.push_back({g.E_n, g.state.Ep, g.S, g.state.alpha});
    }
  }
  tr.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  tr.steps = n_end;
  return tr;
}

inline Trajectory run_scenario(const Scenario& sc, const Method& m, double dt,
                               const RunOptions& ro = {}) {
  return sc.material_point ? run_material_point(sc, m, dt) : run_fem(sc, m, dt, ro);
}

}  // namespace radau_ep
