#pragma once

#include <cmath>
#include <string>

#include "errors.hpp"
#include "tensor.hpp"

namespace radau_ep {

/// Von-Mises material with combined linear and exponential-saturation
/// isotropic hardening. Validated on construction.
struct MaterialParams {
  double E = 0.0;
  double nu = 0.0;
  double sigma_Y = 0.0;
  double sigma_inf_minus_Y = 0.0;
  double H = 0.0;
  double delta = 0.0;

  MaterialParams() = default;
  MaterialParams(double E_, double nu_, double sigma_Y_, double sat, double H_,
                 double delta_)
      : E(E_), nu(nu_), sigma_Y(sigma_Y_), sigma_inf_minus_Y(sat), H(H_),
        delta(delta_) {
    validate();
  }

  double mu() const { return E / (2.0 * (1.0 + nu)); }
  double kappa() const { return E / (3.0 * (1.0 - 2.0 * nu)); }

  void validate() const {
    auto fail = [](const std::string& m) { throw InvalidArgument("material: " + m); };
    if (!(E > 0.0)) fail("E must be positive");
    if (!(nu > -1.0 && nu < 0.5)) fail("nu must lie in (-1, 0.5)");
    if (!(sigma_Y >= 0.0)) fail("sigma_Y must be >= 0");
    if (!(sigma_inf_minus_Y >= 0.0)) fail("sigma_inf_minus_Y must be >= 0");
    if (!(H >= 0.0)) fail("H must be >= 0");
    if (!(delta >= 0.0)) fail("delta must be >= 0");
  }
};

struct PlasticState {
  SymTensor2 Ep;
  double alpha = 0.0;
};

struct StressResult {
  SymTensor2 S;
  SymTensor2 S_dev;
  double pressure = 0.0;
};

inline const double kSqrt23 = std::sqrt(2.0 / 3.0);

/// K'(alpha)
inline double hardening(const MaterialParams& p, double alpha) {
  return p.H * alpha + p.sigma_inf_minus_Y * (1.0 - std::exp(-p.delta * alpha));
}

/// K''(alpha)
inline double hardening_d1(const MaterialParams& p, double alpha) {
  return p.H + p.sigma_inf_minus_Y * p.delta * std::exp(-p.delta * alpha);
}

/// K'''(alpha)
inline double hardening_d2(const MaterialParams& p, double alpha) {
  return -p.sigma_inf_minus_Y * p.delta * p.delta * std::exp(-p.delta * alpha);
}

/// Current yield radius sqrt(2/3)(sigma_Y + K'(alpha)).
inline double yield_radius(const MaterialParams& p, double alpha) {
  return kSqrt23 * (p.sigma_Y + hardening(p, alpha));
}

inline StressResult stress(const MaterialParams& p, const SymTensor2& E,
                           const PlasticState& st) {
  StressResult r;
  r.pressure = p.kappa() * trace(E);
  r.S_dev = 2.0 * p.mu() * (deviator(E) - st.Ep);
  r.S = r.S_dev + r.pressure * SymTensor2::identity();
  return r;
}

inline double yield_trial(const MaterialParams& p, const SymTensor2& E,
                          const PlasticState& st) {
  return 2.0 * p.mu() * norm(deviator(E) - st.Ep) - yield_radius(p, st.alpha);
}

/// Elasticity tensor kappa 1(x)1 + 2 mu P.
inline SymTensor4 elasticity_tensor(const MaterialParams& p) {
  return p.kappa() * dyad(SymTensor2::identity(), SymTensor2::identity()) +
         2.0 * p.mu() * deviatoric_projector();
}

}  // namespace radau_ep
