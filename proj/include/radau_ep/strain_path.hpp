#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include <boost/math/tools/toms748_solve.hpp>

#include "errors.hpp"
#include "material.hpp"
#include "tensor.hpp"

namespace radau_ep {

enum class Interpolation { Constant, Linear, Quadratic };
enum class SpDetection { Off, Linear, Quadratic, Extrapolation };

inline int approximation_order(Interpolation m) {
  switch (m) {
    case Interpolation::Constant: return 1;
    case Interpolation::Linear: return 2;
    case Interpolation::Quadratic: return 3;
  }
  return 0;
}

inline std::string to_string(Interpolation m) {
  switch (m) {
    case Interpolation::Constant: return "constant";
    case Interpolation::Linear: return "linear";
    case Interpolation::Quadratic: return "quadratic";
  }
  return "?";
}

inline std::string to_string(SpDetection m) {
  switch (m) {
    case SpDetection::Off: return "off";
    case SpDetection::Linear: return "linear";
    case SpDetection::Quadratic: return "quadratic";
    case SpDetection::Extrapolation: return "extrapolation";
  }
  return "?";
}

inline Interpolation parse_interpolation(const std::string& s) {
  if (s == "constant") return Interpolation::Constant;
  if (s == "linear") return Interpolation::Linear;
  if (s == "quadratic") return Interpolation::Quadratic;
  throw InvalidArgument("unknown interpolation '" + s + "' (constant|linear|quadratic)");
}

inline SpDetection parse_sp_detection(const std::string& s) {
  if (s == "off") return SpDetection::Off;
  if (s == "linear") return SpDetection::Linear;
  if (s == "quadratic") return SpDetection::Quadratic;
  if (s == "extrapolation") return SpDetection::Extrapolation;
  throw InvalidArgument("unknown sp_detection '" + s +
                        "' (off|linear|quadratic|extrapolation)");
}

/// Strain samples of one uniform step; t_n only feeds SwitchingPoint::t_sp.
struct StrainHistory {
  std::optional<SymTensor2> E_prev;
  SymTensor2 E_n;
  SymTensor2 E_next;
  double dt = 1.0;
  double t_n = 0.0;
};

struct SwitchingPoint {
  double x = 0.0;
  double t_sp = 0.0;
  SymTensor2 E_sp;
  SpDetection variant = SpDetection::Linear;
};

// Strain paths over the normalized step coordinate tau in [0, 1].

inline SymTensor2 path_linear(const StrainHistory& h, double tau) {
  return (1.0 - tau) * h.E_n + tau * h.E_next;
}

inline SymTensor2 path_quadratic(const StrainHistory& h, double tau) {
  if (!h.E_prev) throw ModeUnavailable("quadratic interpolation needs E_prev");
  return (0.5 * tau * (tau - 1.0)) * *h.E_prev + (1.0 - tau * tau) * h.E_n +
         (0.5 * tau * (tau + 1.0)) * h.E_next;
}

inline SymTensor2 path_extrapolated(const StrainHistory& h, double tau) {
  if (!h.E_prev) throw ModeUnavailable("extrapolation needs E_prev");
  return h.E_n + tau * (h.E_n - *h.E_prev);
}

inline SymTensor2 path_linear_rate(const StrainHistory& h, double) {
  return h.E_next - h.E_n;
}

inline SymTensor2 path_quadratic_rate(const StrainHistory& h, double tau) {
  return (tau - 0.5) * *h.E_prev - 2.0 * tau * h.E_n + (tau + 0.5) * h.E_next;
}

/// Weight of E_next in the linear / quadratic path at tau.
inline double path_weight_next(SpDetection path, double tau) {
  return path == SpDetection::Quadratic ? 0.5 * tau * (tau + 1.0) : tau;
}

inline SymTensor2 stage_strain(const StrainHistory& h, Interpolation mode, double ci) {
  switch (mode) {
    case Interpolation::Constant: return h.E_next;
    case Interpolation::Linear: return path_linear(h, ci);
    case Interpolation::Quadratic: return path_quadratic(h, ci);
  }
  return h.E_next;
}

/// Root tolerance on the yield residual used for switching points.
inline constexpr double kSpRootTol = 1e-12;

namespace detail {

/// First root of g on (0, 1] given g(0) < 0. A coarse scan picks the first
/// bracket, then TOMS 748 refines it. Returns nullopt without a sign change.
inline std::optional<double> first_root(const std::function<double(double)>& g,
                                        int scan = 16) {
  double a = 0.0;
  double ga = g(0.0);
  if (!(ga < 0.0)) return std::nullopt;
  for (int k = 1; k <= scan; ++k) {
    const double b = static_cast<double>(k) / scan;
    const double gb = g(b);
    if (gb >= 0.0) {
      if (gb == 0.0) return b;
      std::uintmax_t iters = 100;
      auto r = boost::math::tools::toms748_solve(
          g, a, b, ga, gb, boost::math::tools::eps_tolerance<double>(), iters);
      const double x = std::abs(g(r.first)) <= std::abs(g(r.second)) ? r.first : r.second;
      return x;
    }
    a = b;
    ga = gb;
  }
  return std::nullopt;
}

template <class Path>
std::optional<SwitchingPoint> detect_on(const StrainHistory& h, const MaterialParams& p,
                                        const PlasticState& st, Path path,
                                        SpDetection variant) {
  const double two_mu = 2.0 * p.mu();
  const double r = yield_radius(p, st.alpha);
  auto g = [&](double x) { return two_mu * norm(deviator(path(h, x)) - st.Ep) - r; };
  auto x = first_root(g);
  if (!x) return std::nullopt;
  SwitchingPoint sp;
  sp.x = *x;
  sp.t_sp = h.t_n + *x * h.dt;
  sp.E_sp = path(h, *x);
  sp.variant = variant;
  return sp;
}

}  // namespace detail

inline std::optional<SwitchingPoint> detect_sp_linear(const StrainHistory& h,
                                                      const MaterialParams& p,
                                                      const PlasticState& st) {
  if (yield_trial(p, h.E_n, st) >= 0.0 || yield_trial(p, h.E_next, st) < 0.0)
    return std::nullopt;
  return detail::detect_on(h, p, st, path_linear, SpDetection::Linear);
}

inline std::optional<SwitchingPoint> detect_sp_quadratic(const StrainHistory& h,
                                                         const MaterialParams& p,
                                                         const PlasticState& st) {
  if (!h.E_prev) throw ModeUnavailable("quadratic SP detection needs E_prev");
  if (yield_trial(p, h.E_n, st) >= 0.0 || yield_trial(p, h.E_next, st) < 0.0)
    return std::nullopt;
  return detail::detect_on(h, p, st, path_quadratic, SpDetection::Quadratic);
}

/// Extrapolates the pre-step strain rate; nullopt when the extrapolated path
/// stays elastic on (0, 1].
inline std::optional<SwitchingPoint> detect_sp_extrapolation(const StrainHistory& h,
                                                             const MaterialParams& p,
                                                             const PlasticState& st) {
  if (!h.E_prev) throw ModeUnavailable("extrapolation SP detection needs E_prev");
  if (yield_trial(p, h.E_n, st) >= 0.0 || yield_trial(p, h.E_next, st) < 0.0)
    return std::nullopt;
  return detail::detect_on(h, p, st, path_extrapolated, SpDetection::Extrapolation);
}

/// Dispatches on the variant with the fallbacks used by the integrator:
/// quadratic and extrapolation fall back to linear detection when E_prev is
/// missing, extrapolation also when its path never reaches the yield surface.
inline std::optional<SwitchingPoint> detect_sp(SpDetection v, const StrainHistory& h,
                                               const MaterialParams& p,
                                               const PlasticState& st) {
  switch (v) {
    case SpDetection::Off:
      return std::nullopt;
    case SpDetection::Linear:
      return detect_sp_linear(h, p, st);
    case SpDetection::Quadratic:
      if (!h.E_prev) return detect_sp_linear(h, p, st);
      return detect_sp_quadratic(h, p, st);
    case SpDetection::Extrapolation: {
      if (!h.E_prev) return detect_sp_linear(h, p, st);
      auto sp = detect_sp_extrapolation(h, p, st);
      if (!sp) return detect_sp_linear(h, p, st);
      return sp;
    }
  }
  return std::nullopt;
}

/// Stage strain on the reduced interval after a switching point.
inline SymTensor2 post_sp_stage_strain(const StrainHistory& h, const SwitchingPoint& sp,
                                       Interpolation mode, double ci) {
  if (mode == Interpolation::Constant) return h.E_next;
  const double tau = sp.x + ci * (1.0 - sp.x);
  switch (sp.variant) {
    case SpDetection::Quadratic: return path_quadratic(h, tau);
    case SpDetection::Extrapolation: return sp.E_sp + ci * (h.E_next - sp.E_sp);
    default: return path_linear(h, tau);
  }
}

}  // namespace radau_ep
