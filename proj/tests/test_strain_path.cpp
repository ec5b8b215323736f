#include <random>

#include <gtest/gtest.h>

#include "radau_ep/strain_path.hpp"

using namespace radau_ep;

namespace {

SymTensor2 rnd(std::mt19937& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return {u(rng), u(rng), u(rng), u(rng), u(rng), u(rng)};
}

MaterialParams biaxial_nu0() { return {700000.0, 0.0, 875.0, 211.0, 1500.0, 300.0}; }

StrainHistory reduced_strain_history(double t_n, double dt) {
  auto E = [](double t) { return SymTensor2::diagonal(0.0005 * t, 0.002 * t, 0.0); };
  StrainHistory h;
  h.E_prev = E(t_n - dt);
  h.E_n = E(t_n);
  h.E_next = E(t_n + dt);
  h.dt = dt;
  h.t_n = t_n;
  return h;
}

}  // namespace

TEST(StrainPath, EndpointForEveryMode) {
  std::mt19937 rng(7);
  StrainHistory h{rnd(rng, 1), rnd(rng, 1), rnd(rng, 1), 0.1, 0.0};
  for (auto m : {Interpolation::Constant, Interpolation::Linear, Interpolation::Quadratic})
    EXPECT_EQ(stage_strain(h, m, 1.0), h.E_next);
}

TEST(StrainPath, LinearThird) {
  const SymTensor2 T(3, 6, 9, 1.5, -3, 0.3);
  StrainHistory h{std::nullopt, SymTensor2::zero(), T, 1.0, 0.0};
  EXPECT_LT(norm(stage_strain(h, Interpolation::Linear, 1.0 / 3.0) - T / 3.0), 1e-15);
  EXPECT_THROW(stage_strain(h, Interpolation::Quadratic, 0.5), ModeUnavailable);
}

TEST(StrainPath, QuadraticEqualsLinearOnCollinearSamples) {
  std::mt19937 rng(8);
  for (int k = 0; k < 100; ++k) {
    const SymTensor2 En = rnd(rng, 1), D = rnd(rng, 1);
    StrainHistory h{En - D, En, En + D, 0.1, 0.0};
    for (double c : {0.1, 1.0 / 3.0, 0.5, 0.9}) {
      EXPECT_LT(norm(stage_strain(h, Interpolation::Quadratic, c) -
                     stage_strain(h, Interpolation::Linear, c)), 1e-13);
    }
  }
}

TEST(StrainPath, QuadraticExactOnDegreeTwoPaths) {
  std::mt19937 rng(9);
  const SymTensor2 a = rnd(rng, 1), b = rnd(rng, 1), c2 = rnd(rng, 1);
  auto E = [&](double t) { return a + t * b + (t * t) * c2; };
  const double tn = 0.7, dt = 0.05;
  StrainHistory h{E(tn - dt), E(tn), E(tn + dt), dt, tn};
  for (double c : {0.155, 0.4, 0.64, 1.0})
    EXPECT_LT(norm(stage_strain(h, Interpolation::Quadratic, c) - E(tn + c * dt)), 1e-13);
}

TEST(StrainPath, LinearErrorIsSecondOrder) {
  auto E = [](double t) { return SymTensor2(t * t, 0.5 * t, -t * t, 0.2 * t * t, 0, t); };
  auto err = [&](double dt) {
    StrainHistory h{std::nullopt, E(1.0), E(1.0 + dt), dt, 1.0};
    return norm(stage_strain(h, Interpolation::Linear, 1.0 / 3.0) - E(1.0 + dt / 3.0));
  };
  const double ratio = err(0.1) / err(0.05);
  EXPECT_NEAR(ratio, 4.0, 0.4);
}

TEST(SwitchingPoint, NoneWhileElastic) {
  const MaterialParams p = biaxial_nu0();
  EXPECT_FALSE(detect_sp_linear(reduced_strain_history(0.2, 0.1), p, {}));
}

TEST(SwitchingPoint, LinearRecoversAnalyticTime) {
  const MaterialParams p = biaxial_nu0();
  const double exact = std::sqrt(2.0 / 3.0) * 875.0 /
                       (2.0 * p.mu() * norm(deviator(SymTensor2::diagonal(0.0005, 0.002, 0))));
  EXPECT_NEAR(exact, 0.693375, 5e-7);
  auto sp = detect_sp_linear(reduced_strain_history(0.65, 0.1), p, {});
  ASSERT_TRUE(sp);
  EXPECT_NEAR(sp->t_sp, exact, 1e-9);
  EXPECT_NEAR(yield_trial(p, sp->E_sp, {}), 0.0, kSpRootTol);
}

TEST(SwitchingPoint, ProportionalLoadingClosedForm) {
  const MaterialParams p(210000.0, 0.3, 460.0, 0.0, 10000.0, 0.0);
  const SymTensor2 D(0.001, -0.0004, 0.0002, 0.0007, 0.0, -0.0003);
  const double t_sp = std::sqrt(2.0 / 3.0) * 460.0 / (2.0 * p.mu() * norm(deviator(D)));
  const double dt = 1.0;
  const double tn = std::floor(t_sp);
  StrainHistory h{std::nullopt, tn * D, (tn + dt) * D, dt, tn};
  auto sp = detect_sp_linear(h, p, {});
  ASSERT_TRUE(sp);
  EXPECT_NEAR(sp->x, (t_sp - tn) / dt, 1e-12);
}

TEST(SwitchingPoint, VariantsAgreeOnLinearPath) {
  const MaterialParams p = biaxial_nu0();
  const auto h = reduced_strain_history(0.65, 0.1);
  auto l = detect_sp_linear(h, p, {});
  auto q = detect_sp_quadratic(h, p, {});
  auto e = detect_sp_extrapolation(h, p, {});
  ASSERT_TRUE(l && q && e);
  EXPECT_NEAR(q->x, l->x, 1e-12);
  EXPECT_NEAR(e->x, l->x, 1e-12);
}

TEST(SwitchingPoint, QuadraticRootOnCurvedPath) {
  const MaterialParams p = biaxial_nu0();
  auto E = [](double t) { return SymTensor2::diagonal(0.0005 * t, 0.002 * t * t, 0.0); };
  StrainHistory h{E(0.7), E(0.8), E(0.9), 0.1, 0.8};
  auto q = detect_sp_quadratic(h, p, {});
  ASSERT_TRUE(q);
  EXPECT_NEAR(yield_trial(p, q->E_sp, {}), 0.0, kSpRootTol);
  // Quadratic interpolation is exact here, so the root is the exact crossing.
  EXPECT_LT(norm(q->E_sp - E(q->t_sp)), 1e-15);
  auto l = detect_sp_linear(h, p, {});
  ASSERT_TRUE(l);
  EXPECT_GT(std::abs(l->t_sp - q->t_sp), 1e-6);
}

TEST(SwitchingPoint, ExtrapolationFallsBack) {
  const MaterialParams p = biaxial_nu0();
  // Flat strain before t_n: extrapolation never yields, dispatcher uses linear.
  StrainHistory h{SymTensor2::diagonal(0.00025, 0.001, 0), SymTensor2::diagonal(0.00025, 0.001, 0),
                  SymTensor2::diagonal(0.00025, 0.002, 0), 0.1, 1.0};
  EXPECT_FALSE(detect_sp_extrapolation(h, p, {}));
  auto sp = detect_sp(SpDetection::Extrapolation, h, p, {});
  ASSERT_TRUE(sp);
  EXPECT_EQ(sp->variant, SpDetection::Linear);
  h.E_prev.reset();
  EXPECT_THROW(detect_sp_quadratic(h, p, {}), ModeUnavailable);
  EXPECT_EQ(detect_sp(SpDetection::Quadratic, h, p, {})->variant, SpDetection::Linear);
}

TEST(SwitchingPoint, ZeroYieldStressHasNoInteriorPoint) {
  const MaterialParams p(700000.0, 0.2, 0.0, 211.0, 1500.0, 300.0);
  StrainHistory h{std::nullopt, SymTensor2::zero(), SymTensor2::diagonal(1e-4, 2e-4, 0), 0.1, 0.0};
  EXPECT_FALSE(detect_sp_linear(h, p, {}));
}

TEST(SwitchingPoint, PostSpStageStrains) {
  const MaterialParams p = biaxial_nu0();
  const auto h = reduced_strain_history(0.65, 0.1);
  auto sp = detect_sp_extrapolation(h, p, {});
  ASSERT_TRUE(sp);
  EXPECT_EQ(post_sp_stage_strain(h, *sp, Interpolation::Quadratic, 1.0), h.E_next);
  const SymTensor2 mid = post_sp_stage_strain(h, *sp, Interpolation::Quadratic, 0.5);
  EXPECT_LT(norm(mid - 0.5 * (sp->E_sp + h.E_next)), 1e-16);
}
