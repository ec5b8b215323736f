#include <random>

#include <gtest/gtest.h>

#include "radau_ep/tensor.hpp"

using namespace radau_ep;

namespace {

SymTensor2 random_tensor(std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return {u(rng), u(rng), u(rng), u(rng), u(rng), u(rng)};
}

}  // namespace

TEST(Tensor, MatrixRoundTrip) {
  std::mt19937 rng(1);
  for (int k = 0; k < 100; ++k) {
    const SymTensor2 t = random_tensor(rng);
    EXPECT_EQ(SymTensor2::from_matrix(t.to_matrix()), t);
  }
}

TEST(Tensor, DeviatorOfIdentityIsZero) {
  EXPECT_EQ(norm(deviator(SymTensor2::identity())), 0.0);
}

TEST(Tensor, DeviatorFixesTracelessTensor) {
  const SymTensor2 t(1.0, -0.25, -0.75, 0.3, -0.2, 0.1);
  EXPECT_LT(norm(deviator(t) - t), 1e-15);
}

TEST(Tensor, BiaxialDeviatorAndNorm) {
  const SymTensor2 d = deviator(SymTensor2::diagonal(0.0005, 0.002, 0.0));
  EXPECT_NEAR(d[XX], -0.001 / 3.0, 1e-18);
  EXPECT_NEAR(d[YY], 0.0035 / 3.0, 1e-18);
  EXPECT_NEAR(d[ZZ], -0.0025 / 3.0, 1e-18);
  EXPECT_NEAR(norm(d), 1.47196e-3, 5e-9);
}

TEST(Tensor, NormCountsShearTwice) {
  EXPECT_EQ(norm(SymTensor2::zero()), 0.0);
  const SymTensor2 t(0, 0, 0, -0.7, 0, 0);
  EXPECT_NEAR(norm(t), std::sqrt(2.0) * 0.7, 1e-15);
}

TEST(Tensor, ContractionMatchesFullMatrix) {
  std::mt19937 rng(2);
  for (int k = 0; k < 1000; ++k) {
    const SymTensor2 a = random_tensor(rng), b = random_tensor(rng);
    const double full = (a.to_matrix().array() * b.to_matrix().array()).sum();
    EXPECT_NEAR(contract(a, b), full, 1e-13 * std::max(1.0, std::abs(full)));
  }
}

TEST(Tensor, DyadAndProjector) {
  std::mt19937 rng(3);
  const SymTensor4& P = deviatoric_projector();
  const SymTensor4 I = SymTensor4::identity();
  EXPECT_LT((P * P - P).mat().norm(), 1e-15);
  for (int k = 0; k < 50; ++k) {
    const SymTensor2 t = random_tensor(rng);
    const SymTensor2 a = random_tensor(rng), b = random_tensor(rng);
    EXPECT_LT(norm(apply(dyad(SymTensor2::identity(), SymTensor2::identity()), t) -
                   trace(t) * SymTensor2::identity()), 1e-14);
    EXPECT_LT(norm(apply(P, t) - deviator(t)), 1e-15);
    EXPECT_LT(std::abs(trace(apply(P, t))), 1e-15);
    EXPECT_LT(norm(apply(I - P, t) - (trace(t) / 3.0) * SymTensor2::identity()), 1e-15);
    EXPECT_LT(norm(apply(dyad(a, b), t) - contract(b, t) * a), 1e-14);
    EXPECT_EQ(apply(I, t), t);
  }
}

TEST(Tensor, DeviatorIdempotentAndNormProperties) {
  std::mt19937 rng(4);
  for (int k = 0; k < 200; ++k) {
    const SymTensor2 a = random_tensor(rng), b = random_tensor(rng);
    EXPECT_LT(norm(deviator(deviator(a)) - deviator(a)), 1e-14);
    EXPECT_LT(std::abs(trace(deviator(a))), 1e-14 * std::max(1.0, norm(a)));
    EXPECT_LE(norm(a + b), norm(a) + norm(b) + 1e-15);
    EXPECT_NEAR(norm(-3.5 * a), 3.5 * norm(a), 1e-14);
  }
}
