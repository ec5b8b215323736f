#include <gtest/gtest.h>

#include "radau_ep/butcher.hpp"

using namespace radau_ep;

TEST(Butcher, BackwardEuler) {
  const auto t = radau_iia(1);
  EXPECT_EQ(t.A(0, 0), 1.0);
  EXPECT_EQ(t.b[0], 1.0);
  EXPECT_EQ(t.c[0], 1.0);
  EXPECT_EQ(t.nominal_order, 1);
  const auto r = verify_order_conditions(t);
  EXPECT_EQ(r[0].second, 0.0);
  EXPECT_NEAR(r[1].second, 0.5, 0.0);
  EXPECT_NEAR(r[2].second, 1.0 - 1.0 / 3.0, 1e-15);
}

TEST(Butcher, TwoStage) {
  const auto t = radau_iia(2);
  EXPECT_DOUBLE_EQ(t.A(0, 0), 5.0 / 12.0);
  EXPECT_DOUBLE_EQ(t.A(0, 1), -1.0 / 12.0);
  EXPECT_DOUBLE_EQ(t.A(1, 0), 0.75);
  EXPECT_DOUBLE_EQ(t.A(1, 1), 0.25);
  for (const auto& [name, res] : verify_order_conditions(t)) EXPECT_LT(std::abs(res), 1e-14) << name;
}

TEST(Butcher, ThreeStage) {
  const auto t = radau_iia(3);
  EXPECT_NEAR(t.c[0], 0.1550510257, 1e-10);
  EXPECT_EQ(t.nominal_order, 5);
  for (const auto& [name, res] : verify_order_conditions(t)) EXPECT_LT(std::abs(res), 1e-14) << name;
}

TEST(Butcher, StructuralProperties) {
  for (int s = 1; s <= 3; ++s) {
    const auto t = radau_iia(s);
    EXPECT_EQ(t.c[s - 1], 1.0);
    for (int j = 0; j < s; ++j) EXPECT_EQ(t.A(s - 1, j), t.b[j]);
    for (int i = 0; i < s; ++i) EXPECT_NEAR(t.A.row(i).sum(), t.c[i], 1e-15);
  }
}

TEST(Butcher, RejectsUnsupportedStageCount) {
  EXPECT_THROW(radau_iia(0), InvalidArgument);
  EXPECT_THROW(radau_iia(4), InvalidArgument);
}
