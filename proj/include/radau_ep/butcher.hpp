#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace radau_ep {

struct ButcherTableau {
  int s = 0;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  int nominal_order = 0;
};

inline ButcherTableau radau_iia(int s) {
  ButcherTableau t;
  t.s = s;
  t.nominal_order = 2 * s - 1;
  t.A.resize(s, s);
  t.b.resize(s);
  t.c.resize(s);
  switch (s) {
    case 1:
      t.A << 1.0;
      t.c << 1.0;
      break;
    case 2:
      t.A << 5.0 / 12.0, -1.0 / 12.0,
             3.0 / 4.0, 1.0 / 4.0;
      t.c << 1.0 / 3.0, 1.0;
      break;
    case 3: {
      const double r6 = std::sqrt(6.0);
      t.A << (88.0 - 7.0 * r6) / 360.0, (296.0 - 169.0 * r6) / 1800.0, (-2.0 + 3.0 * r6) / 225.0,
             (296.0 + 169.0 * r6) / 1800.0, (88.0 + 7.0 * r6) / 360.0, (-2.0 - 3.0 * r6) / 225.0,
             (16.0 - r6) / 36.0, (16.0 + r6) / 36.0, 1.0 / 9.0;
      t.c << (4.0 - r6) / 10.0, (4.0 + r6) / 10.0, 1.0;
      break;
    }
    default:
      throw InvalidArgument("radau_iia: stage count must be 1, 2 or 3, got " +
                            std::to_string(s));
  }
  t.b = t.A.row(s - 1).transpose();
  return t;
}

/// Residuals of the first four order conditions, in order:
/// sum b - 1, sum b c - 1/2, sum b c^2 - 1/3, sum b A c - 1/6.
inline std::vector<std::pair<std::string, double>> verify_order_conditions(
    const ButcherTableau& t) {
  const Eigen::VectorXd c2 = t.c.cwiseProduct(t.c);
  return {
      {"sum_b", t.b.sum() - 1.0},
      {"sum_bc", t.b.dot(t.c) - 0.5},
      {"sum_bc2", t.b.dot(c2) - 1.0 / 3.0},
      {"sum_bAc", t.b.dot(t.A * t.c) - 1.0 / 6.0},
  };
}

}  // namespace radau_ep
