#pragma once

#include <array>
#include <cmath>
#include <cstddef>

#include <Eigen/Dense>

namespace radau_ep {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat3 = Eigen::Matrix3d;

/// Component slots of the 6-entry symmetric storage.
enum Component : std::size_t { XX = 0, YY = 1, ZZ = 2, XY = 3, YZ = 4, ZX = 5 };

/// Weights applied to each stored component in double contractions.
/// Off-diagonal entries are stored once (true tensor components, no
/// engineering-shear doubling) and counted twice when contracting.
inline const Vec6& contraction_weights() {
  static const Vec6 w = (Vec6() << 1.0, 1.0, 1.0, 2.0, 2.0, 2.0).finished();
  return w;
}

/// Symmetric second-order tensor, components ordered (xx, yy, zz, xy, yz, zx).
class SymTensor2 {
 public:
  SymTensor2() : v_(Vec6::Zero()) {}
  explicit SymTensor2(const Vec6& v) : v_(v) {}
  SymTensor2(double xx, double yy, double zz, double xy, double yz, double zx) {
    v_ << xx, yy, zz, xy, yz, zx;
  }

  static SymTensor2 zero() { return {}; }
  static SymTensor2 identity() { return {1.0, 1.0, 1.0, 0.0, 0.0, 0.0}; }
  static SymTensor2 diagonal(double xx, double yy, double zz) {
    return {xx, yy, zz, 0.0, 0.0, 0.0};
  }

  static SymTensor2 from_matrix(const Mat3& m) {
    return {m(0, 0), m(1, 1), m(2, 2), 0.5 * (m(0, 1) + m(1, 0)),
            0.5 * (m(1, 2) + m(2, 1)), 0.5 * (m(2, 0) + m(0, 2))};
  }

  Mat3 to_matrix() const {
    Mat3 m;
    m << v_[XX], v_[XY], v_[ZX],
         v_[XY], v_[YY], v_[YZ],
         v_[ZX], v_[YZ], v_[ZZ];
    return m;
  }

  double operator[](std::size_t i) const { return v_[static_cast<Eigen::Index>(i)]; }
  double& operator[](std::size_t i) { return v_[static_cast<Eigen::Index>(i)]; }

  const Vec6& vec() const { return v_; }
  Vec6& vec() { return v_; }

  SymTensor2& operator+=(const SymTensor2& o) { v_ += o.v_; return *this; }
  SymTensor2& operator-=(const SymTensor2& o) { v_ -= o.v_; return *this; }
  SymTensor2& operator*=(double a) { v_ *= a; return *this; }

  friend SymTensor2 operator+(SymTensor2 a, const SymTensor2& b) { return a += b; }
  friend SymTensor2 operator-(SymTensor2 a, const SymTensor2& b) { return a -= b; }
  friend SymTensor2 operator-(const SymTensor2& a) { return SymTensor2(-a.v_); }
  friend SymTensor2 operator*(double s, SymTensor2 a) { return a *= s; }
  friend SymTensor2 operator*(SymTensor2 a, double s) { return a *= s; }
  friend SymTensor2 operator/(SymTensor2 a, double s) { return a *= 1.0 / s; }

  bool operator==(const SymTensor2& o) const { return v_ == o.v_; }

  bool all_finite() const { return v_.allFinite(); }

 private:
  Vec6 v_;
};

/// Fourth-order tensor acting on SymTensor2 as a 6x6 matrix on the stored
/// components: apply(C, T)_a = sum_b C_ab T_b. Composition is the matrix
/// product.
class SymTensor4 {
 public:
  SymTensor4() : m_(Mat6::Zero()) {}
  explicit SymTensor4(const Mat6& m) : m_(m) {}

  static SymTensor4 zero() { return {}; }
  /// Fourth-order identity on symmetric tensors.
  static SymTensor4 identity() { return SymTensor4(Mat6::Identity()); }

  const Mat6& mat() const { return m_; }
  Mat6& mat() { return m_; }

  double operator()(std::size_t a, std::size_t b) const {
    return m_(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
  }

  SymTensor4& operator+=(const SymTensor4& o) { m_ += o.m_; return *this; }
  SymTensor4& operator-=(const SymTensor4& o) { m_ -= o.m_; return *this; }
  SymTensor4& operator*=(double a) { m_ *= a; return *this; }

  friend SymTensor4 operator+(SymTensor4 a, const SymTensor4& b) { return a += b; }
  friend SymTensor4 operator-(SymTensor4 a, const SymTensor4& b) { return a -= b; }
  friend SymTensor4 operator*(double s, SymTensor4 a) { return a *= s; }
  friend SymTensor4 operator*(const SymTensor4& a, const SymTensor4& b) {
    return SymTensor4(a.m_ * b.m_);
  }

 private:
  Mat6 m_;
};

inline double trace(const SymTensor2& t) { return t[XX] + t[YY] + t[ZZ]; }

/// Full double contraction A:B.
inline double contract(const SymTensor2& a, const SymTensor2& b) {
  return a.vec().cwiseProduct(contraction_weights()).dot(b.vec());
}

inline double norm(const SymTensor2& t) { return std::sqrt(contract(t, t)); }

inline SymTensor2 deviator(const SymTensor2& t) {
  const double m = trace(t) / 3.0;
  SymTensor2 d = t;
  d[XX] -= m;
  d[YY] -= m;
  d[ZZ] -= m;
  return d;
}

/// A (x) B, so that apply(dyad(A, B), T) = A (B:T).
inline SymTensor4 dyad(const SymTensor2& a, const SymTensor2& b) {
  return SymTensor4(a.vec() * b.vec().cwiseProduct(contraction_weights()).transpose());
}

inline SymTensor2 apply(const SymTensor4& c, const SymTensor2& t) {
  return SymTensor2(c.mat() * t.vec());
}

/// Deviatoric projector Id - 1/3 (1 (x) 1).
inline const SymTensor4& deviatoric_projector() {
  static const SymTensor4 p = SymTensor4::identity() -
      (1.0 / 3.0) * dyad(SymTensor2::identity(), SymTensor2::identity());
  return p;
}

/// Row vector r with r . T_components = A:T.
inline Eigen::RowVector<double, 6> contraction_row(const SymTensor2& a) {
  return a.vec().cwiseProduct(contraction_weights()).transpose();
}

}  // namespace radau_ep
