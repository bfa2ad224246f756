#ifndef SOLITON_DUAL_HPP
#define SOLITON_DUAL_HPP

#include <Eigen/Dense>
#include <cmath>

namespace soliton {

// Forward-mode scalar with N partials. The translator kernel evaluates its
// closed-form metric expressions on Dual<N> to get exact state gradients.
template <int N>
struct Dual {
  double v = 0.0;
  Eigen::Matrix<double, N, 1> d = Eigen::Matrix<double, N, 1>::Zero();

  Dual() = default;
  Dual(double value) : v(value) {}
  static Dual seed(double value, int slot) {
    Dual r(value);
    r.d[slot] = 1.0;
    return r;
  }

  Dual operator-() const {
    Dual r;
    r.v = -v;
    r.d = -d;
    return r;
  }
  Dual& operator+=(const Dual& o) {
    v += o.v;
    d += o.d;
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    d -= o.d;
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    d = v * o.d + o.v * d;
    v *= o.v;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    d = (d * o.v - v * o.d) / (o.v * o.v);
    v /= o.v;
    return *this;
  }
};

template <int N>
Dual<N> operator+(Dual<N> a, const Dual<N>& b) {
  return a += b;
}
template <int N>
Dual<N> operator-(Dual<N> a, const Dual<N>& b) {
  return a -= b;
}
template <int N>
Dual<N> operator*(Dual<N> a, const Dual<N>& b) {
  return a *= b;
}
template <int N>
Dual<N> operator/(Dual<N> a, const Dual<N>& b) {
  return a /= b;
}
template <int N>
Dual<N> operator+(double a, Dual<N> b) {
  b.v += a;
  return b;
}
template <int N>
Dual<N> operator+(Dual<N> a, double b) {
  a.v += b;
  return a;
}
template <int N>
Dual<N> operator-(double a, const Dual<N>& b) {
  return Dual<N>(a) - b;
}
template <int N>
Dual<N> operator-(Dual<N> a, double b) {
  a.v -= b;
  return a;
}
template <int N>
Dual<N> operator*(double a, Dual<N> b) {
  b.v *= a;
  b.d *= a;
  return b;
}
template <int N>
Dual<N> operator*(Dual<N> a, double b) {
  return b * a;
}
template <int N>
Dual<N> operator/(Dual<N> a, double b) {
  a.v /= b;
  a.d /= b;
  return a;
}
template <int N>
Dual<N> operator/(double a, const Dual<N>& b) {
  return Dual<N>(a) / b;
}

template <int N>
Dual<N> sqrt(const Dual<N>& a) {
  Dual<N> r;
  r.v = std::sqrt(a.v);
  r.d = a.d / (2.0 * r.v);
  return r;
}

// scalar passthroughs so the kernels can be written generically
inline double sqrt_generic(double a) { return std::sqrt(a); }
template <int N>
Dual<N> sqrt_generic(const Dual<N>& a) {
  return sqrt(a);
}

}  // namespace soliton

#endif
