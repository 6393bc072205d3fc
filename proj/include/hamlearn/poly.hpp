// Copyright 2026 The hamlearn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace hamlearn {

inline constexpr int kCoeffDegreeCap = 4096;

/// Real univariate polynomial in factorial-scaled form: the coefficient of
/// x^d is scaled[d] / d!.  For the iterated-truncation family all stored
/// numbers stay in [-1, 1].
struct UniPoly {
  std::vector<double> scaled;  // scaled[d] = d! * coeff_d

  UniPoly() : scaled{0.0} {}
  explicit UniPoly(std::vector<double> s) : scaled(std::move(s)) {
    if (scaled.empty()) scaled = {0.0};
    normalize();
  }

  int degree() const { return static_cast<int>(scaled.size()) - 1; }

  void normalize() {
    while (scaled.size() > 1 && scaled.back() == 0.0) scaled.pop_back();
  }

  static UniPoly constant(double c) { return UniPoly({c}); }

  /// Coefficient of x^d (unscaled).  Only sensible for small d.
  double coeff(int d) const {
    if (d < 0 || d > degree()) return 0.0;
    return scaled[static_cast<std::size_t>(d)] / std::tgamma(d + 1.0);
  }
};

/// Evaluate via incremental terms t_d = t_{d-1} x / d; never forms x^d or
/// d! explicitly, so no intermediate overflow for |x| <= 700.
inline double eval_poly(const UniPoly& p, double x) {
  double term = 1.0, acc = 0.0;
  for (std::size_t d = 0; d < p.scaled.size(); ++d) {
    if (d > 0) term *= x / static_cast<double>(d);
    acc += p.scaled[d] * term;
  }
  if (!std::isfinite(acc)) throw std::runtime_error("eval_poly: non-finite result");
  return acc;
}

/// s_l(x) = sum_{d<=l} x^d / d!  (all scaled coefficients are 1).
inline UniPoly taylor_truncation(int l) {
  if (l < 0) throw std::invalid_argument("taylor_truncation: negative degree");
  return UniPoly(std::vector<double>(static_cast<std::size_t>(l) + 1, 1.0));
}

// ---------------------------------------------------------------------------
// Gauss-Legendre quadrature (20-point panels, adaptive bisection).

namespace detail {

struct GaussLegendre20 {
  double node[20];
  double weight[20];
  GaussLegendre20() {
    // Newton iteration on P_20 from Chebyshev initial guesses.
    constexpr int n = 20;
    for (int i = 0; i < n; ++i) {
      double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = x;
        for (int j = 2; j <= n; ++j) {
          double p2 = ((2 * j - 1) * x * p1 - (j - 1) * p0) / j;
          p0 = p1;
          p1 = p2;
        }
        double dp = n * (x * p1 - p0) / (x * x - 1.0);
        double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-15) break;
      }
      node[i] = x;
      double p0 = 1.0, p1 = x;
      for (int j = 2; j <= n; ++j) {
        double p2 = ((2 * j - 1) * x * p1 - (j - 1) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      double dp = n * (x * p1 - p0) / (x * x - 1.0);
      weight[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
  }
};

inline const GaussLegendre20& gl20() {
  static GaussLegendre20 rule;
  return rule;
}

template <typename Fn>
double gl20_panel(Fn&& f, double a, double b) {
  const auto& rule = gl20();
  double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double acc = 0;
  for (int i = 0; i < 20; ++i) acc += rule.weight[i] * f(mid + half * rule.node[i]);
  return acc * half;
}

template <typename Fn>
double adaptive_gl_rec(Fn&& f, double a, double b, double rel_tol,
                       double noise_floor, int depth) {
  double whole = gl20_panel(f, a, b);
  double mid = 0.5 * (a + b);
  double split = gl20_panel(f, a, mid) + gl20_panel(f, mid, b);
  double scale = std::max({std::abs(whole), std::abs(split), 1e-300});
  if (std::abs(whole - split) <= rel_tol * scale) return split;
  // Panels contributing below the global noise floor are not refined
  // further; without this, underflowing tails subdivide forever.
  if (scale <= noise_floor) return split;
  if (depth > 48)
    throw std::runtime_error("adaptive quadrature failed to converge");
  return adaptive_gl_rec(f, a, mid, rel_tol, noise_floor, depth + 1) +
         adaptive_gl_rec(f, mid, b, rel_tol, noise_floor, depth + 1);
}

template <typename Fn>
double adaptive_gl(Fn&& f, double a, double b, double rel_tol) {
  if (a == b) return 0.0;
  // Coarse magnitude estimate to anchor an absolute noise floor.
  double peak = 0;
  for (int i = 0; i <= 256; ++i)
    peak = std::max(peak, std::abs(f(a + (b - a) * i / 256.0)));
  double noise_floor = rel_tol * 1e-3 * peak * std::abs(b - a);
  return adaptive_gl_rec(f, a, b, rel_tol, noise_floor, 0);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Pointwise-stable evaluation of Taylor truncations.

/// s_l(x) with relative accuracy close to machine precision on both tails.
///
/// For x >= 0 the power series has positive terms, so direct summation is
/// stable.  For x < 0 direct summation cancels catastrophically once the
/// peak term dwarfs the value, so we use the Taylor remainder in integral
/// form: s_l(x) = e^x + int_x^0 e^t (x-t)^l / l! dt, whose integrand is
/// one-signed.  Terms beyond d ~ |x| decay factorially, so the sum is
/// truncated early and the cost is independent of l.
inline double taylor_eval_stable(int l, double x) {
  if (l < 0) throw std::invalid_argument("taylor_eval_stable: negative degree");
  if (x >= 0) {
    double term = 1.0, acc = 1.0;
    for (int d = 1; d <= l; ++d) {
      term *= x / d;
      acc += term;
      if (d > x && term < 1e-18 * acc) break;
    }
    return acc;
  }
  // Remainder magnitude ~ |x|^{l+1}/(l+1)!; skip the quadrature when it is
  // negligible next to e^x.
  double log_remainder = (l + 1) * std::log(std::max(std::abs(x), 1e-300)) -
                         std::lgamma(l + 2.0);
  if (log_remainder < x - 45.0) return std::exp(x);
  double lfac = std::lgamma(l + 1.0);
  auto integrand = [&](double t) {
    // e^t (x - t)^l / l!; x - t <= 0 on [x, 0].
    double mag = t + l * std::log(std::max(t - x, 1e-300)) - lfac;
    double val = std::exp(mag);
    return (l % 2 == 0) ? val : -val;
  };
  double integral = detail::adaptive_gl(integrand, x, 0.0, 1e-14);
  return std::exp(x) + integral;
}

// ---------------------------------------------------------------------------
// The iterated-truncation family p_{k,l}, q_{k,l}.

/// Degree of p_{k,l} = prod_{j=1..k} s_{2^j l}(x/k): sum 2^j l = (2^{k+1}-2) l.
inline long long p_degree(int k, int l) {
  return ((2LL << k) - 2) * l;
}

/// Coefficient-mode product of factorial-scaled polynomials.  The scaled
/// convolution is a_r(d) = sum_i C(d,i) a_p(i) a_q(d-i); binomials are
/// taken through lgamma so degree is limited only by the configured cap.
inline UniPoly poly_multiply(const UniPoly& p, const UniPoly& q,
                             int degree_cap = kCoeffDegreeCap) {
  int dp = p.degree(), dq = q.degree();
  if (dp + dq > degree_cap)
    throw std::runtime_error("poly_multiply: degree cap exceeded");
  std::vector<double> out(static_cast<std::size_t>(dp + dq) + 1, 0.0);
  for (int d = 0; d <= dp + dq; ++d) {
    double acc = 0.0;
    double ld = std::lgamma(d + 1.0);
    int lo = std::max(0, d - dq), hi = std::min(dp, d);
    for (int i = lo; i <= hi; ++i) {
      double a = p.scaled[static_cast<std::size_t>(i)];
      double b = q.scaled[static_cast<std::size_t>(d - i)];
      if (a == 0.0 || b == 0.0) continue;
      double log_binom = ld - std::lgamma(i + 1.0) - std::lgamma(d - i + 1.0);
      acc += std::copysign(std::exp(log_binom + std::log(std::abs(a)) +
                                    std::log(std::abs(b))),
                           a * b);
    }
    if (!std::isfinite(acc)) throw std::runtime_error("poly_multiply: overflow");
    out[static_cast<std::size_t>(d)] = acc;
  }
  return UniPoly(std::move(out));
}

/// s_m(x / k) in scaled form: a_d = k^{-d}.
inline UniPoly taylor_truncation_scaled_arg(int m, int k) {
  std::vector<double> s(static_cast<std::size_t>(m) + 1);
  double v = 1.0;
  for (int d = 0; d <= m; ++d) {
    s[static_cast<std::size_t>(d)] = v;
    v /= k;
  }
  return UniPoly(std::move(s));
}

/// p_{k,l}(x) = prod_{j=1..k} s_{2^j l}(x/k), coefficient mode.
inline UniPoly build_p_coefficients(int k, int l,
                                    int degree_cap = kCoeffDegreeCap) {
  if (k < 1 || l < 1) throw std::invalid_argument("build_p: k, l must be >= 1");
  if (p_degree(k, l) > degree_cap)
    throw std::runtime_error("build_p: degree cap exceeded in coefficient mode");
  UniPoly acc = UniPoly::constant(1.0);
  for (int j = 1; j <= k; ++j)
    acc = poly_multiply(acc, taylor_truncation_scaled_arg((1 << j) * l, k),
                        degree_cap);
  return acc;
}

/// q_{k,l} = 1 + int_0^x p_{k,l}; integration shifts scaled indices by one.
inline UniPoly integrate_shifted(const UniPoly& p) {
  std::vector<double> q(p.scaled.size() + 1, 0.0);
  q[0] = 1.0;
  for (std::size_t d = 0; d < p.scaled.size(); ++d) q[d + 1] = p.scaled[d];
  return UniPoly(std::move(q));
}

inline UniPoly build_q_coefficients(int k, int l,
                                    int degree_cap = kCoeffDegreeCap) {
  return integrate_shifted(build_p_coefficients(k, l, degree_cap));
}

/// Pointwise evaluator for p_{k,l}; works at any degree.
class PointwiseP {
 public:
  PointwiseP(int k, int l) : k_(k), l_(l) {
    if (k < 1 || l < 1) throw std::invalid_argument("PointwiseP: k, l must be >= 1");
  }

  double operator()(double x) const {
    double acc = 1.0;
    for (int j = 1; j <= k_; ++j) acc *= taylor_eval_stable((1 << j) * l_, x / k_);
    if (!std::isfinite(acc)) throw std::runtime_error("PointwiseP: non-finite");
    return acc;
  }

  /// log p(x); each factor is an even truncation, hence positive.
  double log_value(double x) const {
    double acc = 0.0;
    for (int j = 1; j <= k_; ++j)
      acc += std::log(taylor_eval_stable((1 << j) * l_, x / k_));
    return acc;
  }

  int k() const { return k_; }
  int l() const { return l_; }

 private:
  int k_, l_;
};

/// Pointwise q_{k,l}(x) = 1 + int_0^x p by adaptive quadrature.  Caches the
/// integral at previously requested points so that sweeps over sorted grids
/// integrate each gap once.
class PointwiseQ {
 public:
  PointwiseQ(int k, int l, double rel_tol = 1e-12)
      : p_(k, l), rel_tol_(rel_tol) {}

  double operator()(double x) const {
    double integral;
    if (cached_) {
      integral = cached_integral_ +
                 detail::adaptive_gl(p_, cached_x_, x, rel_tol_);
    } else {
      integral = detail::adaptive_gl(p_, 0.0, x, rel_tol_);
    }
    cached_ = true;
    cached_x_ = x;
    cached_integral_ = integral;
    double v = 1.0 + integral;
    if (!std::isfinite(v)) throw std::runtime_error("PointwiseQ: non-finite");
    return v;
  }

  void reset_cache() const { cached_ = false; }

  const PointwiseP& p() const { return p_; }

 private:
  PointwiseP p_;
  double rel_tol_;
  mutable bool cached_ = false;
  mutable double cached_x_ = 0.0;
  mutable double cached_integral_ = 0.0;
};

}  // namespace hamlearn
