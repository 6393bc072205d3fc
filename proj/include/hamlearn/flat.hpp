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

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <vector>

#include "hamlearn/poly.hpp"

namespace hamlearn {

// ---------------------------------------------------------------------------
// Flat approximation parameters.

struct FlatParams {
  double kappa = 1;  // approximation interval half-width
  double eta = 0.5;  // flatness slope, in (0, 1)
  double eps = 0.01; // approximation error, in (0, 1)
  int k = 0;
  int l = 0;

  long long q_degree() const { return p_degree(k, l) + 1; }
};

/// Smallest (k, l) with k >= 5/eta and l >= 100(kappa + ln(k/eps)).
inline FlatParams select_params(double beta, double eps, double eta,
                                double kappa) {
  (void)beta;  // enters through the caller's choice of kappa
  if (!(eta > 0 && eta < 1)) throw std::invalid_argument("select_params: eta must be in (0,1)");
  if (!(eps > 0 && eps < 1)) throw std::invalid_argument("select_params: eps must be in (0,1)");
  if (kappa < 1) throw std::invalid_argument("select_params: kappa must be >= 1");
  FlatParams fp;
  fp.kappa = kappa;
  fp.eta = eta;
  fp.eps = eps;
  fp.k = std::max(1, static_cast<int>(std::ceil(5.0 / eta - 1e-12)));
  fp.l = std::max(1, static_cast<int>(std::ceil(
                        100.0 * (kappa + std::log(fp.k / eps)) - 1e-9)));
  return fp;
}

// ---------------------------------------------------------------------------
// Flatness verification.

struct FlatGrid {
  int inside_points = 401;   // over [-kappa, kappa]
  double x_max = 60.0;       // outside range is [-x_max, x_max]
  int outside_points = 401;
};

struct FlatReport {
  double max_err_inside = 0;     // max |f(x) - e^x| on [-kappa, kappa]
  double max_ratio_outside = 0;  // max |f(x)| / (max(1,e^x) e^{eta|x|})
  bool pass = false;
};

/// Checks the two flatness conditions on a grid.  Points are visited in
/// ascending order so that cumulative-integral evaluators amortize.  The
/// growth ratio is formed in log space, so no naive overflow can occur.
template <typename Fn>
FlatReport verify_flat(Fn&& f, const FlatParams& params, const FlatGrid& grid) {
  if (grid.inside_points < 401)
    throw std::invalid_argument("verify_flat: need >= 401 inside points");
  if (grid.x_max + params.eta * grid.x_max > 690)
    throw std::invalid_argument("verify_flat: x_max too large for double range");
  std::vector<double> xs;
  for (int i = 0; i < grid.inside_points; ++i)
    xs.push_back(-params.kappa +
                 2 * params.kappa * i / (grid.inside_points - 1));
  for (int i = 0; i < grid.outside_points; ++i)
    xs.push_back(-grid.x_max + 2 * grid.x_max * i / (grid.outside_points - 1));
  std::sort(xs.begin(), xs.end());

  FlatReport report;
  for (double x : xs) {
    double v = f(x);
    if (!std::isfinite(v))
      throw std::runtime_error("verify_flat: evaluator returned non-finite value");
    if (std::abs(x) <= params.kappa * (1 + 1e-12))
      report.max_err_inside =
          std::max(report.max_err_inside, std::abs(v - std::exp(x)));
    double log_bound = std::max(0.0, x) + params.eta * std::abs(x);
    double ratio = std::exp(std::log(std::max(std::abs(v), 1e-300)) - log_bound);
    report.max_ratio_outside = std::max(report.max_ratio_outside, ratio);
  }
  report.pass = report.max_err_inside <= params.eps &&
                report.max_ratio_outside <= 1 + 1e-9;
  return report;
}

// ---------------------------------------------------------------------------
// Monotone identity.

struct Grid2D {
  double lo = -20, hi = 20, step = 0.25;
};

struct MonotoneReport {
  double min_value = 0;      // most negative M seen (0 if none negative)
  long long violations = 0;  // grid points with M < -tol * max(1, |M|)
  bool pass = false;
};

/// M(x,y) = 0.5 (x-y)(1 + 0.25 (x-y)^2)(q(x) - q(y)) - penalty (x-y)^2 p(x),
/// evaluated in coefficient mode over a 2-d grid.  The penalty coefficient
/// is exposed so the identity's sharpness can be probed.
inline MonotoneReport check_monotone_identity(int k, int l, const Grid2D& grid,
                                              double tol,
                                              double penalty = 0.00025) {
  UniPoly p = build_p_coefficients(k, l);
  UniPoly q = integrate_shifted(p);
  std::vector<double> xs;
  for (double x = grid.lo; x <= grid.hi + 1e-12; x += grid.step) xs.push_back(x);
  std::vector<double> qv(xs.size()), pv(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    qv[i] = eval_poly(q, xs[i]);
    pv[i] = eval_poly(p, xs[i]);
  }
  MonotoneReport report;
  report.min_value = 0;
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = 0; j < xs.size(); ++j) {
      double d = xs[i] - xs[j];
      double m = 0.5 * d * (1 + 0.25 * d * d) * (qv[i] - qv[j]) -
                 penalty * d * d * pv[i];
      report.min_value = std::min(report.min_value, m);
      if (m < -tol * std::max(1.0, std::abs(m))) ++report.violations;
    }
  report.pass = report.violations == 0;
  return report;
}

// ---------------------------------------------------------------------------
// Double-double arithmetic (~32 significant digits).  Needed because the
// roots of truncated exponentials near the negative real axis are resolved
// by plain doubles only to ~1e-2 relative: the evaluation noise floor is
// eps times the peak summand, which dwarfs the function value there.

namespace detail {

struct DD {
  double hi = 0, lo = 0;
  DD() = default;
  DD(double h) : hi(h), lo(0) {}
  DD(double h, double l) : hi(h), lo(l) {}
};

inline DD dd_two_sum(double a, double b) {
  double s = a + b;
  double bb = s - a;
  double err = (a - (s - bb)) + (b - bb);
  return DD(s, err);
}

inline DD dd_quick_sum(double a, double b) {  // requires |a| >= |b|
  double s = a + b;
  return DD(s, b - (s - a));
}

inline DD dd_add(const DD& a, const DD& b) {
  DD s = dd_two_sum(a.hi, b.hi);
  double lo = s.lo + a.lo + b.lo;
  return dd_quick_sum(s.hi, lo);
}

inline DD dd_neg(const DD& a) { return DD(-a.hi, -a.lo); }
inline DD dd_sub(const DD& a, const DD& b) { return dd_add(a, dd_neg(b)); }

inline DD dd_two_prod(double a, double b) {
  double p = a * b;
  double err = std::fma(a, b, -p);
  return DD(p, err);
}

inline DD dd_mul(const DD& a, const DD& b) {
  DD p = dd_two_prod(a.hi, b.hi);
  double lo = p.lo + a.hi * b.lo + a.lo * b.hi;
  return dd_quick_sum(p.hi, lo);
}

inline DD dd_div(const DD& a, const DD& b) {
  double q1 = a.hi / b.hi;
  DD r = dd_sub(a, dd_mul(DD(q1), b));
  double q2 = r.hi / b.hi;
  r = dd_sub(r, dd_mul(DD(q2), b));
  double q3 = r.hi / b.hi;
  return dd_add(dd_quick_sum(q1, q2), DD(q3));
}

struct CDD {
  DD re, im;
  CDD() = default;
  CDD(DD r, DD i) : re(r), im(i) {}
  CDD(double r, double i) : re(r), im(i) {}
};

inline CDD cdd_add(const CDD& a, const CDD& b) {
  return CDD(dd_add(a.re, b.re), dd_add(a.im, b.im));
}
inline CDD cdd_sub(const CDD& a, const CDD& b) {
  return CDD(dd_sub(a.re, b.re), dd_sub(a.im, b.im));
}
inline CDD cdd_mul(const CDD& a, const CDD& b) {
  return CDD(dd_sub(dd_mul(a.re, b.re), dd_mul(a.im, b.im)),
             dd_add(dd_mul(a.re, b.im), dd_mul(a.im, b.re)));
}
inline CDD cdd_div(const CDD& a, const CDD& b) {
  DD den = dd_add(dd_mul(b.re, b.re), dd_mul(b.im, b.im));
  DD re = dd_add(dd_mul(a.re, b.re), dd_mul(a.im, b.im));
  DD im = dd_sub(dd_mul(a.im, b.re), dd_mul(a.re, b.im));
  return CDD(dd_div(re, den), dd_div(im, den));
}
inline double cdd_abs(const CDD& a) { return std::hypot(a.re.hi, a.im.hi); }

/// p(z), p'(z) for factorial-scaled coefficients, in double-double.
inline void cdd_eval(const std::vector<double>& scaled, const CDD& z, CDD& p,
                     CDD& dp) {
  CDD t(1.0, 0.0);
  p = CDD(scaled[0], 0.0);
  dp = CDD(0.0, 0.0);
  for (std::size_t d = 1; d < scaled.size(); ++d) {
    CDD t_prev = t;
    t = cdd_mul(t, z);
    t = CDD(dd_div(t.re, DD(static_cast<double>(d))),
            dd_div(t.im, DD(static_cast<double>(d))));
    CDD a(scaled[d], 0.0);
    p = cdd_add(p, cdd_mul(a, t));
    dp = cdd_add(dp, cdd_mul(a, t_prev));
  }
}

inline void cplx_eval(const std::vector<double>& scaled,
                      const std::complex<double>& z, std::complex<double>& p,
                      std::complex<double>& dp) {
  std::complex<double> t = 1.0;
  p = scaled[0];
  dp = 0.0;
  for (std::size_t d = 1; d < scaled.size(); ++d) {
    std::complex<double> t_prev = t;
    t *= z / static_cast<double>(d);
    p += scaled[d] * t;
    dp += scaled[d] * t_prev;
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// SoS factorization of s_{2l} + c s_{2l-1}.

struct SosFactorization {
  int l = 0;
  double c = 0;
  // Quadratic factors ((x - r_j)^2 + s_j^2), j = 1..l; leading scale 1/(2l)!.
  std::vector<double> root_re;  // r_j
  std::vector<double> root_im;  // s_j > 0
  double max_root_magnitude = 0;
  double residual = 0;  // max relative reconstruction error on the check grid
};

namespace detail {

/// Simultaneous root iteration: two sweeps, plain double then double-double.
/// The double stage only needs to land in each root's basin; the dd stage
/// carries convergence to ~1e-28.
inline std::vector<std::complex<double>> aberth_roots(
    const std::vector<double>& scaled) {
  int deg = static_cast<int>(scaled.size()) - 1;
  std::vector<std::complex<double>> z(static_cast<std::size_t>(deg));
  double radius = 0.7 * deg;
  for (int i = 0; i < deg; ++i) {
    double angle = 2 * M_PI * (i + 0.5) / deg + 0.4;
    z[static_cast<std::size_t>(i)] =
        std::polar(radius * (1.0 + 0.1 * std::sin(3.0 * i)), angle);
  }
  for (int iter = 0; iter < 400; ++iter) {
    double worst = 0;
    for (int i = 0; i < deg; ++i) {
      std::complex<double> p, dp;
      cplx_eval(scaled, z[static_cast<std::size_t>(i)], p, dp);
      if (p == std::complex<double>(0.0)) continue;
      std::complex<double> w = p / dp;
      std::complex<double> s = 0;
      for (int j = 0; j < deg; ++j)
        if (j != i)
          s += 1.0 / (z[static_cast<std::size_t>(i)] -
                      z[static_cast<std::size_t>(j)]);
      std::complex<double> corr = w / (1.0 - w * s);
      z[static_cast<std::size_t>(i)] -= corr;
      worst = std::max(worst,
                       std::abs(corr) /
                           (1.0 + std::abs(z[static_cast<std::size_t>(i)])));
    }
    if (worst < 1e-12) break;
  }

  std::vector<CDD> zd(z.size());
  for (std::size_t i = 0; i < z.size(); ++i)
    zd[i] = CDD(z[i].real(), z[i].imag());
  // The dd corrections shrink quadratically until they hit the evaluation
  // noise floor, which grows with the degree (roots out to |z| ~ deg mean
  // cancellation across terms as large as e^{|z|}). Accept either outright
  // convergence or stagnation at a floor far below every downstream
  // tolerance (pairing 1e-9, reconstruction residual 1e-8).
  bool converged = false;
  double best = std::numeric_limits<double>::infinity();
  int stalled = 0;
  for (int iter = 0; iter < 120 && !converged; ++iter) {
    double worst = 0;
    for (int i = 0; i < deg; ++i) {
      CDD p, dp;
      cdd_eval(scaled, zd[static_cast<std::size_t>(i)], p, dp);
      CDD w = cdd_div(p, dp);
      CDD s(0.0, 0.0);
      for (int j = 0; j < deg; ++j)
        if (j != i)
          s = cdd_add(s, cdd_div(CDD(1.0, 0.0),
                                 cdd_sub(zd[static_cast<std::size_t>(i)],
                                         zd[static_cast<std::size_t>(j)])));
      CDD corr = cdd_div(w, cdd_sub(CDD(1.0, 0.0), cdd_mul(w, s)));
      zd[static_cast<std::size_t>(i)] =
          cdd_sub(zd[static_cast<std::size_t>(i)], corr);
      worst = std::max(
          worst, cdd_abs(corr) / (1.0 + cdd_abs(zd[static_cast<std::size_t>(i)])));
    }
    if (worst < 1e-27) {
      converged = true;
    } else {
      stalled = worst > 0.5 * best ? stalled + 1 : 0;
      best = std::min(best, worst);
      if (stalled >= 3 && best < 1e-14) converged = true;
    }
  }
  if (!converged)
    throw std::runtime_error("aberth_roots: root refinement did not converge");
  for (std::size_t i = 0; i < z.size(); ++i)
    z[i] = std::complex<double>(zd[i].re.hi, zd[i].im.hi);
  return z;
}

}  // namespace detail

inline SosFactorization sos_factorize_shifted_truncation(int l, double c,
                                                         int root_cap = 64) {
  if (l < 1) throw std::invalid_argument("sos_factorize: l must be >= 1");
  if (std::abs(c) > 0.01)
    throw std::invalid_argument("sos_factorize: |c| must be <= 0.01");
  if (2 * l > root_cap)
    throw std::invalid_argument("sos_factorize: degree exceeds root-finding cap");

  // s_{2l} + c s_{2l-1}: scaled coefficients 1+c below the top, 1 at the top.
  std::vector<double> scaled(static_cast<std::size_t>(2 * l) + 1, 1.0 + c);
  scaled.back() = 1.0;
  std::vector<std::complex<double>> roots = detail::aberth_roots(scaled);

  SosFactorization fac;
  fac.l = l;
  fac.c = c;
  std::vector<std::complex<double>> upper, lower;
  for (const auto& z : roots) {
    if (std::abs(z.imag()) < 1e-9 * (1.0 + std::abs(z)))
      throw std::runtime_error(
          "sos_factorize: real root found; contradicts positivity of the "
          "shifted truncation");
    fac.max_root_magnitude = std::max(fac.max_root_magnitude, std::abs(z));
    (z.imag() > 0 ? upper : lower).push_back(z);
  }
  if (upper.size() != lower.size() ||
      static_cast<int>(upper.size()) != l)
    throw std::runtime_error("sos_factorize: roots do not split into conjugate halves");
  auto by_re = [](const std::complex<double>& a, const std::complex<double>& b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  };
  std::sort(upper.begin(), upper.end(), by_re);
  std::sort(lower.begin(), lower.end(), by_re);
  for (int j = 0; j < l; ++j) {
    std::complex<double> u = upper[static_cast<std::size_t>(j)];
    std::complex<double> v = lower[static_cast<std::size_t>(j)];
    if (std::abs(u - std::conj(v)) > 1e-9 * (1.0 + std::abs(u)))
      throw std::runtime_error("sos_factorize: conjugate pairing failed");
    fac.root_re.push_back(u.real());
    fac.root_im.push_back(u.imag());
  }

  // Reconstruction check: (2l)!^{-1} prod_j ((x-r_j)^2 + s_j^2) against the
  // cancellation-free evaluation, in log space, on [-5l, 5l].
  double lfac = std::lgamma(2.0 * l + 1.0);
  for (int gi = 0; gi <= 400; ++gi) {
    double x = -5.0 * l + 10.0 * l * gi / 400.0;
    double log_recon = -lfac;
    for (int j = 0; j < l; ++j) {
      double dr = x - fac.root_re[static_cast<std::size_t>(j)];
      double si = fac.root_im[static_cast<std::size_t>(j)];
      log_recon += std::log(dr * dr + si * si);
    }
    double direct = taylor_eval_stable(2 * l, x) +
                    c * taylor_eval_stable(2 * l - 1, x);
    if (direct <= 0)
      throw std::runtime_error("sos_factorize: direct evaluation not positive");
    double rel = std::abs(std::exp(log_recon - std::log(direct)) - 1.0);
    fac.residual = std::max(fac.residual, rel);
  }
  return fac;
}

}  // namespace hamlearn
