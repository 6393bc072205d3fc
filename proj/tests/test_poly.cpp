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

#include "hamlearn/flat.hpp"
#include "hamlearn/poly.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace hamlearn {
namespace {

TEST(TaylorTruncation, BasicValues) {
  EXPECT_EQ(taylor_truncation(0).degree(), 0);
  EXPECT_DOUBLE_EQ(eval_poly(taylor_truncation(0), 3.7), 1.0);
  // Hand summation: 1 + 1 + 1/2.
  EXPECT_DOUBLE_EQ(eval_poly(taylor_truncation(2), 1.0), 2.5);
  EXPECT_THROW(taylor_truncation(-1), std::invalid_argument);
}

TEST(EvalPoly, LargeDegreeMatchesExp) {
  UniPoly s500 = taylor_truncation(500);
  double v = eval_poly(s500, 10.0);
  EXPECT_NEAR(v / std::exp(10.0), 1.0, 1e-12);
}

// Exact rational oracle for s_20(-20): common denominator 20! fits in
// int64; the numerator fits in __int128.
TEST(EvalPoly, NegativeArgumentMatchesExactRational) {
  __int128 numerator = 0;
  long long fact20 = 1;
  for (int d = 1; d <= 20; ++d) fact20 *= d;
  for (int d = 0; d <= 20; ++d) {
    // (-20)^d * 20!/d!
    __int128 term = 1;
    for (int i = 0; i < d; ++i) term *= -20;
    long long tail = 1;  // 20!/d! = (d+1) * ... * 20
    for (int i = d + 1; i <= 20; ++i) tail *= i;
    numerator += term * tail;
  }
  double oracle = static_cast<double>(static_cast<long double>(numerator) /
                                      static_cast<long double>(fact20));
  double v = eval_poly(taylor_truncation(20), -20.0);
  EXPECT_NEAR(v / oracle, 1.0, 1e-10);
}

TEST(EvalPoly, NoOverflowAtLargeArgument) {
  // |x| = 700 at degree 10^4 must stay finite (value ~ e^700 < DBL_MAX).
  UniPoly s = taylor_truncation(10000);
  EXPECT_TRUE(std::isfinite(eval_poly(s, 700.0)));
  EXPECT_TRUE(std::isfinite(eval_poly(s, -700.0)));
}

TEST(TaylorEvalStable, AgreesWithDirectWhereSafe) {
  for (int l : {5, 12, 30, 61}) {
    UniPoly s = taylor_truncation(l);
    for (double x = -4.0; x <= 15.0; x += 0.73) {
      double direct = eval_poly(s, x);
      double stable = taylor_eval_stable(l, x);
      EXPECT_NEAR(stable, direct, 1e-11 * std::max(1.0, std::abs(direct)))
          << "l=" << l << " x=" << x;
    }
  }
}

TEST(TaylorEvalStable, DeepNegativeTailMatchesExp) {
  // For l >> |x| the truncation equals e^x to factorial accuracy; the
  // stable evaluator must reproduce it without cancellation noise.
  for (double x : {-10.0, -20.0, -35.0}) {
    double v = taylor_eval_stable(200, x);
    EXPECT_NEAR(v / std::exp(x), 1.0, 1e-11) << "x=" << x;
  }
}

TEST(EvenTruncationsNonnegative, WideGrid) {
  for (int l : {1, 4, 16, 64}) {
    for (double x = -200.0; x <= 200.0; x += 2.5)
      EXPECT_GE(taylor_eval_stable(2 * l, x), 0.0) << "l=" << l << " x=" << x;
  }
}

TEST(EvenOddSandwich, NegativeArguments) {
  for (int l : {2, 8, 20}) {
    for (double x = -30.0; x < 0.0; x += 1.7) {
      double lo = taylor_eval_stable(2 * l - 1, x);
      double hi = taylor_eval_stable(2 * l, x);
      double e = std::exp(x);
      EXPECT_LE(lo, e * (1 + 1e-12) + 1e-300);
      EXPECT_GE(hi, e * (1 - 1e-12));
    }
  }
  for (int l : {3, 9}) {
    for (double x = 0.0; x <= 30.0; x += 1.9)
      EXPECT_LE(taylor_eval_stable(l, x), std::exp(x) * (1 + 1e-12));
  }
}

TEST(TruncationError, LemmaRate) {
  // l >= 10 b + log(1/eps) forces max_{|x|<=b} |s_l(x) - e^x| <= eps.
  for (double b : {1.0, 3.0, 5.0}) {
    for (double eps : {1e-2, 1e-4}) {
      int l = static_cast<int>(std::ceil(10 * b + std::log(1.0 / eps)));
      double worst = 0;
      for (double x = -b; x <= b; x += b / 50)
        worst = std::max(worst, std::abs(taylor_eval_stable(l, x) - std::exp(x)));
      EXPECT_LE(worst, eps) << "b=" << b << " eps=" << eps;
    }
  }
}

TEST(CompareToDerivative, OddBoundedByEven) {
  // |s_{2l-1}(x)| < 99 s_{2l}(x) across [-20l, 20l].
  for (int l : {1, 2, 5, 11, 32}) {
    for (int gi = 0; gi <= 200; ++gi) {
      double x = -20.0 * l + 40.0 * l * gi / 200.0;
      double odd = taylor_eval_stable(2 * l - 1, x);
      double even = taylor_eval_stable(2 * l, x);
      EXPECT_LT(std::abs(odd), 99.0 * even) << "l=" << l << " x=" << x;
    }
  }
}

TEST(BuildP, CoefficientBoundsAndDegree) {
  // Degree of prod_{j=1..k} s_{2^j l}(x/k) is sum_j 2^j l = (2^{k+1}-2) l.
  UniPoly p = build_p_coefficients(2, 3);
  EXPECT_EQ(p.degree(), (static_cast<int>(std::pow(2, 3)) - 2) * 3);
  EXPECT_EQ(p_degree(2, 3), p.degree());
  for (double a : p.scaled) EXPECT_LE(std::abs(a), 1.0 + 1e-12);
  EXPECT_DOUBLE_EQ(eval_poly(p, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(PointwiseP(5, 7)(0.0), 1.0);
  EXPECT_THROW(build_p_coefficients(10, 10), std::runtime_error);
}

TEST(BuildP, PointwiseAgreesWithCoefficients) {
  UniPoly p = build_p_coefficients(3, 8);
  PointwiseP pw(3, 8);
  for (double x = -10.0; x <= 10.0; x += 0.37) {
    double a = eval_poly(p, x);
    double b = pw(x);
    // Tolerance is relative to the summation scale e^{|x|}: for x < 0 the
    // alternating coefficient-mode sum cancels down from that scale, which
    // bounds any double evaluation's attainable accuracy.
    EXPECT_NEAR(b, a, 1e-10 * std::exp(std::abs(x))) << "x=" << x;
  }
}

TEST(BuildQ, CoefficientsAreShiftedP) {
  UniPoly p = build_p_coefficients(2, 4);
  UniPoly q = integrate_shifted(p);
  ASSERT_EQ(q.degree(), p.degree() + 1);
  EXPECT_DOUBLE_EQ(q.scaled[0], 1.0);
  for (int d = 0; d <= p.degree(); ++d)
    EXPECT_DOUBLE_EQ(q.scaled[static_cast<std::size_t>(d + 1)],
                     p.scaled[static_cast<std::size_t>(d)]);
  EXPECT_DOUBLE_EQ(eval_poly(q, 0.0), 1.0);
}

TEST(BuildQ, PointwiseAgreesWithCoefficients) {
  UniPoly q = build_q_coefficients(3, 8);
  PointwiseQ pw(3, 8);
  for (double x = -10.0; x <= 10.0; x += 0.41) {
    double a = eval_poly(q, x);
    double b = pw(x);
    EXPECT_NEAR(b, a, 1e-9 * std::max(1.0, std::abs(a))) << "x=" << x;
  }
}

TEST(BuildQ, StrictlyIncreasing) {
  UniPoly q = build_q_coefficients(2, 5);
  double prev = eval_poly(q, -25.0);
  for (double x = -24.5; x <= 25.0; x += 0.5) {
    double v = eval_poly(q, x);
    EXPECT_GT(v, prev) << "x=" << x;
    prev = v;
  }
}

TEST(SelectParams, Examples) {
  EXPECT_EQ(select_params(1.0, 0.5, 0.625, 1.0).k, 8);
  FlatParams fp = select_params(2.0, 0.01, 0.9, 3.0);
  EXPECT_EQ(fp.k, 6);
  EXPECT_EQ(fp.l, static_cast<int>(std::ceil(100 * (3 + std::log(600.0)))));
  EXPECT_EQ(fp.l, 940);
  EXPECT_THROW(select_params(1.0, 0.5, 1.5, 1.0), std::invalid_argument);
  EXPECT_THROW(select_params(1.0, 2.0, 0.5, 1.0), std::invalid_argument);
}

TEST(VerifyFlat, ExpItselfPasses) {
  FlatParams fp;
  fp.kappa = 3;
  fp.eta = 0.5;
  fp.eps = 1e-6;
  FlatGrid grid;
  grid.x_max = 50;
  auto report = verify_flat([](double x) { return std::exp(x); }, fp, grid);
  EXPECT_TRUE(report.pass);
  EXPECT_LT(report.max_err_inside, 1e-12);
  EXPECT_LE(report.max_ratio_outside, 1 + 1e-12);
}

TEST(VerifyFlat, PlainTruncationFailsGrowthCondition) {
  // s_d blows up on the negative tail: at x = -d it exceeds the flatness
  // envelope max(1, e^x) e^{eta |x|} by orders of magnitude.
  const int d = 40;
  FlatParams fp;
  fp.kappa = 1;
  fp.eta = 0.625;
  fp.eps = 0.5;
  FlatGrid grid;
  grid.x_max = d;
  auto report = verify_flat([&](double x) { return taylor_eval_stable(d, x); },
                            fp, grid);
  EXPECT_FALSE(report.pass);
  EXPECT_GT(report.max_ratio_outside, 10.0);
}

TEST(VerifyFlat, SelectedParamsPass) {
  FlatParams fp = select_params(2.0, 0.01, 0.625, 3.0);
  PointwiseQ q(fp.k, fp.l);
  FlatGrid grid;
  grid.x_max = 60;
  auto report = verify_flat([&](double x) { return q(x); }, fp, grid);
  EXPECT_TRUE(report.pass) << "err_in=" << report.max_err_inside
                           << " ratio_out=" << report.max_ratio_outside;
}

TEST(MonotoneIdentity, DiagonalVanishesAndGridNonnegative) {
  Grid2D grid;
  grid.lo = -20;
  grid.hi = 20;
  grid.step = 0.25;
  auto report = check_monotone_identity(3, 4, grid, 1e-8);
  EXPECT_TRUE(report.pass) << "min=" << report.min_value;
  EXPECT_GE(report.min_value, -1e-8);
}

TEST(MonotoneIdentity, InflatedPenaltyViolates) {
  // (k,l) = (1,8): the critical penalty coefficient dips to ~0.20 on the
  // negative tail, so 0.25 produces genuine violations there.
  Grid2D grid;
  grid.lo = -20;
  grid.hi = 20;
  grid.step = 0.25;
  auto report = check_monotone_identity(1, 8, grid, 1e-8, 0.25);
  EXPECT_FALSE(report.pass);
  EXPECT_GT(report.violations, 0);
  EXPECT_LT(report.min_value, 0.0);
}

TEST(SosFactorize, QuadraticCase) {
  // Roots of 1 + x + x^2/2 are -1 +/- i.
  SosFactorization fac = sos_factorize_shifted_truncation(1, 0.0);
  ASSERT_EQ(fac.root_re.size(), 1u);
  EXPECT_NEAR(fac.root_re[0], -1.0, 1e-12);
  EXPECT_NEAR(fac.root_im[0], 1.0, 1e-12);
  EXPECT_NEAR(fac.max_root_magnitude, std::sqrt(2.0), 1e-12);
  EXPECT_LT(fac.residual, 1e-12);
}

TEST(SosFactorize, ModerateDegrees) {
  for (int l : {2, 4, 8}) {
    for (double c : {0.0, -0.01, 0.01}) {
      SosFactorization fac = sos_factorize_shifted_truncation(l, c);
      EXPECT_LE(fac.max_root_magnitude, 5.0 * l) << "l=" << l << " c=" << c;
      EXPECT_LE(fac.residual, 1e-8) << "l=" << l << " c=" << c;
      for (double s : fac.root_im) EXPECT_GT(s, 0.0);
    }
  }
}

TEST(SosFactorize, RejectsBadArguments) {
  EXPECT_THROW(sos_factorize_shifted_truncation(0, 0.0), std::invalid_argument);
  EXPECT_THROW(sos_factorize_shifted_truncation(2, 0.5), std::invalid_argument);
  EXPECT_THROW(sos_factorize_shifted_truncation(40, 0.0, 64),
               std::invalid_argument);
}

TEST(Quadrature, PolynomialExactness) {
  // 20-point Gauss-Legendre is exact through degree 39.
  auto cubic = [](double x) { return 3 * x * x * x - x + 2; };
  double got = detail::gl20_panel(cubic, -1.0, 2.5);
  // Antiderivative: 0.75 x^4 - 0.5 x^2 + 2x.
  auto anti = [](double x) { return 0.75 * x * x * x * x - 0.5 * x * x + 2 * x; };
  EXPECT_NEAR(got, anti(2.5) - anti(-1.0), 1e-12);
  double e = detail::adaptive_gl([](double x) { return std::exp(x); }, 0.0, 5.0,
                                 1e-13);
  EXPECT_NEAR(e / (std::exp(5.0) - 1.0), 1.0, 1e-12);
}

}  // namespace
}  // namespace hamlearn
