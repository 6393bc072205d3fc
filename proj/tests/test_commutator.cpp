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

#include "hamlearn/commutator.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "hamlearn/dense.hpp"
#include "hamlearn/pauli.hpp"
#include "hamlearn/poly.hpp"

namespace hamlearn {
namespace {

DenseOperator random_hermitian(Eigen::Index d, std::mt19937_64& rng,
                               double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  DenseOperator m(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = cplx(g(rng), g(rng));
  return (m + m.adjoint().eval()) / 2.0;
}

DenseOperator random_density(Eigen::Index d, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  DenseOperator m(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = cplx(g(rng), g(rng));
  DenseOperator rho = m * m.adjoint();
  return rho / rho.trace().real();
}

BivariateSeq BV(std::vector<std::uint8_t> b) { return BivariateSeq(std::move(b)); }

DenseOperator iterated_commutator(const DenseOperator& x, const DenseOperator& a,
                                  int d) {
  DenseOperator cur = a;
  for (int i = 0; i < d; ++i) cur = x * cur - cur * x;
  return cur;
}

HamiltonianSpec chain_tfim(int n, double beta, double j = 1.0, double h = 0.5) {
  HamiltonianSpec spec;
  spec.n = n;
  spec.beta = beta;
  for (int q = 0; q + 1 < n; ++q) {
    std::string s(static_cast<std::size_t>(n), 'I');
    s[static_cast<std::size_t>(q)] = 'Z';
    s[static_cast<std::size_t>(q) + 1] = 'Z';
    spec.terms.push_back(PauliString::from_letters(s));
    spec.coeffs.push_back(j);
  }
  for (int q = 0; q < n; ++q) {
    std::string s(static_cast<std::size_t>(n), 'I');
    s[static_cast<std::size_t>(q)] = 'X';
    spec.terms.push_back(PauliString::from_letters(s));
    spec.coeffs.push_back(h);
  }
  return spec;
}

// -- apply_poly_dense --------------------------------------------------------

TEST(ApplyPolyDense, MatchesExplicitSum) {
  std::mt19937_64 rng(11);
  DenseOperator x = random_hermitian(8, rng);
  DenseOperator a = random_hermitian(8, rng);
  UniPoly p(std::vector<double>{0.5, -1.0, 2.0, 0.0, 3.0, -0.25});
  DenseOperator expect = DenseOperator::Zero(8, 8);
  double fact = 1.0;
  for (int d = 0; d <= p.degree(); ++d) {
    if (d > 0) fact *= d;
    expect += (p.scaled[static_cast<std::size_t>(d)] / fact) *
              iterated_commutator(x, a, d);
  }
  DenseOperator got = apply_poly_dense(p, x, a);
  EXPECT_LT((got - expect).norm(), 1e-10 * std::max(1.0, expect.norm()));
}

TEST(ApplyPolyDense, ExponentialSeriesMatchesConjugation) {
  // sum_d [X,A]_d/d! = e^X A e^{-X}; a high truncation of exp must agree.
  std::mt19937_64 rng(12);
  DenseOperator x = random_hermitian(6, rng, 0.4);
  DenseOperator a = random_hermitian(6, rng);
  Eigen::SelfAdjointEigenSolver<DenseOperator> es(x);
  DenseOperator ex = es.eigenvectors() *
                     es.eigenvalues().array().exp().matrix().asDiagonal() *
                     es.eigenvectors().adjoint();
  DenseOperator expect = ex * a * ex.inverse();
  DenseOperator got = apply_poly_dense(taylor_truncation(40), x, a);
  EXPECT_LT((got - expect).norm(), 1e-10 * expect.norm());
}

TEST(ApplyPolyDense, DegreeCapEnforced) {
  DenseOperator x = DenseOperator::Identity(2, 2);
  std::vector<double> c(kDenseCommutatorDegreeCap + 2, 0.0);
  c.back() = 1.0;
  EXPECT_THROW(apply_poly_dense(UniPoly(c), x, x), std::invalid_argument);
}

// -- apply_poly_eigen --------------------------------------------------------

TEST(ApplyPolyEigen, MatchesDenseForPolynomials) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 5; ++trial) {
    DenseOperator x = random_hermitian(8, rng);
    DenseOperator a = random_hermitian(8, rng);
    UniPoly p(std::vector<double>{1.0, 0.5, -2.0, 1.5});
    DenseOperator dense = apply_poly_dense(p, x, a);
    DenseOperator eig =
        apply_poly_eigen([&](double t) { return eval_poly(p, t); }, x, a);
    EXPECT_LT((dense - eig).norm(), 1e-9 * std::max(1.0, dense.norm()));
  }
}

TEST(ApplyPolyEigen, ExponentialGivesConjugation) {
  std::mt19937_64 rng(14);
  DenseOperator x = random_hermitian(6, rng, 0.5);
  DenseOperator a = random_hermitian(6, rng);
  Eigen::SelfAdjointEigenSolver<DenseOperator> es(x);
  DenseOperator ex = es.eigenvectors() *
                     es.eigenvalues().array().exp().matrix().asDiagonal() *
                     es.eigenvectors().adjoint();
  DenseOperator expect = ex * a * ex.inverse();
  DenseOperator got = apply_poly_eigen([](double t) { return std::exp(t); }, x, a);
  EXPECT_LT((got - expect).norm(), 1e-11 * expect.norm());
}

TEST(ApplyPolyEigen, EvaluatorSeesAscendingArguments) {
  std::mt19937_64 rng(15);
  DenseOperator x = random_hermitian(8, rng);
  double last = -1e300;
  bool sorted = true;
  apply_poly_eigen(
      [&](double t) {
        if (t < last) sorted = false;
        last = t;
        return t;
      },
      x, x);
  EXPECT_TRUE(sorted);
}

// -- MultiPoly ---------------------------------------------------------------

TEST(MultiPoly, ArithmeticAndEvaluation) {
  MultiPoly p = MultiPoly::constant(1.0);
  p.add(MultiPoly::variable(0));
  MultiPoly q = MultiPoly::constant(1.0);
  q.add(MultiPoly::variable(1, 2.0));
  MultiPoly r = p.multiply(q);  // (1 + v0)(1 + 2 v1)
  EXPECT_EQ(r.degree(), 2);
  EXPECT_EQ(r.terms().size(), 4u);
  std::vector<double> v{3.0, -0.5};
  EXPECT_NEAR(r.evaluate(v), (1.0 + 3.0) * (1.0 - 1.0), 1e-14);
  EXPECT_NEAR(p.evaluate(v), 4.0, 1e-14);
}

TEST(MultiPoly, CancellationRemovesTerms) {
  MultiPoly p = MultiPoly::variable(2, 1.5);
  p.add({2}, -1.5);
  EXPECT_TRUE(p.is_zero());
  EXPECT_EQ(p.degree(), 0);
}

TEST(MultiPoly, MonomialKeyIsSorted) {
  MultiPoly p;
  p.add({3, 1}, 1.0);
  p.add({1, 3}, 1.0);
  EXPECT_EQ(p.terms().size(), 1u);
  EXPECT_NEAR(p.terms().begin()->second, 2.0, 1e-15);
}

// -- expand_poly_symbolic ----------------------------------------------------

TEST(ExpandPolySymbolic, MatchesDenseAtSpecCoefficients) {
  HamiltonianSpec spec = chain_tfim(4, 0.7);
  DualGraph graph = build_dual_graph(spec);
  UniPoly p(std::vector<double>{1.0, 1.0, 0.5, -0.25});
  for (std::size_t b_idx : {std::size_t{0}, std::size_t{4}}) {
    PauliString b = spec.terms[b_idx];
    SymbolicOperatorPoly sym = expand_poly_symbolic(p, spec.beta, spec, graph, b);
    OperatorSum evaluated = sym.evaluate(spec.coeffs);
    DenseOperator xmat = -spec.beta * to_dense(spec.to_operator());
    DenseOperator expect = apply_poly_dense(p, xmat, to_dense(b));
    DenseOperator got = to_dense(evaluated);
    EXPECT_LT((got - expect).norm(), 1e-9 * std::max(1.0, expect.norm()));
  }
}

TEST(ExpandPolySymbolic, MatchesDenseAtArbitraryCoefficients) {
  HamiltonianSpec spec = chain_tfim(3, 1.2);
  DualGraph graph = build_dual_graph(spec);
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  UniPoly p(std::vector<double>{0.0, 1.0, -1.0, 0.5, 0.125});
  PauliString b = PauliString::from_letters("IZI");
  SymbolicOperatorPoly sym = expand_poly_symbolic(p, spec.beta, spec, graph, b);
  for (int trial = 0; trial < 3; ++trial) {
    std::vector<double> values(spec.terms.size());
    for (auto& v : values) v = u(rng);
    OperatorSum hp(spec.n);
    for (std::size_t a = 0; a < spec.terms.size(); ++a)
      hp.add(spec.terms[a], values[a]);
    DenseOperator xmat = -spec.beta * to_dense(hp);
    DenseOperator expect = apply_poly_dense(p, xmat, to_dense(b));
    DenseOperator got = to_dense(sym.evaluate(values));
    EXPECT_LT((got - expect).norm(), 1e-9 * std::max(1.0, expect.norm()));
  }
}

TEST(ExpandPolySymbolic, MonomialDegreesMatchCommutatorOrder) {
  HamiltonianSpec spec = chain_tfim(3, 1.0);
  DualGraph graph = build_dual_graph(spec);
  UniPoly p(std::vector<double>{1.0, 0.0, 1.0});  // 1 + x^2/2
  PauliString b = spec.terms[0];
  SymbolicOperatorPoly sym = expand_poly_symbolic(p, 1.0, spec, graph, b);
  for (const auto& [pauli, polys] : sym.entries) {
    for (const auto& [mono, c] : polys.first.terms())
      EXPECT_TRUE(mono.empty() || mono.size() == 2u);
    for (const auto& [mono, c] : polys.second.terms())
      EXPECT_TRUE(mono.empty() || mono.size() == 2u);
  }
}

// -- bivariate commutators ---------------------------------------------------

TEST(Bivariate, BasicSequences) {
  std::mt19937_64 rng(20);
  DenseOperator x = random_hermitian(4, rng);
  DenseOperator y = random_hermitian(4, rng);
  DenseOperator a = random_hermitian(4, rng);
  EXPECT_LT((bivariate_commutator(x, y, BivariateSeq{}, a) - a).norm(), 1e-15);
  DenseOperator xa = x * a - a * x;
  EXPECT_LT((bivariate_commutator(x, y, BV({0}), a) - xa).norm(),
            1e-12);
  DenseOperator ya = y * a - a * y;
  DenseOperator xya = x * ya - ya * x;
  EXPECT_LT((bivariate_commutator(x, y, BV({0, 1}), a) - xya).norm(),
            1e-12);
}

TEST(Bivariate, MonomialSequencePutsXOutermost) {
  BivariateSeq s = BivariateSeq::monomial(2, 1);
  ASSERT_EQ(s.length(), 3);
  EXPECT_EQ(s.bits[0], 0);
  EXPECT_EQ(s.bits[1], 0);
  EXPECT_EQ(s.bits[2], 1);
}

TEST(Reorder, SingleSwapIsJacobiIdentity) {
  std::mt19937_64 rng(21);
  DenseOperator x = random_hermitian(4, rng);
  DenseOperator y = random_hermitian(4, rng);
  DenseOperator a = random_hermitian(4, rng);
  auto dec = reorder_decomposition(BV({0, 1}), BV({1, 0}),
                                   x, y, a);
  ASSERT_EQ(dec.terms.size(), 1u);
  EXPECT_EQ(dec.terms[0].c, 1.0);
  EXPECT_EQ(dec.terms[0].prefix.length(), 0);
  EXPECT_EQ(dec.terms[0].suffix.length(), 0);
  EXPECT_LT(dec.residual, 1e-12);
  // And the reverse direction flips the sign.
  auto rev = reorder_decomposition(BV({1, 0}), BV({0, 1}),
                                   x, y, a);
  ASSERT_EQ(rev.terms.size(), 1u);
  EXPECT_EQ(rev.terms[0].c, -1.0);
  EXPECT_LT(rev.residual, 1e-12);
}

TEST(Reorder, RandomSequencesDecomposeExactly) {
  std::mt19937_64 rng(22);
  DenseOperator x = random_hermitian(4, rng);
  DenseOperator y = random_hermitian(4, rng);
  DenseOperator a = random_hermitian(4, rng);
  std::uniform_int_distribution<int> bit(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    int len = 2 + static_cast<int>(rng() % 5);
    std::vector<std::uint8_t> sb(static_cast<std::size_t>(len));
    for (auto& v : sb) v = static_cast<std::uint8_t>(bit(rng));
    std::vector<std::uint8_t> tb = sb;
    std::shuffle(tb.begin(), tb.end(), rng);
    auto dec = reorder_decomposition(BivariateSeq(sb), BivariateSeq(tb), x, y, a);
    EXPECT_LE(dec.terms.size(), static_cast<std::size_t>(len * len));
    EXPECT_LT(dec.residual, 1e-10);
    for (const auto& term : dec.terms)
      EXPECT_EQ(term.prefix.length() + term.suffix.length(), len - 2);
  }
}

TEST(Reorder, MismatchedMultisetThrows) {
  DenseOperator m = DenseOperator::Identity(2, 2);
  EXPECT_THROW(reorder_decomposition(BV({0, 1}),
                                     BV({1, 1}), m, m, m),
               std::invalid_argument);
  EXPECT_THROW(reorder_decomposition(BV({0}),
                                     BV({0, 0}), m, m, m),
               std::invalid_argument);
}

// -- monomial equivalence ----------------------------------------------------

TEST(MonomialEquivalence, SingleMoveRecoversTraceShift) {
  // p = x, q = x: one type-1 term, no reorder terms, and the identity
  // tr([X,A][X,B]^dag rho) - tr(A [X,[X,B]]^dag rho) = -tr(A [X,B]^dag [X,rho])
  // holds to machine precision.
  std::mt19937_64 rng(30);
  DenseOperator x = random_hermitian(4, rng);
  DenseOperator y = random_hermitian(4, rng);
  DenseOperator a = random_hermitian(4, rng);
  DenseOperator b = random_hermitian(4, rng);
  DenseOperator rho = random_density(4, rng);
  auto dec = monomial_equivalence_errors(1, 0, 1, 0, x, y, a, b, rho);
  ASSERT_EQ(dec.terms.size(), 1u);
  EXPECT_EQ(dec.terms[0].type, 1);
  EXPECT_EQ(dec.terms[0].s.length() + dec.terms[0].t.length(), 1);
  EXPECT_LT(dec.residual, 1e-12);
  DenseOperator xb = x * b - b * x;
  DenseOperator xr = x * rho - rho * x;
  cplx direct = -(a * xb.adjoint() * xr).trace();
  EXPECT_LT(std::abs(dec.terms[0].value - direct), 1e-12);
}

TEST(MonomialEquivalence, TermCountsAndLengths) {
  std::mt19937_64 rng(31);
  DenseOperator x = random_hermitian(4, rng, 0.7);
  DenseOperator y = random_hermitian(4, rng, 0.7);
  DenseOperator a = random_hermitian(4, rng);
  DenseOperator b = random_hermitian(4, rng);
  DenseOperator rho = random_density(4, rng);
  struct Case {
    int i1, i2, j1, j2;
  };
  for (const Case& cs : {Case{1, 1, 1, 1}, Case{2, 1, 0, 1}, Case{0, 2, 2, 0},
                         Case{2, 2, 1, 1}, Case{0, 0, 2, 2}}) {
    auto dec = monomial_equivalence_errors(cs.i1, cs.i2, cs.j1, cs.j2, x, y, a,
                                           b, rho);
    int d = cs.i1 + cs.i2 + cs.j1 + cs.j2;
    int n1 = 0, n2 = 0, n3 = 0;
    for (const auto& term : dec.terms) {
      if (term.type == 1) ++n1;
      if (term.type == 2) ++n2;
      if (term.type == 3) ++n3;
      int len = term.s.length() + term.t.length();
      if (term.type == 3) {
        EXPECT_EQ(len, d - 2);
      } else {
        EXPECT_EQ(len, d - 1);
      }
    }
    EXPECT_EQ(n1, cs.i1);
    EXPECT_EQ(n2, cs.i2);
    EXPECT_EQ(n3, cs.i2 * (cs.j1 + cs.i1));
    EXPECT_LT(dec.residual, 1e-10);
  }
}

TEST(MonomialEquivalence, RandomInstancesBalance) {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 10; ++trial) {
    DenseOperator x = random_hermitian(4, rng, 0.6);
    DenseOperator y = random_hermitian(4, rng, 0.6);
    DenseOperator a = random_hermitian(4, rng);
    DenseOperator b = random_hermitian(4, rng);
    DenseOperator rho = random_density(4, rng);
    int i1 = static_cast<int>(rng() % 3), i2 = static_cast<int>(rng() % 3);
    int j1 = static_cast<int>(rng() % 3), j2 = static_cast<int>(rng() % 3);
    auto dec = monomial_equivalence_errors(i1, i2, j1, j2, x, y, a, b, rho);
    EXPECT_LT(dec.residual, 1e-10)
        << "(" << i1 << "," << i2 << "," << j1 << "," << j2 << ")";
  }
}

TEST(MonomialEquivalence, TrivialMonomialHasNoErrors) {
  std::mt19937_64 rng(33);
  DenseOperator x = random_hermitian(4, rng);
  DenseOperator y = random_hermitian(4, rng);
  DenseOperator a = random_hermitian(4, rng);
  DenseOperator b = random_hermitian(4, rng);
  DenseOperator rho = random_density(4, rng);
  auto dec = monomial_equivalence_errors(0, 0, 2, 1, x, y, a, b, rho);
  EXPECT_TRUE(dec.terms.empty());
  EXPECT_LT(std::abs(dec.lhs - dec.target), 1e-12);
}

}  // namespace
}  // namespace hamlearn
