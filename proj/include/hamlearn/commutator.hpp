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

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "hamlearn/dense.hpp"
#include "hamlearn/pauli.hpp"
#include "hamlearn/poly.hpp"

namespace hamlearn {

// ---------------------------------------------------------------------------
// Univariate commutator polynomials p(X|A) = sum_d (a_d/d!) [X,A]_d.

inline constexpr int kDenseCommutatorDegreeCap = 512;

inline DenseOperator apply_poly_dense(const UniPoly& p, const DenseOperator& x,
                                      const DenseOperator& a) {
  if (x.rows() != a.rows() || x.cols() != a.cols() || x.rows() != x.cols())
    throw std::invalid_argument("apply_poly_dense: dimension mismatch");
  if (p.degree() > kDenseCommutatorDegreeCap)
    throw std::invalid_argument("apply_poly_dense: degree exceeds cap");
  // m_d = [X, A]_d / d!, built incrementally to avoid factorials.
  DenseOperator m = a;
  DenseOperator result = p.scaled[0] * a;
  for (int d = 1; d <= p.degree(); ++d) {
    m = (x * m - m * x) / static_cast<double>(d);
    double c = p.scaled[static_cast<std::size_t>(d)];
    if (c != 0.0) result += c * m;
  }
  return result;
}

/// p(X|A) via the eigenbasis Hadamard identity: with X = V S V†,
/// p(X|A) = V ((V†AV) o {p(s_i - s_j)}) V†.  The evaluator is called on
/// eigenvalue gaps in ascending order, so cumulative-integral evaluators
/// (PointwiseQ) amortize their quadrature.
template <typename Fn>
DenseOperator apply_poly_eigen(Fn&& f, const DenseOperator& x,
                               const DenseOperator& a) {
  if (x.rows() != a.rows() || x.rows() != x.cols())
    throw std::invalid_argument("apply_poly_eigen: dimension mismatch");
  Eigen::SelfAdjointEigenSolver<DenseOperator> es(x);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("apply_poly_eigen: eigensolver failure");
  const Eigen::VectorXd& s = es.eigenvalues();
  Eigen::Index d = x.rows();
  // Evaluate f on all gaps, ascending.
  std::vector<std::pair<double, Eigen::Index>> gaps;
  gaps.reserve(static_cast<std::size_t>(d * d));
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      gaps.emplace_back(s(i) - s(j), i * d + j);
  std::sort(gaps.begin(), gaps.end());
  Eigen::MatrixXd w(d, d);
  for (const auto& [gap, idx] : gaps) w(idx / d, idx % d) = f(gap);
  DenseOperator at = es.eigenvectors().adjoint() * a * es.eigenvectors();
  DenseOperator prod = at.cwiseProduct(w.cast<cplx>());
  return es.eigenvectors() * prod * es.eigenvectors().adjoint();
}

// ---------------------------------------------------------------------------
// Sparse multivariate polynomials over the coefficient variables.

/// Sparse real polynomial in variables v_0..v_{m-1}; monomial key is the
/// sorted multiset of variable indices.
class MultiPoly {
 public:
  using Monomial = std::vector<int>;
  using TermMap = std::map<Monomial, double>;

  MultiPoly() = default;
  static MultiPoly constant(double c) {
    MultiPoly p;
    p.add(Monomial{}, c);
    return p;
  }
  static MultiPoly variable(int idx, double coeff = 1.0) {
    MultiPoly p;
    p.add({idx}, coeff);
    return p;
  }

  const TermMap& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  int degree() const {
    int d = 0;
    for (const auto& [mono, c] : terms_) d = std::max(d, static_cast<int>(mono.size()));
    return d;
  }

  void add(Monomial mono, double c) {
    if (c == 0.0) return;
    std::sort(mono.begin(), mono.end());
    auto it = terms_.find(mono);
    if (it == terms_.end()) {
      terms_.emplace(std::move(mono), c);
    } else {
      it->second += c;
      if (it->second == 0.0) terms_.erase(it);
    }
  }

  void add(const MultiPoly& o, double scale = 1.0) {
    for (const auto& [mono, c] : o.terms_) add(mono, c * scale);
  }

  MultiPoly scaled(double s) const {
    MultiPoly r;
    for (const auto& [mono, c] : terms_) r.add(mono, c * s);
    return r;
  }

  MultiPoly multiply(const MultiPoly& o) const {
    MultiPoly r;
    for (const auto& [ma, ca] : terms_)
      for (const auto& [mb, cb] : o.terms_) {
        Monomial m = ma;
        m.insert(m.end(), mb.begin(), mb.end());
        r.add(std::move(m), ca * cb);
      }
    return r;
  }

  double evaluate(const std::vector<double>& values) const {
    double acc = 0;
    for (const auto& [mono, c] : terms_) {
      double t = c;
      for (int idx : mono) t *= values.at(static_cast<std::size_t>(idx));
      acc += t;
    }
    return acc;
  }

 private:
  TermMap terms_;
};

/// sum_P (re_P(v) + i im_P(v)) P over canonical PauliStrings.
struct SymbolicOperatorPoly {
  int n = 0;
  std::map<PauliString, std::pair<MultiPoly, MultiPoly>> entries;

  void add(const PauliString& p, cplx coeff, const MultiPoly& mono_poly) {
    auto key = p.canonical();
    cplx c = coeff * p.phase_factor();
    auto& e = entries[key];
    if (c.real() != 0.0) e.first.add(mono_poly, c.real());
    if (c.imag() != 0.0) e.second.add(mono_poly, c.imag());
  }

  OperatorSum evaluate(const std::vector<double>& values) const {
    OperatorSum o(n);
    for (const auto& [p, polys] : entries)
      o.add(p, cplx(polys.first.evaluate(values), polys.second.evaluate(values)));
    return o;
  }
};

/// Symbolic expansion of p(-beta H'|B) with H' = sum_a v_a E_a: the
/// cluster expansion makes the coefficient of each Pauli a polynomial in
/// the v_a with one monomial v_{a_1}...v_{a_l} per cluster sequence.
inline SymbolicOperatorPoly expand_poly_symbolic(const UniPoly& p, double beta,
                                                 const HamiltonianSpec& spec,
                                                 const DualGraph& graph,
                                                 const PauliString& b,
                                                 std::size_t cluster_cap = 1000000) {
  SymbolicOperatorPoly out;
  out.n = spec.n;
  if (p.scaled[0] != 0.0) out.add(b, p.scaled[0], MultiPoly::constant(1.0));
  for (int d = 1; d <= p.degree(); ++d) {
    double a_d = p.scaled[static_cast<std::size_t>(d)];
    if (a_d == 0.0) continue;
    // scaled storage: coefficient of x^d is a_d / d!; [X,B]_d picks up
    // (-beta)^d from X = -beta H'.
    double base = a_d * std::pow(-beta, d);
    for (const auto& seq :
         enumerate_clusters(graph, spec, b.support_mask(), d, cluster_cap)) {
      cplx coeff = base;
      PauliString cur = b;
      bool dead = false;
      // Innermost factor is seq[d-1].
      for (int j = d - 1; j >= 0; --j) {
        auto pc = pauli_commutator(
            spec.terms[static_cast<std::size_t>(seq[static_cast<std::size_t>(j)])],
            cur);
        if (!pc) {
          dead = true;
          break;
        }
        coeff *= pc->first;
        cur = pc->second;
      }
      if (dead) continue;
      MultiPoly::Monomial mono(seq.begin(), seq.end());
      MultiPoly mp;
      mp.add(std::move(mono), 1.0);
      // Divide by d!: fold into coefficient via the incremental route to
      // avoid overflow (d <= degree budget, small here).
      double inv_fact = 1.0;
      for (int i = 2; i <= d; ++i) inv_fact /= i;
      out.add(cur, coeff * inv_fact, mp);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bivariate nested commutators.

struct BivariateSeq {
  std::vector<std::uint8_t> bits;  // 0 -> X, 1 -> Y; front = outermost

  BivariateSeq() = default;
  explicit BivariateSeq(std::vector<std::uint8_t> b) : bits(std::move(b)) {}

  static BivariateSeq monomial(int i, int j) {
    // Canonical order for x^i y^j: all X's outside, matching [X,[Y,A]_j]_i.
    std::vector<std::uint8_t> b(static_cast<std::size_t>(i + j), 1);
    std::fill(b.begin(), b.begin() + i, std::uint8_t{0});
    return BivariateSeq(std::move(b));
  }

  int length() const { return static_cast<int>(bits.size()); }
  int count_ones() const {
    return static_cast<int>(std::count(bits.begin(), bits.end(), 1));
  }
};

/// [(X,Y)_S, A] = [Z_1, [Z_2, ..., [Z_l, A]...]], Z_i = X iff S_i = 0.
inline DenseOperator bivariate_commutator(const DenseOperator& x,
                                          const DenseOperator& y,
                                          const BivariateSeq& s,
                                          const DenseOperator& a) {
  if (x.rows() != y.rows() || x.rows() != a.rows())
    throw std::invalid_argument("bivariate_commutator: dimension mismatch");
  DenseOperator cur = a;
  for (auto it = s.bits.rbegin(); it != s.bits.rend(); ++it) {
    const DenseOperator& z = (*it == 0) ? x : y;
    cur = z * cur - cur * z;
  }
  return cur;
}

/// One correction term of the reordering lemma:
/// c * [(X,Y)_S, [[X,Y], [(X,Y)_T, A]]].
struct ReorderTerm {
  double c = 1.0;  // in {-1, +1}
  BivariateSeq prefix;  // S
  BivariateSeq suffix;  // T
};

struct ReorderDecomposition {
  std::vector<ReorderTerm> terms;
  double residual = 0;  // checked against dense evaluation
};

namespace detail {
inline DenseOperator reorder_term_dense(const ReorderTerm& t,
                                        const DenseOperator& x,
                                        const DenseOperator& y,
                                        const DenseOperator& a) {
  DenseOperator inner = bivariate_commutator(x, y, t.suffix, a);
  DenseOperator xy = x * y - y * x;
  inner = xy * inner - inner * xy;
  return t.c * bivariate_commutator(x, y, t.prefix, inner);
}
}  // namespace detail

/// [(X,Y)_S, A] - [(X,Y)_{S'}, A] as a signed sum of Jacobi correction
/// terms, one per adjacent swap transforming S into S'.  Swapping a
/// neighboring (X, Y) into (Y, X) contributes +[prefix, [[X,Y], [suffix, .]]].
inline ReorderDecomposition reorder_decomposition(const BivariateSeq& s,
                                                  const BivariateSeq& s_prime,
                                                  const DenseOperator& x,
                                                  const DenseOperator& y,
                                                  const DenseOperator& a) {
  if (s.length() != s_prime.length() || s.count_ones() != s_prime.count_ones())
    throw std::invalid_argument("reorder_decomposition: bit multiset mismatch");
  ReorderDecomposition out;
  std::vector<std::uint8_t> cur = s.bits;
  // Selection with adjacent bubbling: fix positions left to right.
  for (int idx = 0; idx < s_prime.length(); ++idx) {
    if (cur[static_cast<std::size_t>(idx)] == s_prime.bits[static_cast<std::size_t>(idx)])
      continue;
    int src = idx + 1;
    while (cur[static_cast<std::size_t>(src)] !=
           s_prime.bits[static_cast<std::size_t>(idx)])
      ++src;
    for (int pos = src - 1; pos >= idx; --pos) {
      // Swap cur[pos] and cur[pos+1]; they differ by construction.
      ReorderTerm term;
      // (X, Y) -> (Y, X) contributes +1; (Y, X) -> (X, Y) contributes -1.
      term.c = (cur[static_cast<std::size_t>(pos)] == 0) ? 1.0 : -1.0;
      term.prefix = BivariateSeq(std::vector<std::uint8_t>(
          cur.begin(), cur.begin() + pos));
      term.suffix = BivariateSeq(std::vector<std::uint8_t>(
          cur.begin() + pos + 2, cur.end()));
      out.terms.push_back(std::move(term));
      std::swap(cur[static_cast<std::size_t>(pos)],
                cur[static_cast<std::size_t>(pos + 1)]);
    }
  }
  // Verify: lhs difference minus the term sum.
  DenseOperator lhs = bivariate_commutator(x, y, s, a) -
                      bivariate_commutator(x, y, s_prime, a);
  DenseOperator acc = DenseOperator::Zero(a.rows(), a.cols());
  for (const auto& t : out.terms) acc += detail::reorder_term_dense(t, x, y, a);
  double scale = std::max(1.0, lhs.norm());
  out.residual = (lhs - acc).norm() / scale;
  return out;
}

// ---------------------------------------------------------------------------
// Monomial equivalence error terms.

struct MonomialErrorTerm {
  int type = 1;         // 1: [X,rho] factor; 2: [Y,rho] factor; 3: reorder
  double c = 1.0;       // +/- 1
  BivariateSeq s;       // A-side sequence (types 1,2) or reorder prefix (3)
  BivariateSeq t;       // B-side sequence (types 1,2) or reorder suffix (3)
  cplx value = 0;       // dense evaluation of the term
};

struct MonomialErrorDecomposition {
  std::vector<MonomialErrorTerm> terms;
  cplx lhs = 0;       // tr(p(X,Y|A) q(X,Y|B)^dag rho)
  cplx target = 0;    // tr(A r(X,Y|B)^dag rho)
  double residual = 0;
};

/// The three-error-type expansion of
///   tr(p(X,Y|A) q(X,Y|B)^dag rho) - tr(A r(X,Y|B)^dag rho)
/// for monomials p = x^{i1} y^{i2}, q = x^{j1} y^{j2}, r = pq: first move
/// every operator off the A side (one type-1/2 term each), then reorder
/// the accumulated B-side sequence into canonical all-X-then-all-Y form
/// (one type-3 term per adjacent swap).
inline MonomialErrorDecomposition monomial_equivalence_errors(
    int i1, int i2, int j1, int j2, const DenseOperator& x,
    const DenseOperator& y, const DenseOperator& a, const DenseOperator& b,
    const DenseOperator& rho) {
  if (i1 < 0 || i2 < 0 || j1 < 0 || j2 < 0)
    throw std::invalid_argument("monomial_equivalence_errors: negative exponent");
  MonomialErrorDecomposition out;
  DenseOperator xr = x * rho - rho * x;
  DenseOperator yr = y * rho - rho * y;

  BivariateSeq pa = BivariateSeq::monomial(i1, i2);
  BivariateSeq qb = BivariateSeq::monomial(j1, j2);
  out.lhs = (bivariate_commutator(x, y, pa, a) *
             bivariate_commutator(x, y, qb, b).adjoint() * rho)
                .trace();
  BivariateSeq rb = BivariateSeq::monomial(i1 + j1, i2 + j2);
  out.target = (a * bivariate_commutator(x, y, rb, b).adjoint() * rho).trace();

  // Stage 1: peel the outermost A-side operator onto the B side.
  // tr([Z,A']B'^dag rho) = tr(A'[Z,B']^dag rho) - tr(A'B'^dag [Z,rho]).
  std::vector<std::uint8_t> a_side = pa.bits;
  std::vector<std::uint8_t> b_side = qb.bits;
  while (!a_side.empty()) {
    std::uint8_t z = a_side.front();
    a_side.erase(a_side.begin());
    MonomialErrorTerm term;
    term.type = (z == 0) ? 1 : 2;
    term.c = -1.0;
    term.s = BivariateSeq(a_side);
    term.t = BivariateSeq(b_side);
    term.value =
        term.c * (bivariate_commutator(x, y, term.s, a) *
                  bivariate_commutator(x, y, term.t, b).adjoint() *
                  ((z == 0) ? xr : yr))
                     .trace();
    out.terms.push_back(std::move(term));
    b_side.insert(b_side.begin(), z);
  }

  // Stage 2: reorder the B-side sequence into canonical form; each swap
  // is a type-3 term  c * tr(A [prefix, [[X,Y], [suffix, B]]]^dag rho).
  ReorderDecomposition reorder = reorder_decomposition(
      BivariateSeq(b_side), rb, x, y, b);
  for (const auto& rt : reorder.terms) {
    MonomialErrorTerm term;
    term.type = 3;
    term.c = rt.c;
    term.s = rt.prefix;
    term.t = rt.suffix;
    ReorderTerm unit = rt;
    unit.c = 1.0;
    term.value =
        rt.c * (a * detail::reorder_term_dense(unit, x, y, b).adjoint() * rho)
                   .trace();
    out.terms.push_back(std::move(term));
  }

  cplx acc = 0;
  for (const auto& t : out.terms) acc += t.value;
  double scale = std::max({1.0, std::abs(out.lhs), std::abs(out.target)});
  out.residual = std::abs(out.lhs - out.target - acc) / scale;
  return out;
}

}  // namespace hamlearn
