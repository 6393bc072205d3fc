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

#include "hamlearn/pauli.hpp"

#include <gtest/gtest.h>

#include <array>
#include <random>
#include <set>

namespace hamlearn {
namespace {

// ---------------------------------------------------------------------------
// Independent dense oracle: explicit 2x2 matrices and Kronecker products,
// with qubit 0 as the *first* tensor factor.

using Mat = std::vector<std::vector<cplx>>;

Mat single(char letter) {
  const cplx i{0, 1};
  switch (letter) {
    case 'I': return {{1, 0}, {0, 1}};
    case 'X': return {{0, 1}, {1, 0}};
    case 'Y': return {{0, -i}, {i, 0}};
    default: return {{1, 0}, {0, -1}};  // Z
  }
}

Mat kron(const Mat& a, const Mat& b) {
  std::size_t ra = a.size(), rb = b.size();
  Mat out(ra * rb, std::vector<cplx>(ra * rb, 0.0));
  for (std::size_t i = 0; i < ra; ++i)
    for (std::size_t j = 0; j < ra; ++j)
      for (std::size_t k = 0; k < rb; ++k)
        for (std::size_t l = 0; l < rb; ++l)
          out[i * rb + k][j * rb + l] = a[i][j] * b[k][l];
  return out;
}

// Letters string, qubit 0 first; oracle convention: qubit 0 indexes the
// *low* bit of the computational basis state, so it is the innermost factor.
Mat oracle_dense(const std::string& letters) {
  Mat m = single(letters.back());
  for (int i = static_cast<int>(letters.size()) - 2; i >= 0; --i)
    m = kron(m, single(letters[static_cast<std::size_t>(i)]));
  return m;
}

Mat matmul(const Mat& a, const Mat& b) {
  std::size_t d = a.size();
  Mat out(d, std::vector<cplx>(d, 0.0));
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t k = 0; k < d; ++k)
      for (std::size_t j = 0; j < d; ++j) out[i][j] += a[i][k] * b[k][j];
  return out;
}

double mat_dist(const Mat& a, const Mat& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j)
      m = std::max(m, std::abs(a[i][j] - b[i][j]));
  return m;
}

Mat scaled_mat(const Mat& a, cplx s) {
  Mat out = a;
  for (auto& row : out)
    for (auto& v : row) v *= s;
  return out;
}

const std::array<std::string, 4> kLetters = {"I", "X", "Y", "Z"};

std::string letters_of(int code, int n) {
  std::string s;
  for (int i = 0; i < n; ++i) {
    s += kLetters[static_cast<std::size_t>(code & 3)];
    code >>= 2;
  }
  return s;
}

// ---------------------------------------------------------------------------

TEST(PauliString, LettersRoundTrip) {
  for (int code = 0; code < 64; ++code) {
    std::string s = letters_of(code, 3);
    EXPECT_EQ(PauliString::from_letters(s).to_letters(), s);
  }
  EXPECT_THROW(PauliString::from_letters("XQ"), std::invalid_argument);
}

TEST(PauliString, SupportAndCanonical) {
  PauliString p = PauliString::from_letters("XIYZI");
  EXPECT_EQ(p.support_mask(), 0b01101u);
  EXPECT_EQ(p.support_size(), 3);
  EXPECT_TRUE(p.is_canonical());
  PauliString q(2, 1, 0, 3);
  EXPECT_EQ(q.phase_factor(), cplx(0, -1));
  EXPECT_TRUE(q.canonical().is_canonical());
}

// Every canonical 2-qubit product against the dense oracle.
TEST(PauliMultiply, MatchesDenseOracleAllPairs) {
  for (int cp = 0; cp < 16; ++cp)
    for (int cq = 0; cq < 16; ++cq) {
      std::string sp = letters_of(cp, 2), sq = letters_of(cq, 2);
      PauliString p = PauliString::from_letters(sp);
      PauliString q = PauliString::from_letters(sq);
      auto [s, r] = pauli_multiply(p, q);
      Mat expect = matmul(oracle_dense(sp), oracle_dense(sq));
      Mat got = scaled_mat(oracle_dense(r.to_letters()),
                           PauliString(2, 0, 0, s).phase_factor());
      EXPECT_LT(mat_dist(expect, got), 1e-14) << sp << " * " << sq;
    }
}

TEST(PauliMultiply, FoldsOperandPhases) {
  // (i X)(i Z) = -XZ = -(-i Y) = i Y.
  PauliString p(1, 1, 0, 1), q(1, 0, 1, 1);
  auto [s, r] = pauli_multiply(p, q);
  EXPECT_EQ(r.to_letters(), "Y");
  EXPECT_EQ(s, 1);
}

TEST(PauliCommutator, MatchesDenseOracleAllPairs) {
  for (int cp = 0; cp < 16; ++cp)
    for (int cq = 0; cq < 16; ++cq) {
      std::string sp = letters_of(cp, 2), sq = letters_of(cq, 2);
      PauliString p = PauliString::from_letters(sp);
      PauliString q = PauliString::from_letters(sq);
      Mat pq = matmul(oracle_dense(sp), oracle_dense(sq));
      Mat qp = matmul(oracle_dense(sq), oracle_dense(sp));
      Mat lie(4, std::vector<cplx>(4, 0.0));
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
          lie[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
              pq[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] -
              qp[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      auto pc = pauli_commutator(p, q);
      EXPECT_EQ(pc.has_value(), !pauli_commutes(p, q));
      Mat got(4, std::vector<cplx>(4, 0.0));
      if (pc) got = scaled_mat(oracle_dense(pc->second.to_letters()), pc->first);
      EXPECT_LT(mat_dist(lie, got), 1e-14) << "[" << sp << ", " << sq << "]";
      if (pc) {
        // Coefficient lies in {±2, ±2i} and the result is canonical.
        EXPECT_NEAR(std::abs(pc->first), 2.0, 1e-14);
        EXPECT_TRUE(pc->second.is_canonical());
      }
    }
}

TEST(PauliCommutes, MatchesSymplecticForm) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    PauliString p(6, rng() & 63, rng() & 63);
    PauliString q(6, rng() & 63, rng() & 63);
    auto [s, r] = pauli_multiply(p, q);
    auto [s2, r2] = pauli_multiply(q, p);
    bool equal_products = (s == s2);
    EXPECT_EQ(pauli_commutes(p, q), equal_products);
  }
}

TEST(OperatorSum, AddFoldsPhaseAndPrunes) {
  OperatorSum o(1);
  o.add(PauliString(1, 1, 0, 1), 1.0);  // i X
  EXPECT_EQ(o.size(), 1u);
  EXPECT_EQ(o.coeff(PauliString::from_letters("X")), cplx(0, 1));
  // Querying with the same phased string recovers the plain coefficient.
  EXPECT_NEAR(std::abs(o.coeff(PauliString(1, 1, 0, 1)) - cplx(1.0)), 0, 1e-15);
  o.add(PauliString(1, 1, 0, 3), 1.0);  // -i X cancels
  EXPECT_TRUE(o.is_zero());
}

TEST(OperatorSum, CommutatorBilinearAndHermitian) {
  OperatorSum a(2), b(2);
  a.add(PauliString::from_letters("XI"), 0.7);
  a.add(PauliString::from_letters("ZZ"), -0.4);
  b.add(PauliString::from_letters("YI"), 0.3);
  b.add(PauliString::from_letters("IX"), 0.9);
  OperatorSum c = a.commutator(b);
  // [X,Y] = 2iZ on qubit 0; ZZ vs YI -> [Z,Y] = -2iX; ZZ vs IX -> [Z,X]=2iY.
  EXPECT_EQ(c.coeff(PauliString::from_letters("ZI")), cplx(0, 2) * 0.7 * 0.3);
  // i [A, B] is Hermitian for Hermitian A, B.
  EXPECT_TRUE(c.scaled(cplx(0, 1)).is_hermitian());
}

TEST(OperatorSum, LocalizeKeepsSupportedTerms) {
  OperatorSum o(3);
  o.add(PauliString::from_letters("XII"), 1.0);
  o.add(PauliString::from_letters("IZY"), 0.5);
  o.add(PauliString::from_letters("ZIZ"), 0.25);
  OperatorSum l0 = o.localize(0);
  EXPECT_EQ(l0.size(), 2u);
  EXPECT_EQ(l0.coeff(PauliString::from_letters("XII")), cplx(1.0));
  OperatorSum l1 = o.localize(1);
  EXPECT_EQ(l1.size(), 1u);
  EXPECT_THROW(o.localize(3), std::out_of_range);
}

HamiltonianSpec chain_tfim(int n, double beta, double j = 1.0, double h = 0.5) {
  HamiltonianSpec spec;
  spec.n = n;
  spec.beta = beta;
  for (int i = 0; i + 1 < n; ++i) {
    std::string s(static_cast<std::size_t>(n), 'I');
    s[static_cast<std::size_t>(i)] = 'Z';
    s[static_cast<std::size_t>(i + 1)] = 'Z';
    spec.terms.push_back(PauliString::from_letters(s));
    spec.coeffs.push_back(j);
  }
  for (int i = 0; i < n; ++i) {
    std::string s(static_cast<std::size_t>(n), 'I');
    s[static_cast<std::size_t>(i)] = 'X';
    spec.terms.push_back(PauliString::from_letters(s));
    spec.coeffs.push_back(h);
  }
  return spec;
}

TEST(HamiltonianSpec, ValidateRejectsBadInput) {
  HamiltonianSpec spec = chain_tfim(4, 1.0);
  EXPECT_NO_THROW(spec.validate());
  HamiltonianSpec dup = spec;
  dup.terms.push_back(dup.terms[0]);
  dup.coeffs.push_back(0.1);
  EXPECT_THROW(dup.validate(), std::invalid_argument);
  HamiltonianSpec big = spec;
  big.coeffs[0] = 1.5;
  EXPECT_THROW(big.validate(), std::invalid_argument);
  HamiltonianSpec ident = spec;
  ident.terms[0] = PauliString::identity(4);
  EXPECT_THROW(ident.validate(), std::invalid_argument);
}

TEST(DualGraph, ChainStructure) {
  // 4-site chain: ZZ edges 0-1,1-2,2-3 then X fields on 0..3.
  HamiltonianSpec spec = chain_tfim(4, 1.0);
  DualGraph g = build_dual_graph(spec);
  ASSERT_EQ(g.num_vertices(), 7);
  // Middle ZZ term overlaps: neighbor ZZ terms (2) + two X fields.
  EXPECT_EQ(g.adj[1].size(), 4u);
  // End X field term overlaps only the first ZZ term.
  EXPECT_EQ(g.adj[3].size(), 1u);
  EXPECT_EQ(g.max_degree, 4);
}

// Brute-force oracle: all vertex subsets, connectivity by flood fill.
std::set<std::vector<int>> brute_connected_subsets(const DualGraph& g,
                                                   int max_size) {
  std::set<std::vector<int>> out;
  int m = g.num_vertices();
  for (int mask = 1; mask < (1 << m); ++mask) {
    if (std::popcount(static_cast<unsigned>(mask)) > max_size) continue;
    std::vector<int> verts;
    for (int v = 0; v < m; ++v)
      if (mask & (1 << v)) verts.push_back(v);
    std::vector<int> stack = {verts[0]};
    std::set<int> seen = {verts[0]};
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int w : g.adj[static_cast<std::size_t>(v)])
        if ((mask & (1 << w)) && seen.insert(w).second) stack.push_back(w);
    }
    if (static_cast<int>(seen.size()) == static_cast<int>(verts.size()))
      out.insert(verts);
  }
  return out;
}

TEST(ConnectedSubsets, MatchesBruteForce) {
  HamiltonianSpec spec = chain_tfim(5, 1.0);
  DualGraph g = build_dual_graph(spec);
  for (int l = 1; l <= 4; ++l) {
    auto got = connected_subsets(g, l);
    std::set<std::vector<int>> canon;
    for (auto s : got) {
      std::sort(s.begin(), s.end());
      EXPECT_TRUE(canon.insert(s).second) << "duplicate subset";
    }
    EXPECT_EQ(canon, brute_connected_subsets(g, l));
  }
}

TEST(ConnectedSubsets, BudgetCapThrows) {
  HamiltonianSpec spec = chain_tfim(6, 1.0);
  DualGraph g = build_dual_graph(spec);
  EXPECT_THROW(connected_subsets(g, 5, 10), EnumerationBudgetExceeded);
}

TEST(LocalPauliSet, CountBoundAndMembership) {
  HamiltonianSpec spec = chain_tfim(5, 1.0);
  DualGraph g = build_dual_graph(spec);
  int k = spec.max_support();
  for (int l = 1; l <= 3; ++l) {
    LocalPauliSet set = enumerate_local_paulis(g, spec, l);
    // Paper count bound: m (10^k d)^l with d the dual-graph max degree.
    double bound = spec.num_terms() *
                   std::pow(std::pow(10.0, k) * g.max_degree, l);
    EXPECT_LE(static_cast<double>(set.members.size()), bound);
    for (const auto& p : set.members) {
      EXPECT_FALSE(p.is_identity());
      EXPECT_TRUE(p.is_canonical());
    }
    // Every Hamiltonian term is 1-local, hence in every set.
    for (const auto& t : spec.terms)
      EXPECT_TRUE(std::binary_search(set.members.begin(), set.members.end(), t));
  }
  // Sorted and deduplicated.
  LocalPauliSet set = enumerate_local_paulis(g, spec, 2);
  EXPECT_TRUE(std::is_sorted(set.members.begin(), set.members.end()));
  EXPECT_EQ(std::adjacent_find(set.members.begin(), set.members.end()),
            set.members.end());
}

// Brute-force cluster oracle: all sequences in [m]^l, checked directly.
std::set<std::vector<int>> brute_clusters(const HamiltonianSpec& spec,
                                          std::uint64_t root, int l) {
  std::set<std::vector<int>> out;
  int m = spec.num_terms();
  std::vector<int> seq(static_cast<std::size_t>(l));
  std::function<void(int)> rec = [&](int pos) {
    if (pos == l) {
      // Applied innermost-first: seq[l-1] must hit root, then grow.
      std::uint64_t mask = root;
      for (int j = l - 1; j >= 0; --j) {
        std::uint64_t s =
            spec.terms[static_cast<std::size_t>(seq[static_cast<std::size_t>(j)])]
                .support_mask();
        if (!(s & mask)) return;
        mask |= s;
      }
      out.insert(seq);
      return;
    }
    for (int a = 0; a < m; ++a) {
      seq[static_cast<std::size_t>(pos)] = a;
      rec(pos + 1);
    }
  };
  rec(0);
  return out;
}

TEST(EnumerateClusters, MatchesBruteForceAndCountBound) {
  HamiltonianSpec spec = chain_tfim(4, 1.0);
  DualGraph g = build_dual_graph(spec);
  std::uint64_t root = spec.terms[0].support_mask();
  for (int l = 1; l <= 3; ++l) {
    auto got = enumerate_clusters(g, spec, root, l);
    std::set<std::vector<int>> canon(got.begin(), got.end());
    EXPECT_EQ(canon.size(), got.size()) << "duplicate cluster sequence";
    EXPECT_EQ(canon, brute_clusters(spec, root, l));
    // Paper count bound: l! (d+1)^l clusters per root.
    double bound = std::tgamma(l + 1.0) * std::pow(g.max_degree + 1.0, l);
    EXPECT_LE(static_cast<double>(got.size()), bound);
  }
}

}  // namespace
}  // namespace hamlearn
