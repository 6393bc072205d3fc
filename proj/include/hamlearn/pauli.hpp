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
#include <bit>
#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace hamlearn {

using cplx = std::complex<double>;

inline constexpr double kCoeffPruneTol = 1e-15;

/// n-qubit tensor product of Pauli matrices in bitmask form.
///
/// Bit i of x_mask / z_mask is set iff qubit i carries an X / Z factor;
/// both set means Y.  phase_exp encodes a global factor of i^phase_exp.
/// A canonical PauliString has phase_exp == 0 and then represents the
/// Hermitian operator i^{|x&z|} X^x Z^z (the usual I/X/Y/Z letters).
struct PauliString {
  int n = 0;
  std::uint64_t x_mask = 0;
  std::uint64_t z_mask = 0;
  int phase_exp = 0;  // mod 4

  PauliString() = default;
  PauliString(int n_, std::uint64_t x, std::uint64_t z, int phase = 0)
      : n(n_), x_mask(x), z_mask(z), phase_exp(((phase % 4) + 4) % 4) {
    if (n_ < 0 || n_ > 64) throw std::invalid_argument("qubit count out of range");
  }

  static PauliString identity(int n) { return PauliString(n, 0, 0); }

  /// Parse a letter string like "XZIIY" (qubit 0 first).
  static PauliString from_letters(const std::string& s) {
    PauliString p(static_cast<int>(s.size()), 0, 0);
    for (std::size_t i = 0; i < s.size(); ++i) {
      std::uint64_t bit = std::uint64_t{1} << i;
      switch (s[i]) {
        case 'I': break;
        case 'X': p.x_mask |= bit; break;
        case 'Y': p.x_mask |= bit; p.z_mask |= bit; break;
        case 'Z': p.z_mask |= bit; break;
        default: throw std::invalid_argument("invalid Pauli letter");
      }
    }
    return p;
  }

  std::string to_letters() const {
    std::string s(static_cast<std::size_t>(n), 'I');
    for (int i = 0; i < n; ++i) {
      bool x = (x_mask >> i) & 1, z = (z_mask >> i) & 1;
      s[static_cast<std::size_t>(i)] = x ? (z ? 'Y' : 'X') : (z ? 'Z' : 'I');
    }
    return s;
  }

  std::uint64_t support_mask() const { return x_mask | z_mask; }
  int support_size() const { return std::popcount(support_mask()); }
  bool is_identity() const { return support_mask() == 0; }
  bool is_canonical() const { return phase_exp == 0; }

  cplx phase_factor() const {
    static constexpr cplx table[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    return table[phase_exp];
  }

  /// Same string with phase_exp cleared; the dropped factor is i^phase_exp.
  PauliString canonical() const { return PauliString(n, x_mask, z_mask); }

  bool operator==(const PauliString& o) const {
    return n == o.n && x_mask == o.x_mask && z_mask == o.z_mask &&
           phase_exp == o.phase_exp;
  }
  bool operator<(const PauliString& o) const {
    if (x_mask != o.x_mask) return x_mask < o.x_mask;
    if (z_mask != o.z_mask) return z_mask < o.z_mask;
    return phase_exp < o.phase_exp;
  }
};

struct PauliStringHash {
  std::size_t operator()(const PauliString& p) const noexcept {
    std::uint64_t h = p.x_mask * 0x9e3779b97f4a7c15ull;
    h ^= p.z_mask + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    h ^= static_cast<std::uint64_t>(p.phase_exp) * 0xff51afd7ed558ccdull;
    return static_cast<std::size_t>(h);
  }
};

/// P * Q = i^s * R with R canonical.  Returns (s mod 4, R).
///
/// Per qubit, writing each factor as X^x Z^z with the Y = iXZ convention:
/// moving Z^{z1} past X^{x2} costs (-1)^{z1 x2}, and the canonical-form
/// corrections contribute i^{|x&z|} for each operand and -i^{|x&z|} for the
/// result.
inline std::pair<int, PauliString> pauli_multiply(const PauliString& p,
                                                  const PauliString& q) {
  if (p.n != q.n) throw std::invalid_argument("pauli_multiply: dimension mismatch");
  std::uint64_t x = p.x_mask ^ q.x_mask;
  std::uint64_t z = p.z_mask ^ q.z_mask;
  // i-exponent: input canonical phases, anticommutation sign, output correction.
  int s = p.phase_exp + q.phase_exp;
  s += std::popcount(p.x_mask & p.z_mask);
  s += std::popcount(q.x_mask & q.z_mask);
  s += 2 * std::popcount(p.z_mask & q.x_mask);
  s -= std::popcount(x & z);
  s = ((s % 4) + 4) % 4;
  return {s, PauliString(p.n, x, z)};
}

inline bool pauli_commutes(const PauliString& p, const PauliString& q) {
  if (p.n != q.n) throw std::invalid_argument("pauli_commutes: dimension mismatch");
  int sym = std::popcount(p.x_mask & q.z_mask) + std::popcount(p.z_mask & q.x_mask);
  return (sym & 1) == 0;
}

/// [P, Q] = coef * R with R canonical, or nullopt when P and Q commute.
/// For anticommuting canonical Paulis [P,Q] = 2 PQ, so coef in {±2, ±2i}.
inline std::optional<std::pair<cplx, PauliString>> pauli_commutator(
    const PauliString& p, const PauliString& q) {
  if (!pauli_commutes(p, q)) {
    auto [s, r] = pauli_multiply(p, q);
    cplx phase = PauliString(r.n, 0, 0, s).phase_factor();
    return std::make_pair(2.0 * phase, r);
  }
  return std::nullopt;
}

/// Sparse complex linear combination of canonical PauliStrings.
class OperatorSum {
 public:
  using TermMap = std::unordered_map<PauliString, cplx, PauliStringHash>;

  OperatorSum() = default;
  explicit OperatorSum(int n) : n_(n) {}

  int num_qubits() const { return n_; }
  const TermMap& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool is_zero() const { return terms_.empty(); }

  /// Add coeff * P, folding P's phase into the coefficient.
  void add(const PauliString& p, cplx coeff) {
    if (n_ == 0) n_ = p.n;
    if (p.n != n_) throw std::invalid_argument("OperatorSum::add: dimension mismatch");
    cplx c = coeff * p.phase_factor();
    auto key = p.canonical();
    auto it = terms_.find(key);
    if (it == terms_.end()) {
      if (std::abs(c) > kCoeffPruneTol) terms_.emplace(key, c);
    } else {
      it->second += c;
      if (std::abs(it->second) <= kCoeffPruneTol) terms_.erase(it);
    }
  }

  void add(const OperatorSum& o, cplx scale = 1.0) {
    for (const auto& [p, c] : o.terms_) add(p, c * scale);
  }

  cplx coeff(const PauliString& p) const {
    auto it = terms_.find(p.canonical());
    if (it == terms_.end()) return 0.0;
    return it->second * std::conj(p.phase_factor());
  }

  OperatorSum scaled(cplx s) const {
    OperatorSum r(n_);
    for (const auto& [p, c] : terms_) r.add(p, c * s);
    return r;
  }

  /// [this, o] expanded term by term.
  OperatorSum commutator(const OperatorSum& o) const {
    OperatorSum r(n_);
    for (const auto& [p, cp] : terms_)
      for (const auto& [q, cq] : o.terms_)
        if (auto pc = pauli_commutator(p, q)) r.add(pc->second, cp * cq * pc->first);
    return r;
  }

  bool is_hermitian(double tol = 1e-12) const {
    for (const auto& [p, c] : terms_)
      if (std::abs(c.imag()) > tol) return false;
    return true;
  }

  double max_abs_coeff() const {
    double m = 0;
    for (const auto& [p, c] : terms_) m = std::max(m, std::abs(c));
    return m;
  }

  /// Keeps exactly the terms P with i in supp(P).
  OperatorSum localize(int qubit) const {
    if (qubit < 0 || qubit >= n_)
      throw std::out_of_range("localize: qubit index out of range");
    OperatorSum r(n_);
    std::uint64_t bit = std::uint64_t{1} << qubit;
    for (const auto& [p, c] : terms_)
      if (p.support_mask() & bit) r.add(p, c);
    return r;
  }

 private:
  int n_ = 0;
  TermMap terms_;
};

/// A Hamiltonian H = sum_a lambda_a E_a with distinct non-identity Pauli
/// terms, |lambda_a| <= 1, each supported on at most k qubits.
struct HamiltonianSpec {
  int n = 0;
  double beta = 1.0;
  std::vector<PauliString> terms;
  std::vector<double> coeffs;

  int num_terms() const { return static_cast<int>(terms.size()); }

  int max_support() const {
    int k = 0;
    for (const auto& t : terms) k = std::max(k, t.support_size());
    return k;
  }

  void validate() const {
    if (n < 1 || n > 64) throw std::invalid_argument("spec: bad qubit count");
    if (terms.size() != coeffs.size())
      throw std::invalid_argument("spec: terms/coeffs length mismatch");
    std::set<std::pair<std::uint64_t, std::uint64_t>> seen;
    for (std::size_t a = 0; a < terms.size(); ++a) {
      if (terms[a].n != n) throw std::invalid_argument("spec: term qubit count mismatch");
      if (!terms[a].is_canonical()) throw std::invalid_argument("spec: term not canonical");
      if (terms[a].is_identity()) throw std::invalid_argument("spec: identity term");
      if (std::abs(coeffs[a]) > 1.0 + 1e-12)
        throw std::invalid_argument("spec: |coeff| > 1");
      if (!seen.insert({terms[a].x_mask, terms[a].z_mask}).second)
        throw std::invalid_argument("spec: duplicate term");
    }
  }

  OperatorSum to_operator() const {
    OperatorSum h(n);
    for (std::size_t a = 0; a < terms.size(); ++a) h.add(terms[a], coeffs[a]);
    return h;
  }

  /// Same Gibbs state, stated at inverse temperature beta * s with H / s.
  HamiltonianSpec rescaled(double s) const {
    HamiltonianSpec r = *this;
    r.beta = beta * s;
    for (auto& c : r.coeffs) c /= s;
    return r;
  }
};

/// Graph on term indices; edge (a,b) iff supp(E_a) and supp(E_b) intersect.
struct DualGraph {
  std::vector<std::vector<int>> adj;
  int max_degree = 0;

  int num_vertices() const { return static_cast<int>(adj.size()); }
};

inline DualGraph build_dual_graph(const HamiltonianSpec& spec) {
  spec.validate();
  DualGraph g;
  int m = spec.num_terms();
  g.adj.assign(static_cast<std::size_t>(m), {});
  for (int a = 0; a < m; ++a)
    for (int b = a + 1; b < m; ++b)
      if (spec.terms[static_cast<std::size_t>(a)].support_mask() &
          spec.terms[static_cast<std::size_t>(b)].support_mask()) {
        g.adj[static_cast<std::size_t>(a)].push_back(b);
        g.adj[static_cast<std::size_t>(b)].push_back(a);
      }
  for (const auto& nb : g.adj)
    g.max_degree = std::max(g.max_degree, static_cast<int>(nb.size()));
  return g;
}

struct EnumerationBudgetExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Connected subsets of the dual graph with at most max_size vertices.
/// Standard rule to avoid duplicates: only grow a subset from neighbors of
/// its members that are larger than the subset's smallest (root) vertex.
inline std::vector<std::vector<int>> connected_subsets(const DualGraph& g,
                                                       int max_size,
                                                       std::size_t cap = 1000000) {
  std::vector<std::vector<int>> out;
  int m = g.num_vertices();
  std::vector<int> current;
  std::set<int> frontier_block;
  std::function<void(int, std::set<int>&)> grow = [&](int root,
                                                      std::set<int>& banned) {
    out.push_back(current);
    if (out.size() > cap)
      throw EnumerationBudgetExceeded("connected_subsets: budget cap exceeded");
    if (static_cast<int>(current.size()) >= max_size) return;
    // Candidate extensions: neighbors of current members, above root, unbanned.
    std::set<int> cands;
    for (int v : current)
      for (int w : g.adj[static_cast<std::size_t>(v)])
        if (w > root && !banned.count(w) &&
            std::find(current.begin(), current.end(), w) == current.end())
          cands.insert(w);
    std::vector<int> newly_banned;
    for (int w : cands) {
      current.push_back(w);
      grow(root, banned);
      current.pop_back();
      banned.insert(w);
      newly_banned.push_back(w);
    }
    for (int w : newly_banned) banned.erase(w);
  };
  for (int root = 0; root < m; ++root) {
    current = {root};
    std::set<int> banned;
    grow(root, banned);
  }
  return out;
}

/// The set of l-G-local Paulis: non-identity P with supp(P) inside the
/// union of supports of some connected S, |S| <= l.
struct LocalPauliSet {
  int budget = 0;  // graph-locality l
  std::vector<PauliString> members;
};

/// Enumerate all non-identity Paulis supported inside `mask`, appending
/// canonical strings to `out` (deduplicated by caller's set).
namespace detail {
inline void paulis_on_mask(int n, std::uint64_t mask,
                           std::set<std::pair<std::uint64_t, std::uint64_t>>& seen,
                           std::vector<PauliString>& out, std::size_t cap) {
  std::vector<int> qubits;
  for (int i = 0; i < n; ++i)
    if ((mask >> i) & 1) qubits.push_back(i);
  std::size_t total = 1;
  for (std::size_t i = 0; i < qubits.size(); ++i) total *= 4;
  for (std::size_t code = 1; code < total; ++code) {
    std::uint64_t x = 0, z = 0;
    std::size_t c = code;
    for (int q : qubits) {
      std::size_t letter = c & 3;  // 0=I 1=X 2=Y 3=Z
      c >>= 2;
      std::uint64_t bit = std::uint64_t{1} << q;
      if (letter == 1 || letter == 2) x |= bit;
      if (letter == 2 || letter == 3) z |= bit;
    }
    if (seen.insert({x, z}).second) {
      out.emplace_back(n, x, z);
      if (out.size() > cap)
        throw EnumerationBudgetExceeded("enumerate_local_paulis: budget cap exceeded");
    }
  }
}
}  // namespace detail

inline LocalPauliSet enumerate_local_paulis(const DualGraph& graph,
                                            const HamiltonianSpec& spec,
                                            int budget,
                                            std::size_t cap = 100000) {
  if (budget < 1) throw std::invalid_argument("enumerate_local_paulis: budget < 1");
  LocalPauliSet set;
  set.budget = budget;
  std::set<std::pair<std::uint64_t, std::uint64_t>> seen;
  for (const auto& subset : connected_subsets(graph, budget)) {
    std::uint64_t mask = 0;
    for (int a : subset) mask |= spec.terms[static_cast<std::size_t>(a)].support_mask();
    detail::paulis_on_mask(spec.n, mask, seen, set.members, cap);
  }
  std::sort(set.members.begin(), set.members.end());
  return set;
}

/// Ordered sequences (a_1, ..., a_l) of term indices such that
/// (root, E_{a_l}, ..., E_{a_1}) is a cluster: read left to right, each
/// element's support intersects the union of supports before it.
inline std::vector<std::vector<int>> enumerate_clusters(
    const DualGraph& graph, const HamiltonianSpec& spec,
    std::uint64_t root_support, int length, std::size_t cap = 1000000) {
  if (length < 1) throw std::invalid_argument("enumerate_clusters: length < 1");
  (void)graph;
  int m = spec.num_terms();
  std::vector<std::vector<int>> out;
  // Build back to front: pick a_l first (must intersect root support).
  std::vector<int> seq(static_cast<std::size_t>(length));
  std::function<void(int, std::uint64_t)> rec = [&](int pos, std::uint64_t mask) {
    if (pos < 0) {
      out.push_back(seq);
      if (out.size() > cap)
        throw EnumerationBudgetExceeded("enumerate_clusters: budget cap exceeded");
      return;
    }
    for (int a = 0; a < m; ++a) {
      std::uint64_t s = spec.terms[static_cast<std::size_t>(a)].support_mask();
      if (s & mask) {
        seq[static_cast<std::size_t>(pos)] = a;
        rec(pos - 1, mask | s);
      }
    }
  };
  rec(length - 1, root_support);
  return out;
}

/// [H_1, [H_2, ..., [H_l, A] ...]] via the cluster expansion: only
/// sequences forming a cluster with A contribute.  Each H_i must be a
/// combination of the spec's terms.
inline OperatorSum nested_commutator_expand(const DualGraph& graph,
                                            const HamiltonianSpec& spec,
                                            const std::vector<OperatorSum>& factors,
                                            const PauliString& a,
                                            std::size_t cap = 1000000) {
  int l = static_cast<int>(factors.size());
  OperatorSum result(spec.n);
  if (l == 0) {
    result.add(a, 1.0);
    return result;
  }
  for (const auto& h : factors)
    if (h.num_qubits() != spec.n)
      throw std::invalid_argument("nested_commutator_expand: dimension mismatch");
  for (const auto& seq : enumerate_clusters(graph, spec, a.support_mask(), l, cap)) {
    // seq = (a_1, ..., a_l); innermost commutator applies E_{a_l} to A.
    cplx coeff = 1.0;
    PauliString cur = a;
    bool dead = false;
    for (int j = l - 1; j >= 0 && !dead; --j) {
      int term = seq[static_cast<std::size_t>(j)];
      cplx lam = factors[static_cast<std::size_t>(j)].coeff(
          spec.terms[static_cast<std::size_t>(term)]);
      if (lam == cplx{0, 0}) { dead = true; break; }
      auto pc = pauli_commutator(spec.terms[static_cast<std::size_t>(term)], cur);
      if (!pc) { dead = true; break; }
      coeff *= lam * pc->first;
      cur = pc->second;
    }
    if (!dead) result.add(cur, coeff);
  }
  return result;
}

}  // namespace hamlearn
