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
#include <Eigen/Sparse>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hamlearn/commutator.hpp"
#include "hamlearn/measurement.hpp"
#include "hamlearn/pauli.hpp"
#include "hamlearn/poly.hpp"

namespace hamlearn {

// ---------------------------------------------------------------------------
// Configuration.

struct LearnConfig {
  double eps = 0.05;        // flat-constraint tolerance
  double eps0 = -1.0;       // commutator tolerance; <0 -> default by mode
  int r_a = 3;              // graph radius for the commutator Pauli set A
  int r_b = 2;              // graph radius for the flat Pauli set B
  int degree_cap = 6;       // D: cap on deg(q)
  int relax_degree = 4;     // 2d: moment relaxation degree
  std::string backend = "cross-check";  // moment | direct | cross-check
  double tol = 1e-7;
  // Cyclic-projection budget for the moment solver.  Past ~10^4 sweeps the
  // rounded first moments are stationary even when the residual is still
  // creeping toward tol, so a larger budget only costs time.
  int max_iter = 12000;
  int restarts = 8;
  std::uint64_t seed = 1;
  std::size_t enum_cap = 200000;
  // Deterministic size caps (most-local constraints kept first).
  std::size_t max_commutator = 1000;
  std::size_t max_flat = 1000;
  std::size_t loc_block_cap = 300;  // commutator localizing matrices
  int max_eps_doublings = 3;
};

/// Degree-capped polynomial surrogate for e^x used by the flat
/// constraints, fitted in a weighted minimax sense on [-L, L] with
/// weight min(1, e^-x) * e^(-decay*|x|) and the exact interpolation
/// q(0) = 1.  The first factor mirrors the Boltzmann weight each error
/// term carries; the second reflects that local observables are banded
/// in energy, so matrix elements at gap argument x fall off
/// exponentially.  Plain series truncation at the same degree oscillates
/// by orders of magnitude over the reachable gap range and renders the
/// constraints useless; the fit keeps the weighted error small
/// everywhere the constraints have mass.  Fitting is a deterministic
/// Lawson-iterated least-squares in a Chebyshev basis.
inline UniPoly fit_weighted_exponential(int deg, double half_range,
                                        double decay, int grid = 1201,
                                        int lawson_iters = 80) {
  if (deg < 1) throw std::invalid_argument("fit_weighted_exponential: deg < 1");
  if (half_range <= 0)
    throw std::invalid_argument("fit_weighted_exponential: bad range");
  const double L = half_range;
  Eigen::VectorXd xs(grid), f(grid), v(grid);
  Eigen::VectorXd lawson = Eigen::VectorXd::Ones(grid);
  for (int i = 0; i < grid; ++i) {
    double x = -L + 2.0 * L * i / (grid - 1);
    xs[i] = x;
    f[i] = std::exp(x);
    v[i] = std::min(1.0, std::exp(-x)) * std::exp(-decay * std::abs(x));
  }
  // Basis phi_k(x) = T_k(x/L) - T_k(0), k = 1..deg, so q = 1 + sum c_k phi_k
  // satisfies q(0) = 1 exactly for any coefficient vector.
  auto chebyshev_at_zero = [](int k) {
    return (k % 2 == 1) ? 0.0 : ((k / 2) % 2 ? -1.0 : 1.0);
  };
  Eigen::MatrixXd phi(grid, deg);
  for (int i = 0; i < grid; ++i) {
    double t = xs[i] / L, tm1 = 1.0, t0 = t;
    for (int k = 1; k <= deg; ++k) {
      phi(i, k - 1) = t0 - chebyshev_at_zero(k);
      double t1 = 2 * t * t0 - tm1;
      tm1 = t0;
      t0 = t1;
    }
  }
  Eigen::VectorXd c;
  for (int it = 0; it < lawson_iters; ++it) {
    Eigen::VectorXd w = (lawson.array() * v.array() * v.array()).sqrt();
    Eigen::MatrixXd a = w.asDiagonal() * phi;
    Eigen::VectorXd b = w.asDiagonal() * (f.array() - 1.0).matrix();
    c = a.colPivHouseholderQr().solve(b);
    Eigen::VectorXd err =
        ((phi * c).array() + 1.0 - f.array()).abs() * v.array();
    lawson = (lawson.array() * err.array()).max(1e-300);
    lawson /= lawson.sum();
  }
  // Convert 1 + sum c_k (T_k(x/L) - T_k(0)) to monomial coefficients.
  std::vector<std::vector<double>> t(static_cast<std::size_t>(deg) + 1);
  t[0] = {1.0};
  t[1] = {0.0, 1.0 / L};
  for (int k = 2; k <= deg; ++k) {
    auto& tk = t[static_cast<std::size_t>(k)];
    tk.assign(static_cast<std::size_t>(k) + 1, 0.0);
    const auto& t1 = t[static_cast<std::size_t>(k) - 1];
    const auto& t2 = t[static_cast<std::size_t>(k) - 2];
    for (std::size_t j = 0; j < t1.size(); ++j) tk[j + 1] += 2.0 / L * t1[j];
    for (std::size_t j = 0; j < t2.size(); ++j) tk[j] -= t2[j];
  }
  std::vector<double> coeff(static_cast<std::size_t>(deg) + 1, 0.0);
  coeff[0] = 1.0;
  for (int k = 1; k <= deg; ++k) {
    coeff[0] -= c[k - 1] * chebyshev_at_zero(k);
    const auto& tk = t[static_cast<std::size_t>(k)];
    for (std::size_t j = 0; j < tk.size(); ++j) coeff[j] += c[k - 1] * tk[j];
  }
  UniPoly q;
  q.scaled.resize(static_cast<std::size_t>(deg) + 1);
  double fact = 1.0;
  for (int d = 0; d <= deg; ++d) {
    if (d > 0) fact *= d;
    q.scaled[static_cast<std::size_t>(d)] =
        coeff[static_cast<std::size_t>(d)] * fact;
  }
  return q;
}

/// Gap-argument decay rate for the fit weight, in units of the argument
/// of q.  Banding of local observables decays at an O(1) rate per unit
/// of energy; the argument is beta times an energy difference, so the
/// rate scales like 1/beta.
inline double learner_band_decay(double beta) {
  return 0.6 / std::max(beta, 1e-12);
}

/// The approximation polynomial used in the flat constraints: the
/// degree-D weighted fit of e^x over the a-priori reachable gap range
/// |x| <= 2*beta*m (every |lambda'_a| is at most 1).
inline UniPoly learner_poly(const LearnConfig& cfg,
                            const HamiltonianSpec& spec) {
  int deg = cfg.degree_cap;
  if (deg < 1) throw std::invalid_argument("learner_poly: degree < 1");
  double half_range =
      std::max(1.0, 2.0 * spec.beta * static_cast<double>(spec.num_terms()));
  return fit_weighted_exponential(deg, half_range,
                                  learner_band_decay(spec.beta));
}

// ---------------------------------------------------------------------------
// Constraint system.

struct Constraint {
  enum class Kind { BoxLower, BoxUpper, Commutator, Flat };
  Kind kind = Kind::Commutator;
  int var = -1;        // box constraints only
  double bound = 1.0;  // eps0 (commutator) or eps (flat)
  MultiPoly re, im;    // complex residual; g = bound^2 - re^2 - im^2
  std::string label;

  double eval(const std::vector<double>& lam) const {
    switch (kind) {
      case Kind::BoxLower:
        return 1.0 + lam[static_cast<std::size_t>(var)];
      case Kind::BoxUpper:
        return 1.0 - lam[static_cast<std::size_t>(var)];
      default: {
        double r = re.evaluate(lam), i = im.evaluate(lam);
        return bound * bound - r * r - i * i;
      }
    }
  }
};

struct ConstraintSystem {
  int m = 0;
  double beta = 0;
  UniPoly q;
  double eps = 0, eps0 = 0;
  std::vector<Constraint> constraints;
  // Raw set sizes before product-deduplication and locality caps.
  std::size_t set_a_size = 0, set_b_size = 0;
  std::size_t commutator_products = 0;  // distinct canonical products of A-pairs
  std::size_t num_box = 0, num_commutator = 0, num_flat = 0;
};

inline MultiPoly multipoly_derivative(const MultiPoly& p, int var) {
  MultiPoly d;
  for (const auto& [mono, c] : p.terms()) {
    int count = static_cast<int>(std::count(mono.begin(), mono.end(), var));
    if (count == 0) continue;
    MultiPoly::Monomial reduced = mono;
    reduced.erase(std::find(reduced.begin(), reduced.end(), var));
    d.add(std::move(reduced), c * count);
  }
  return d;
}

namespace detail {

/// Shared core for "which Paulis will be looked up" and "build the
/// system against a table".  `tr` maps a canonical Pauli to its table
/// value (recording implementations may return 0).
template <typename Lookup>
ConstraintSystem build_constraint_system_core(const HamiltonianSpec& spec,
                                              const DualGraph& graph,
                                              Lookup&& tr, const UniPoly& q,
                                              const LearnConfig& cfg,
                                              bool keep_zero_coeffs) {
  ConstraintSystem sys;
  sys.m = spec.num_terms();
  sys.beta = spec.beta;
  sys.q = q;
  sys.eps = cfg.eps;
  sys.eps0 = cfg.eps0;

  auto lookup = [&](const PauliString& p) -> double {
    if (p.is_identity()) return 1.0;
    return tr(p);
  };

  // Box rows.
  for (int a = 0; a < sys.m; ++a) {
    Constraint lo;
    lo.kind = Constraint::Kind::BoxLower;
    lo.var = a;
    lo.label = "box-lo-" + std::to_string(a);
    sys.constraints.push_back(std::move(lo));
    Constraint hi;
    hi.kind = Constraint::Kind::BoxUpper;
    hi.var = a;
    hi.label = "box-hi-" + std::to_string(a);
    sys.constraints.push_back(std::move(hi));
  }
  sys.num_box = 2 * static_cast<std::size_t>(sys.m);

  // Commutator constraints: for P = canon(A1 A2),
  //   tr([H', P] rho) = sum_a lam_a tr((P E_a - E_a P) rho)
  // and the Gibbs state gives 0 for the true H.  Distinct pairs sharing a
  // canonical product (they differ by a global phase) give one constraint.
  LocalPauliSet set_a = enumerate_local_paulis(graph, spec, cfg.r_a, cfg.enum_cap);
  sys.set_a_size = set_a.members.size();
  std::set<std::pair<std::uint64_t, std::uint64_t>> products;
  for (const auto& a1 : set_a.members)
    for (const auto& a2 : set_a.members) {
      auto [s, r] = pauli_multiply(a1, a2);
      (void)s;
      if (!r.is_identity()) products.insert({r.x_mask, r.z_mask});
    }
  sys.commutator_products = products.size();
  // Most-local products first; deterministic order.
  std::vector<PauliString> product_list;
  for (const auto& [x, z] : products) product_list.emplace_back(spec.n, x, z);
  std::stable_sort(product_list.begin(), product_list.end(),
                   [](const PauliString& a, const PauliString& b) {
                     return a.support_size() < b.support_size();
                   });
  std::size_t comm_seen = 0;
  for (const auto& p : product_list) {
    if (comm_seen++ >= cfg.max_commutator) break;
    Constraint c;
    c.kind = Constraint::Kind::Commutator;
    c.bound = cfg.eps0;
    c.label = "comm-" + p.to_letters();
    bool nonzero = false;
    for (int a = 0; a < sys.m; ++a) {
      const PauliString& e = spec.terms[static_cast<std::size_t>(a)];
      if (pauli_commutes(p, e)) continue;  // P E_a - E_a P = 0
      auto [s, r] = pauli_multiply(p, e);  // P E_a = i^s R
      cplx coeff = 2.0 * PauliString(spec.n, 0, 0, s).phase_factor() * lookup(r);
      if (coeff != cplx(0.0) || keep_zero_coeffs) {
        if (coeff.real() != 0.0) c.re.add({a}, coeff.real());
        if (coeff.imag() != 0.0) c.im.add({a}, coeff.imag());
        nonzero = nonzero || coeff != cplx(0.0);
      }
    }
    if (!nonzero && !keep_zero_coeffs) continue;
    sys.constraints.push_back(std::move(c));
    ++sys.num_commutator;
  }

  // Flat constraints: residual(lam) = ~tr(B2 q(-beta H'|B1) rho) - ~tr(B1 B2 rho).
  LocalPauliSet set_b = enumerate_local_paulis(graph, spec, cfg.r_b, cfg.enum_cap);
  sys.set_b_size = set_b.members.size();
  // Most-local pairs first: sort pair indices by support-union size.
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < static_cast<int>(set_b.members.size()); ++i)
    for (int j = 0; j < static_cast<int>(set_b.members.size()); ++j)
      pairs.emplace_back(i, j);
  std::stable_sort(pairs.begin(), pairs.end(),
                   [&](const std::pair<int, int>& a, const std::pair<int, int>& b) {
                     auto width = [&](const std::pair<int, int>& pr) {
                       return std::popcount(
                           set_b.members[static_cast<std::size_t>(pr.first)]
                               .support_mask() |
                           set_b.members[static_cast<std::size_t>(pr.second)]
                               .support_mask());
                     };
                     return width(a) < width(b);
                   });
  std::map<int, SymbolicOperatorPoly> expansions;
  std::size_t flat_seen = 0;
  for (const auto& [i1, i2] : pairs) {
    if (flat_seen++ >= cfg.max_flat) break;
    const PauliString& b1 = set_b.members[static_cast<std::size_t>(i1)];
    const PauliString& b2 = set_b.members[static_cast<std::size_t>(i2)];
    auto it = expansions.find(i1);
    if (it == expansions.end())
      it = expansions
               .emplace(i1, expand_poly_symbolic(q, spec.beta, spec, graph, b1,
                                                 cfg.enum_cap))
               .first;
    const SymbolicOperatorPoly& exp_b1 = it->second;
    Constraint c;
    c.kind = Constraint::Kind::Flat;
    c.bound = cfg.eps;
    c.label = "flat-" + b1.to_letters() + "-" + b2.to_letters();
    for (const auto& [p, polys] : exp_b1.entries) {
      auto [s, prod] = pauli_multiply(b2, p);  // B2 P = i^s Q
      cplx phase = PauliString(spec.n, 0, 0, s).phase_factor();
      double v = lookup(prod);
      cplx scale = phase * v;
      if (scale == cplx(0.0) && !keep_zero_coeffs) continue;
      // (re + i im) * scale contributes to both components.
      c.re.add(polys.first, scale.real());
      c.re.add(polys.second, -scale.imag());
      c.im.add(polys.first, scale.imag());
      c.im.add(polys.second, scale.real());
    }
    auto [s12, prod12] = pauli_multiply(b1, b2);
    cplx phase12 = PauliString(spec.n, 0, 0, s12).phase_factor();
    cplx sub = phase12 * lookup(prod12);
    if (sub.real() != 0.0) c.re.add(MultiPoly::Monomial{}, -sub.real());
    if (sub.imag() != 0.0) c.im.add(MultiPoly::Monomial{}, -sub.imag());
    if (c.re.is_zero() && c.im.is_zero() && !keep_zero_coeffs) continue;
    sys.constraints.push_back(std::move(c));
    ++sys.num_flat;
  }
  return sys;
}

}  // namespace detail

/// All canonical Paulis whose expectation the constraint builder will
/// request; feed this to build_expectation_table.
inline std::vector<PauliString> required_paulis(const HamiltonianSpec& spec,
                                                const DualGraph& graph,
                                                const UniPoly& q,
                                                const LearnConfig& cfg) {
  std::set<PauliString> seen;
  detail::build_constraint_system_core(
      spec, graph,
      [&](const PauliString& p) {
        seen.insert(p);
        return 0.0;
      },
      q, cfg, /*keep_zero_coeffs=*/true);
  return std::vector<PauliString>(seen.begin(), seen.end());
}

inline ConstraintSystem build_constraint_system(const HamiltonianSpec& spec,
                                                const DualGraph& graph,
                                                const ExpectationTable& table,
                                                const UniPoly& q,
                                                const LearnConfig& cfg) {
  return detail::build_constraint_system_core(
      spec, graph,
      [&](const PauliString& p) { return table.at(p); }, q, cfg,
      /*keep_zero_coeffs=*/false);
}

// ---------------------------------------------------------------------------
// Relevant monomials.

namespace detail {

/// Can the multiset be partitioned into at most `parts` groups, each of
/// size <= cap, each inducing a connected subgraph of the dual graph?
inline bool relevant_partition_exists(const std::vector<int>& mono,
                                      const DualGraph& graph, int cap,
                                      int parts) {
  int sz = static_cast<int>(mono.size());
  if (sz == 0) return true;
  std::vector<int> assign(static_cast<std::size_t>(sz), -1);
  std::function<bool(int)> rec = [&](int pos) -> bool {
    if (pos == sz) {
      // Check each used group: size <= cap and connected.
      for (int g = 0; g < parts; ++g) {
        std::vector<int> group;
        for (int i = 0; i < sz; ++i)
          if (assign[static_cast<std::size_t>(i)] == g)
            group.push_back(mono[static_cast<std::size_t>(i)]);
        if (group.empty()) continue;
        if (static_cast<int>(group.size()) > cap) return false;
        // Connectivity over distinct vertices.
        std::set<int> verts(group.begin(), group.end());
        std::set<int> reached{*verts.begin()};
        bool grew = true;
        while (grew) {
          grew = false;
          for (int v : verts)
            if (!reached.count(v))
              for (int u : reached)
                if (u == v ||
                    std::find(graph.adj[static_cast<std::size_t>(u)].begin(),
                              graph.adj[static_cast<std::size_t>(u)].end(),
                              v) != graph.adj[static_cast<std::size_t>(u)].end()) {
                  reached.insert(v);
                  grew = true;
                  break;
                }
        }
        if (reached.size() != verts.size()) return false;
      }
      return true;
    }
    // Symmetry reduction: element pos may open at most one new group.
    int max_used = -1;
    for (int i = 0; i < pos; ++i)
      max_used = std::max(max_used, assign[static_cast<std::size_t>(i)]);
    for (int g = 0; g <= std::min(parts - 1, max_used + 1); ++g) {
      assign[static_cast<std::size_t>(pos)] = g;
      if (rec(pos + 1)) return true;
    }
    assign[static_cast<std::size_t>(pos)] = -1;
    return false;
  };
  return rec(0);
}

}  // namespace detail

/// Monomials (as sorted term-index multisets) expressible as a union of
/// at most three cluster multisets of length <= C, up to total degree
/// max_degree.
inline std::vector<MultiPoly::Monomial> relevant_monomials(
    const DualGraph& graph, const HamiltonianSpec& spec, int C, int max_degree,
    std::size_t cap = 1000000) {
  if (C < 1) throw std::invalid_argument("relevant_monomials: C < 1");
  int m = spec.num_terms();
  std::vector<MultiPoly::Monomial> out;
  MultiPoly::Monomial cur;
  // Relevance is not monotone under adding elements, so enumerate all
  // multisets up to the degree cap and filter (degrees are small here).
  std::function<void(int, int)> enumerate = [&](int next, int remaining) {
    if (detail::relevant_partition_exists(cur, graph, C, 3)) {
      out.push_back(cur);
      if (out.size() > cap)
        throw EnumerationBudgetExceeded("relevant_monomials: cap exceeded");
    }
    if (remaining == 0) return;
    for (int a = next; a < m; ++a) {
      cur.push_back(a);
      enumerate(a, remaining - 1);
      cur.pop_back();
    }
  };
  enumerate(0, max_degree);
  return out;
}

// ---------------------------------------------------------------------------
// Moment relaxation.

struct MomentRelaxation {
  using Monomial = MultiPoly::Monomial;

  int m = 0;
  int relax_degree = 4;  // 2d
  std::vector<Monomial> moments;
  std::map<Monomial, int> index;
  std::vector<Monomial> basis;       // moment-matrix basis, degree <= d
  std::vector<Monomial> loc_basis;   // localizing basis, degree <= d-1
  int one_index = -1;
  std::vector<int> first_moment_index;  // per variable

  struct Block {
    std::string label;
    int size = 0;
    // entries[r*size + c]: sparse linear form sum coeff * y[idx].
    std::vector<std::vector<std::pair<int, double>>> entries;
  };
  std::vector<Block> blocks;

  struct Slab {
    std::string label;
    std::vector<std::pair<int, double>> form;
    double lo = 0, hi = 0;
  };
  std::vector<Slab> slabs;
};

namespace detail {

inline MultiPoly::Monomial mono_union(const MultiPoly::Monomial& a,
                                      const MultiPoly::Monomial& b) {
  MultiPoly::Monomial r;
  r.reserve(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(r));
  return r;
}

}  // namespace detail

/// Restrict the constraint system to moment variables over the supplied
/// monomial pool and emit PSD blocks plus linear slabs:
///  - the moment matrix over basis monomials of degree <= d,
///  - localizing matrices for box rows and (capped) commutator rows,
///  - linear cuts E[residual * w] in [-bound, bound] (valid because every
///    basis monomial w obeys |w| <= 1 on the box).
inline MomentRelaxation assemble_moment_relaxation(
    const ConstraintSystem& sys, int relax_degree,
    const std::vector<MultiPoly::Monomial>& pool, std::size_t loc_block_cap) {
  if (relax_degree < 2 || relax_degree % 2 != 0)
    throw std::invalid_argument("assemble_moment_relaxation: bad degree");
  MomentRelaxation rel;
  rel.m = sys.m;
  rel.relax_degree = relax_degree;
  int d = relax_degree / 2;
  for (const auto& w : pool) {
    if (static_cast<int>(w.size()) <= d) rel.basis.push_back(w);
    if (static_cast<int>(w.size()) <= d - 1) rel.loc_basis.push_back(w);
  }
  std::sort(rel.basis.begin(), rel.basis.end());
  std::sort(rel.loc_basis.begin(), rel.loc_basis.end());

  auto moment_id = [&](const MultiPoly::Monomial& w) {
    auto it = rel.index.find(w);
    if (it != rel.index.end()) return it->second;
    int id = static_cast<int>(rel.moments.size());
    rel.moments.push_back(w);
    rel.index.emplace(w, id);
    return id;
  };
  rel.one_index = moment_id({});
  rel.first_moment_index.resize(static_cast<std::size_t>(sys.m));
  for (int a = 0; a < sys.m; ++a)
    rel.first_moment_index[static_cast<std::size_t>(a)] = moment_id({a});

  auto poly_times_mono_form = [&](const MultiPoly& p,
                                  const MultiPoly::Monomial& w) {
    std::vector<std::pair<int, double>> form;
    for (const auto& [mono, c] : p.terms())
      form.emplace_back(moment_id(detail::mono_union(mono, w)), c);
    return form;
  };

  // Moment matrix.
  {
    MomentRelaxation::Block blk;
    blk.label = "moment";
    blk.size = static_cast<int>(rel.basis.size());
    blk.entries.resize(static_cast<std::size_t>(blk.size) *
                       static_cast<std::size_t>(blk.size));
    for (int i = 0; i < blk.size; ++i)
      for (int j = 0; j < blk.size; ++j)
        blk.entries[static_cast<std::size_t>(i * blk.size + j)] = {
            {moment_id(detail::mono_union(rel.basis[static_cast<std::size_t>(i)],
                                          rel.basis[static_cast<std::size_t>(j)])),
             1.0}};
    rel.blocks.push_back(std::move(blk));
  }

  std::size_t comm_loc_used = 0;
  for (const auto& c : sys.constraints) {
    switch (c.kind) {
      case Constraint::Kind::BoxLower:
      case Constraint::Kind::BoxUpper: {
        MomentRelaxation::Block blk;
        blk.label = c.label;
        blk.size = static_cast<int>(rel.loc_basis.size());
        blk.entries.resize(static_cast<std::size_t>(blk.size) *
                           static_cast<std::size_t>(blk.size));
        double sign = c.kind == Constraint::Kind::BoxLower ? 1.0 : -1.0;
        for (int i = 0; i < blk.size; ++i)
          for (int j = 0; j < blk.size; ++j) {
            auto uv = detail::mono_union(rel.loc_basis[static_cast<std::size_t>(i)],
                                         rel.loc_basis[static_cast<std::size_t>(j)]);
            MultiPoly::Monomial uva = uv;
            uva.insert(std::lower_bound(uva.begin(), uva.end(), c.var), c.var);
            blk.entries[static_cast<std::size_t>(i * blk.size + j)] = {
                {moment_id(uv), 1.0}, {moment_id(uva), sign}};
          }
        rel.blocks.push_back(std::move(blk));
        break;
      }
      case Constraint::Kind::Commutator: {
        // Linear cuts for every degree-<=1 monomial w.
        for (const MultiPoly* part : {&c.re, &c.im}) {
          if (part->is_zero()) continue;
          std::vector<MultiPoly::Monomial> ws;
          ws.push_back({});
          for (int a = 0; a < sys.m; ++a) ws.push_back({a});
          for (const auto& w : ws) {
            MomentRelaxation::Slab slab;
            slab.label = c.label + (part == &c.re ? "-re" : "-im");
            slab.form = poly_times_mono_form(*part, w);
            slab.lo = -c.bound;
            slab.hi = c.bound;
            rel.slabs.push_back(std::move(slab));
          }
        }
        // Full localizing matrix for the first few (most local) rows:
        // E[(eps0^2 - re^2 - im^2) u v] over the localizing basis.
        if (comm_loc_used < loc_block_cap) {
          ++comm_loc_used;
          MultiPoly rr = c.re.multiply(c.re);
          rr.add(c.im.multiply(c.im));
          MomentRelaxation::Block blk;
          blk.label = c.label;
          blk.size = static_cast<int>(rel.loc_basis.size());
          blk.entries.resize(static_cast<std::size_t>(blk.size) *
                             static_cast<std::size_t>(blk.size));
          for (int i = 0; i < blk.size; ++i)
            for (int j = 0; j < blk.size; ++j) {
              auto uv = detail::mono_union(
                  rel.loc_basis[static_cast<std::size_t>(i)],
                  rel.loc_basis[static_cast<std::size_t>(j)]);
              std::vector<std::pair<int, double>> form{
                  {moment_id(uv), c.bound * c.bound}};
              for (const auto& [mono, coeff] : rr.terms())
                form.emplace_back(moment_id(detail::mono_union(mono, uv)),
                                  -coeff);
              blk.entries[static_cast<std::size_t>(i * blk.size + j)] =
                  std::move(form);
            }
          rel.blocks.push_back(std::move(blk));
        }
        break;
      }
      case Constraint::Kind::Flat: {
        for (const MultiPoly* part : {&c.re, &c.im}) {
          if (part->is_zero()) continue;
          MomentRelaxation::Slab slab;
          slab.label = c.label + (part == &c.re ? "-re" : "-im");
          slab.form = poly_times_mono_form(*part, {});
          slab.lo = -c.bound;
          slab.hi = c.bound;
          rel.slabs.push_back(std::move(slab));
        }
        break;
      }
    }
  }
  return rel;
}

// ---------------------------------------------------------------------------
// Relaxation solver: cyclic projections on the product space
// (y, {Z_k}) between {Z_k PSD}, the affine linking set {Z_k = L_k(y),
// y_1 = 1}, and the slabs.

struct RelaxationSolution {
  bool converged = false;
  int iterations = 0;
  double psd_residual = 0;
  double slab_residual = 0;
  double link_residual = 0;
  std::vector<double> y;
};

/// Rank-one lift of a point: y[w] = prod_{a in w} lam_a for every tracked
/// moment monomial.  Used to warm-start the solver and in tests.
inline std::vector<double> lift_point(const MomentRelaxation& rel,
                                      const std::vector<double>& lam) {
  std::vector<double> y(rel.moments.size());
  for (std::size_t i = 0; i < rel.moments.size(); ++i) {
    double v = 1.0;
    for (int a : rel.moments[i]) v *= lam[static_cast<std::size_t>(a)];
    y[i] = v;
  }
  return y;
}

inline RelaxationSolution solve_relaxation(
    const MomentRelaxation& rel, double tol, int max_iter,
    const std::vector<double>* warm = nullptr) {
  int ny = static_cast<int>(rel.moments.size());
  using SpMat = Eigen::SparseMatrix<double>;

  // Normal matrix A = I + sum_k L_k^T L_k with the y_one coordinate
  // eliminated (it is pinned to 1).
  std::vector<Eigen::Triplet<double>> trips;
  Eigen::VectorXd fixed_rhs = Eigen::VectorXd::Zero(ny);
  for (int i = 0; i < ny; ++i) trips.emplace_back(i, i, 1.0);
  for (const auto& blk : rel.blocks)
    for (const auto& form : blk.entries)
      for (const auto& [i1, c1] : form)
        for (const auto& [i2, c2] : form) trips.emplace_back(i1, i2, c1 * c2);
  SpMat a(ny, ny);
  a.setFromTriplets(trips.begin(), trips.end());
  // Eliminate one_index: row/col handled by pinning during solves via a
  // large diagonal trick would hurt conditioning; instead solve the full
  // system with the one-column moved to the rhs.
  Eigen::VectorXd one_col = Eigen::VectorXd::Zero(ny);
  for (SpMat::InnerIterator it(a, rel.one_index); it; ++it)
    one_col(it.row()) = it.value();
  // Zero the pinned row/col and put 1 on the diagonal.
  std::vector<Eigen::Triplet<double>> trips2;
  for (int k = 0; k < a.outerSize(); ++k)
    for (SpMat::InnerIterator it(a, k); it; ++it) {
      if (it.row() == rel.one_index || it.col() == rel.one_index) continue;
      trips2.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                          it.value());
    }
  trips2.emplace_back(rel.one_index, rel.one_index, 1.0);
  SpMat a_red(ny, ny);
  a_red.setFromTriplets(trips2.begin(), trips2.end());
  Eigen::SimplicialLDLT<SpMat> solver(a_red);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("solve_relaxation: factorization failed");

  Eigen::VectorXd y = Eigen::VectorXd::Zero(ny);
  if (warm) {
    if (static_cast<int>(warm->size()) != ny)
      throw std::invalid_argument("solve_relaxation: warm-start size mismatch");
    y = Eigen::Map<const Eigen::VectorXd>(warm->data(), ny);
  }
  y(rel.one_index) = 1.0;
  std::vector<Eigen::MatrixXd> z;
  auto eval_block = [&](const MomentRelaxation::Block& blk) {
    Eigen::MatrixXd mat(blk.size, blk.size);
    for (int i = 0; i < blk.size; ++i)
      for (int j = 0; j < blk.size; ++j) {
        double v = 0;
        for (const auto& [idx, cc] :
             blk.entries[static_cast<std::size_t>(i * blk.size + j)])
          v += cc * y(idx);
        mat(i, j) = v;
      }
    return ((mat + mat.transpose()) / 2.0).eval();
  };
  for (const auto& blk : rel.blocks) z.push_back(eval_block(blk));

  RelaxationSolution sol;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  double stall_best = std::numeric_limits<double>::infinity();
  int stall_since = 0;
  for (int iter = 0; iter < max_iter; ++iter) {
    // 1. PSD projection of each Z.
    double psd_res = 0;
    for (auto& zk : z) {
      es.compute(zk);
      double min_eig = es.eigenvalues().minCoeff();
      psd_res = std::max(psd_res, std::max(0.0, -min_eig));
      if (min_eig < 0) {
        Eigen::VectorXd clipped = es.eigenvalues().cwiseMax(0.0);
        zk = es.eigenvectors() * clipped.asDiagonal() *
             es.eigenvectors().transpose();
      }
    }
    // 2. Affine link: min ||y - y0||^2 + sum ||L_k(y) - Z_k||^2, y_1 = 1.
    Eigen::VectorXd rhs = y;
    for (std::size_t k = 0; k < z.size(); ++k) {
      const auto& blk = rel.blocks[k];
      for (int i = 0; i < blk.size; ++i)
        for (int j = 0; j < blk.size; ++j) {
          double zv = z[k](i, j);
          for (const auto& [idx, cc] :
               blk.entries[static_cast<std::size_t>(i * blk.size + j)])
            rhs(idx) += cc * zv;
        }
    }
    // Move the pinned coordinate's coupling to the right-hand side.
    rhs -= one_col;
    rhs(rel.one_index) = 1.0;
    y = solver.solve(rhs);
    y(rel.one_index) = 1.0;
    for (std::size_t k = 0; k < z.size(); ++k) z[k] = eval_block(rel.blocks[k]);
    // 3. Slab projections on y.
    double slab_res = 0;
    for (const auto& slab : rel.slabs) {
      double v = 0, norm2 = 0;
      for (const auto& [idx, cc] : slab.form) {
        v += cc * y(idx);
        norm2 += cc * cc;
      }
      if (norm2 == 0) continue;
      double excess = 0;
      if (v > slab.hi)
        excess = v - slab.hi;
      else if (v < slab.lo)
        excess = v - slab.lo;
      slab_res = std::max(slab_res, std::abs(excess));
      if (excess != 0)
        for (const auto& [idx, cc] : slab.form) y(idx) -= cc * excess / norm2;
    }
    y(rel.one_index) = 1.0;
    sol.iterations = iter + 1;
    sol.psd_residual = psd_res;
    sol.slab_residual = slab_res;
    if (psd_res <= tol && slab_res <= tol) {
      sol.converged = true;
      break;
    }
    // Stall detection: an infeasible (or barely feasible) system leaves
    // the residual creeping far above tol; stop burning iterations once
    // progress has clearly plateaued and report non-convergence.
    double res = std::max(psd_res, slab_res);
    if (res < stall_best * 0.95) {
      stall_best = res;
      stall_since = iter;
    } else if (res > 100 * tol && iter - stall_since > 500) {
      break;
    }
  }
  sol.y.assign(y.data(), y.data() + ny);
  // Final link residual for the verifier.
  double link = 0;
  for (std::size_t k = 0; k < z.size(); ++k)
    link = std::max(link, (eval_block(rel.blocks[k]) - z[k]).norm());
  sol.link_residual = link;
  return sol;
}

/// Independent verifier: recompute every residual from the returned
/// moment vector at 10x the solver tolerance.
inline bool verify_relaxation_solution(const MomentRelaxation& rel,
                                       const RelaxationSolution& sol,
                                       double tol) {
  Eigen::Map<const Eigen::VectorXd> y(sol.y.data(),
                                      static_cast<Eigen::Index>(sol.y.size()));
  if (std::abs(y(rel.one_index) - 1.0) > 10 * tol) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  for (const auto& blk : rel.blocks) {
    Eigen::MatrixXd mat(blk.size, blk.size);
    for (int i = 0; i < blk.size; ++i)
      for (int j = 0; j < blk.size; ++j) {
        double v = 0;
        for (const auto& [idx, cc] :
             blk.entries[static_cast<std::size_t>(i * blk.size + j)])
          v += cc * y(idx);
        mat(i, j) = v;
      }
    es.compute((mat + mat.transpose()) / 2.0,
               Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -10 * tol) return false;
  }
  for (const auto& slab : rel.slabs) {
    double v = 0;
    for (const auto& [idx, cc] : slab.form) v += cc * y(idx);
    if (v > slab.hi + 10 * tol || v < slab.lo - 10 * tol) return false;
  }
  return true;
}

struct RoundedEstimate {
  std::vector<double> lambda_hat;
  double clipping = 0;  // total amount clipped to the box
};

inline RoundedEstimate round_estimate(const MomentRelaxation& rel,
                                      const RelaxationSolution& sol) {
  RoundedEstimate r;
  for (int a = 0; a < rel.m; ++a) {
    double v = sol.y[static_cast<std::size_t>(
        rel.first_moment_index[static_cast<std::size_t>(a)])];
    double clipped = std::clamp(v, -1.0, 1.0);
    r.clipping += std::abs(v - clipped);
    r.lambda_hat.push_back(clipped);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Direct penalty solver.

struct DirectSolution {
  std::vector<double> lambda_hat;
  double violation = 0;  // sum of squared hinge violations at the optimum
  int best_restart = -1;
  int iterations = 0;
};

inline DirectSolution direct_solve(const ConstraintSystem& sys, int restarts,
                                   std::uint64_t seed, double tol = 1e-9,
                                   int max_iter = 2000,
                                   const std::vector<double>* warm = nullptr) {
  int m = sys.m;
  // Compile non-box constraints into flat term arrays for fast repeated
  // evaluation (MultiPoly's map layout is too slow inside the descent
  // loop).  Gradients are recomputed per term from the monomial itself.
  struct Term {
    double coeff;
    std::vector<int> vars;  // sorted with multiplicity
  };
  struct Compiled {
    double bound;
    std::vector<Term> re, im;
  };
  auto compile = [](const MultiPoly& p) {
    std::vector<Term> out;
    out.reserve(p.terms().size());
    for (const auto& [mono, c] : p.terms()) out.push_back({c, mono});
    return out;
  };
  std::vector<Compiled> cons;
  for (const auto& c : sys.constraints) {
    if (c.kind == Constraint::Kind::BoxLower ||
        c.kind == Constraint::Kind::BoxUpper)
      continue;  // handled by projection
    cons.push_back({c.bound, compile(c.re), compile(c.im)});
  }
  auto eval_terms = [](const std::vector<Term>& ts,
                       const std::vector<double>& lam) {
    double v = 0;
    for (const auto& t : ts) {
      double p = t.coeff;
      for (int var : t.vars) p *= lam[static_cast<std::size_t>(var)];
      v += p;
    }
    return v;
  };
  // d(sum)/dlam_a accumulated into grad with prefactor `scale`.
  auto accum_grad_terms = [](const std::vector<Term>& ts,
                             const std::vector<double>& lam, double scale,
                             std::vector<double>& grad) {
    for (const auto& t : ts) {
      std::size_t len = t.vars.size();
      for (std::size_t k = 0; k < len; ++k) {
        if (k > 0 && t.vars[k] == t.vars[k - 1]) continue;  // distinct vars
        double p = t.coeff;
        int mult = 0;
        for (std::size_t j = 0; j < len; ++j) {
          if (t.vars[j] == t.vars[k]) {
            ++mult;
            if (j != k) p *= lam[static_cast<std::size_t>(t.vars[j])];
          } else {
            p *= lam[static_cast<std::size_t>(t.vars[j])];
          }
        }
        grad[static_cast<std::size_t>(t.vars[k])] += scale * p * mult;
      }
    }
  };
  auto objective = [&](const std::vector<double>& lam, std::vector<double>* grad) {
    double f = 0;
    if (grad) std::fill(grad->begin(), grad->end(), 0.0);
    for (const auto& c : cons) {
      double r = eval_terms(c.re, lam), i = eval_terms(c.im, lam);
      double g = c.bound * c.bound - r * r - i * i;
      if (g >= 0) continue;
      f += g * g;
      if (grad) {
        // d/dlam (g^2) = 2 g * (-2 r dr - 2 i di)
        accum_grad_terms(c.re, lam, -4.0 * g * r, *grad);
        accum_grad_terms(c.im, lam, -4.0 * g * i, *grad);
      }
    }
    return f;
  };

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  DirectSolution best;
  best.violation = std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < restarts; ++restart) {
    std::vector<double> lam(static_cast<std::size_t>(m), 0.0);
    if (restart == 0 && warm) lam = *warm;
    if (restart > 0)
      for (auto& v : lam) v = u(rng);
    std::vector<double> grad(static_cast<std::size_t>(m));
    double f = objective(lam, &grad);
    double step = 0.1;
    int it = 0;
    for (; it < max_iter && f > tol; ++it) {
      // Projected gradient with backtracking.
      std::vector<double> trial(static_cast<std::size_t>(m));
      double ft = f;
      for (int bt = 0; bt < 40; ++bt) {
        for (int a = 0; a < m; ++a)
          trial[static_cast<std::size_t>(a)] =
              std::clamp(lam[static_cast<std::size_t>(a)] -
                             step * grad[static_cast<std::size_t>(a)],
                         -1.0, 1.0);
        ft = objective(trial, nullptr);
        if (ft < f) break;
        step /= 2;
      }
      if (ft >= f) break;  // stalled
      lam = trial;
      f = objective(lam, &grad);
      step *= 1.5;
    }
    if (f < best.violation) {
      best.violation = f;
      best.lambda_hat = lam;
      best.best_restart = restart;
      best.iterations = it;
    }
    if (best.violation <= tol && restart >= 0) break;
  }
  return best;
}

// ---------------------------------------------------------------------------
// End-to-end pipeline.

struct LearnReport {
  std::vector<double> lambda_hat;
  std::string backend;
  double eps_used = 0, eps0_used = 0;
  int escalations = 0;
  bool moment_converged = false;
  bool moment_verified = false;
  int moment_iterations = 0;
  double psd_residual = 0, slab_residual = 0;
  double direct_violation = -1;
  double clipping = 0;
  double backend_disagreement = -1;
  double max_error = -1;  // vs provided ground truth
  std::size_t set_a_size = 0, set_b_size = 0;
  std::size_t num_commutator = 0, num_flat = 0;
  std::size_t num_moments = 0, basis_size = 0;
  std::vector<std::string> log;
};

inline LearnReport learn(const HamiltonianSpec& spec,
                         const ExpectationTable& table, LearnConfig cfg,
                         const std::vector<double>* truth = nullptr) {
  if (cfg.backend != "moment" && cfg.backend != "direct" &&
      cfg.backend != "cross-check")
    throw std::invalid_argument("learn: unknown backend " + cfg.backend);
  DualGraph graph = build_dual_graph(spec);
  UniPoly q = learner_poly(cfg, spec);
  int m = spec.num_terms();
  if (cfg.eps0 < 0) {
    cfg.eps0 = table.mode == "exact"
                   ? cfg.eps * cfg.eps / (static_cast<double>(m) * m * m)
                   : cfg.eps;
  }
  LearnReport rep;
  rep.backend = cfg.backend;

  auto seconds_since = [](std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  };
  auto log_stage = [&](const std::string& name, double secs) {
    std::ostringstream os;
    os << name << " took " << secs << "s";
    rep.log.push_back(os.str());
  };

  // The constraint system is built once; escalation only loosens the
  // per-constraint bounds, so the expensive symbolic expansions are not
  // recomputed.
  auto t_build = std::chrono::steady_clock::now();
  ConstraintSystem sys = build_constraint_system(spec, graph, table, q, cfg);
  log_stage("build_constraint_system", seconds_since(t_build));
  rep.set_a_size = sys.set_a_size;
  rep.set_b_size = sys.set_b_size;
  rep.num_commutator = sys.num_commutator;
  rep.num_flat = sys.num_flat;
  std::vector<MultiPoly::Monomial> pool;
  if (cfg.backend != "direct")
    pool = relevant_monomials(graph, spec, std::max(1, q.degree()),
                              std::max(cfg.relax_degree, q.degree() + 1),
                              cfg.enum_cap * 10);

  std::vector<double> direct_warm;
  for (int attempt = 0; attempt <= cfg.max_eps_doublings; ++attempt) {
    if (attempt > 0) {
      // Only the flat-approximation tolerance is doubled: the surrogate's
      // residual at the true coefficients is what makes the system
      // infeasible, while the commutator rows stay accurate (they are
      // exact up to table noise) and carry most of the identifiability.
      cfg.eps *= 2;
      sys.eps = cfg.eps;
      for (auto& c : sys.constraints)
        if (c.kind == Constraint::Kind::Flat) c.bound *= 2;
      ++rep.escalations;
      rep.log.push_back("escalated eps to " + std::to_string(cfg.eps));
    }
    rep.eps_used = cfg.eps;
    rep.eps0_used = cfg.eps0;

    std::vector<double> moment_hat, direct_hat;
    bool moment_ok = true, direct_ok = true;
    bool last_attempt = attempt == cfg.max_eps_doublings;

    // Direct backend first: its solution seeds the moment solver in
    // cross-check mode and the next escalation attempt.
    if (cfg.backend != "moment") {
      // Full multistart on the first attempt; escalation re-solves start
      // from the previous optimum, so a couple of restarts suffice.
      int restarts =
          direct_warm.empty() ? cfg.restarts : std::min(cfg.restarts, 2);
      auto t_direct = std::chrono::steady_clock::now();
      DirectSolution ds =
          direct_solve(sys, restarts, cfg.seed, 1e-9, 2000,
                       direct_warm.empty() ? nullptr : &direct_warm);
      if (ds.violation > 1e-9 && restarts < cfg.restarts &&
          attempt == cfg.max_eps_doublings) {
        // The warm start can sit in a basin the loosened bounds cannot
        // rescue; on the final attempt fall back to a cold multistart
        // before settling for the best infeasible point.
        DirectSolution cold = direct_solve(
            sys, std::min(cfg.restarts, 4),
            cfg.seed + static_cast<std::uint64_t>(attempt), 1e-9, 2000);
        if (cold.violation < ds.violation) ds = cold;
      }
      rep.direct_violation = ds.violation;
      direct_hat = ds.lambda_hat;
      direct_warm = ds.lambda_hat;
      direct_ok = ds.violation <= 1e-9;
      log_stage("direct_solve attempt " + std::to_string(attempt),
                seconds_since(t_direct));
    }
    // In cross-check mode the direct result is a cheap infeasibility
    // probe: only run the expensive relaxation once it reports a feasible
    // point (or there is no further escalation to try).
    bool want_moment =
        cfg.backend == "moment" ||
        (cfg.backend == "cross-check" && (direct_ok || last_attempt));
    if (want_moment) {
      auto t_moment = std::chrono::steady_clock::now();
      MomentRelaxation rel = assemble_moment_relaxation(
          sys, cfg.relax_degree, pool, cfg.loc_block_cap);
      rep.num_moments = rel.moments.size();
      rep.basis_size = rel.basis.size();
      std::vector<double> y0;
      if (!direct_hat.empty()) y0 = lift_point(rel, direct_hat);
      RelaxationSolution sol = solve_relaxation(rel, cfg.tol, cfg.max_iter,
                                                y0.empty() ? nullptr : &y0);
      rep.moment_converged = sol.converged;
      rep.moment_iterations = sol.iterations;
      rep.psd_residual = sol.psd_residual;
      rep.slab_residual = sol.slab_residual;
      rep.moment_verified = verify_relaxation_solution(rel, sol, cfg.tol);
      RoundedEstimate rounded = round_estimate(rel, sol);
      rep.clipping = rounded.clipping;
      moment_hat = rounded.lambda_hat;
      moment_ok = sol.converged;
      log_stage("moment attempt " + std::to_string(attempt),
                seconds_since(t_moment));
    }

    bool ok = (cfg.backend == "moment" && moment_ok) ||
              (cfg.backend == "direct" && direct_ok) ||
              (cfg.backend == "cross-check" && moment_ok && direct_ok &&
               want_moment);
    if (!ok && !last_attempt) continue;

    if (cfg.backend == "moment") {
      rep.lambda_hat = moment_hat;
    } else if (cfg.backend == "direct") {
      rep.lambda_hat = direct_hat;
    } else {
      double dis = 0;
      for (int a = 0; a < m; ++a)
        dis = std::max(dis, std::abs(moment_hat[static_cast<std::size_t>(a)] -
                                     direct_hat[static_cast<std::size_t>(a)]));
      rep.backend_disagreement = dis;
      rep.lambda_hat = moment_hat;
    }
    break;
  }

  if (truth) {
    double err = 0;
    for (int a = 0; a < m; ++a)
      err = std::max(err, std::abs(rep.lambda_hat[static_cast<std::size_t>(a)] -
                                   (*truth)[static_cast<std::size_t>(a)]));
    rep.max_error = err;
  }
  return rep;
}

}  // namespace hamlearn
