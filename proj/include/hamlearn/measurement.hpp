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
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "hamlearn/dense.hpp"
#include "hamlearn/pauli.hpp"

namespace hamlearn {

/// Random-Pauli-basis measurement records, compressed to counts per
/// distinct (basis, outcome) pair.  Basis strings use letters X/Y/Z with
/// qubit 0 first; outcome bit q is 1 iff qubit q gave the -1 eigenvalue.
struct ShadowArchive {
  int n = 0;
  std::uint64_t total = 0;
  std::uint64_t seed = 0;
  std::map<std::pair<std::string, std::uint64_t>, std::uint64_t> counts;

  void add(const std::string& basis, std::uint64_t outcome,
           std::uint64_t count = 1) {
    if (static_cast<int>(basis.size()) != n)
      throw std::invalid_argument("ShadowArchive::add: basis length mismatch");
    counts[{basis, outcome}] += count;
    total += count;
  }
};

namespace detail {

/// Single-qubit unitary taking the measured basis' eigenbasis to the
/// computational basis (+1 eigenstate -> |0>).
inline Eigen::Matrix2cd basis_rotation(char letter) {
  const double s = 1.0 / std::sqrt(2.0);
  Eigen::Matrix2cd u;
  switch (letter) {
    case 'Z':
      u.setIdentity();
      break;
    case 'X':
      u << s, s, s, -s;
      break;
    case 'Y':
      u << s, cplx(0, -s), s, cplx(0, s);
      break;
    default:
      throw std::invalid_argument("basis_rotation: invalid basis letter");
  }
  return u;
}

/// Outcome distribution for measuring every qubit in the given basis:
/// the diagonal of R rho R^dag with R the tensor product of rotations
/// (qubit 0 = fastest index).
inline std::vector<double> outcome_distribution(const DenseOperator& rho,
                                                const std::string& basis) {
  int n = static_cast<int>(basis.size());
  Eigen::Index dim = Eigen::Index{1} << n;
  if (rho.rows() != dim)
    throw std::invalid_argument("outcome_distribution: dimension mismatch");
  DenseOperator r = DenseOperator::Ones(1, 1);
  for (int q = 0; q < n; ++q) {
    Eigen::Matrix2cd u = basis_rotation(basis[static_cast<std::size_t>(q)]);
    DenseOperator next(2 * r.rows(), 2 * r.cols());
    for (int bi = 0; bi < 2; ++bi)
      for (int bj = 0; bj < 2; ++bj)
        next.block(bi * r.rows(), bj * r.cols(), r.rows(), r.cols()) =
            u(bi, bj) * r;
    r = std::move(next);
  }
  // High bit of the block index is the last qubit, matching bit q of the
  // outcome word.
  DenseOperator m = r * rho;
  std::vector<double> p(static_cast<std::size_t>(dim));
  double sum = 0;
  for (Eigen::Index j = 0; j < dim; ++j) {
    cplx v = (m.row(j) * r.row(j).adjoint())(0, 0);
    p[static_cast<std::size_t>(j)] = std::max(0.0, v.real());
    sum += p[static_cast<std::size_t>(j)];
  }
  for (auto& v : p) v /= sum;
  return p;
}

}  // namespace detail

/// Draw `num` uniformly-random-basis measurements of rho.  Deterministic
/// for a fixed seed.  Outcome CDFs are cached per basis (bounded cache;
/// beyond the bound distributions are recomputed on the fly).
inline ShadowArchive sample_shadows(const GibbsState& g, std::uint64_t num,
                                    std::uint64_t seed,
                                    std::size_t cdf_cache_cap = 4096) {
  ShadowArchive archive;
  archive.n = g.n;
  archive.seed = seed;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, 2);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  static constexpr char kLetters[3] = {'X', 'Y', 'Z'};

  // For very large draws over an enumerable basis set, sampling the
  // aggregated counts directly (sequential binomial splits of the
  // multinomial) is statistically identical to the per-sample loop and
  // costs O(3^n * 2^n) instead of O(num).
  double num_bases = std::pow(3.0, g.n);
  if (num >= 4000000 &&
      num_bases <= static_cast<double>(cdf_cache_cap)) {
    std::string basis(static_cast<std::size_t>(g.n), 'Z');
    std::uint64_t remaining = num;
    double remaining_prob = 1.0;
    std::uint64_t total_bases = static_cast<std::uint64_t>(num_bases);
    for (std::uint64_t bi = 0; bi < total_bases && remaining > 0; ++bi) {
      std::uint64_t code = bi;
      for (int q = 0; q < g.n; ++q) {
        basis[static_cast<std::size_t>(q)] = kLetters[code % 3];
        code /= 3;
      }
      double p_basis = 1.0 / num_bases;
      std::uint64_t in_basis;
      if (bi + 1 == total_bases) {
        in_basis = remaining;
      } else {
        double p = std::clamp(p_basis / remaining_prob, 0.0, 1.0);
        std::binomial_distribution<std::uint64_t> bin(remaining, p);
        in_basis = bin(rng);
      }
      remaining -= in_basis;
      remaining_prob -= p_basis;
      if (in_basis == 0) continue;
      std::vector<double> prob = detail::outcome_distribution(g.rho, basis);
      std::uint64_t left = in_basis;
      double mass = 1.0;
      for (std::size_t o = 0; o < prob.size() && left > 0; ++o) {
        std::uint64_t cnt;
        if (o + 1 == prob.size()) {
          cnt = left;
        } else {
          double p = std::clamp(prob[o] / std::max(mass, 1e-300), 0.0, 1.0);
          std::binomial_distribution<std::uint64_t> bin(left, p);
          cnt = bin(rng);
        }
        left -= cnt;
        mass -= prob[o];
        if (cnt > 0) archive.add(basis, static_cast<std::uint64_t>(o), cnt);
      }
    }
    return archive;
  }
  std::map<std::string, std::vector<double>> cdf_cache;
  std::string basis(static_cast<std::size_t>(g.n), 'Z');
  for (std::uint64_t s = 0; s < num; ++s) {
    for (int q = 0; q < g.n; ++q)
      basis[static_cast<std::size_t>(q)] = kLetters[pick(rng)];
    const std::vector<double>* cdf = nullptr;
    std::vector<double> scratch;
    auto it = cdf_cache.find(basis);
    if (it != cdf_cache.end()) {
      cdf = &it->second;
    } else {
      std::vector<double> p = detail::outcome_distribution(g.rho, basis);
      std::partial_sum(p.begin(), p.end(), p.begin());
      p.back() = 1.0;
      if (cdf_cache.size() < cdf_cache_cap) {
        cdf = &cdf_cache.emplace(basis, std::move(p)).first->second;
      } else {
        scratch = std::move(p);
        cdf = &scratch;
      }
    }
    double u = unit(rng);
    auto pos = std::lower_bound(cdf->begin(), cdf->end(), u);
    std::uint64_t outcome =
        static_cast<std::uint64_t>(std::distance(cdf->begin(), pos));
    archive.add(basis, outcome);
  }
  return archive;
}

struct PauliEstimate {
  double value = 0;
  std::uint64_t matched = 0;
  bool insufficient_data = false;
};

/// Estimate tr(P rho) as the mean measured parity over samples whose
/// basis letters agree with P on its support.  The identity estimate is
/// exactly 1.  If no sample matches, insufficient_data is set.
inline PauliEstimate estimate_pauli(const ShadowArchive& archive,
                                    const PauliString& p) {
  if (p.n != archive.n)
    throw std::invalid_argument("estimate_pauli: qubit count mismatch");
  if (!p.is_canonical())
    throw std::invalid_argument("estimate_pauli: Pauli must be canonical");
  PauliEstimate est;
  if (p.is_identity()) {
    est.value = 1.0;
    est.matched = archive.total;
    est.insufficient_data = archive.total == 0;
    return est;
  }
  std::string letters = p.to_letters();
  std::uint64_t support = p.support_mask();
  double acc = 0;
  for (const auto& [key, count] : archive.counts) {
    const std::string& basis = key.first;
    bool match = true;
    for (int q = 0; q < archive.n; ++q) {
      if (!((support >> q) & 1)) continue;
      if (basis[static_cast<std::size_t>(q)] !=
          letters[static_cast<std::size_t>(q)]) {
        match = false;
        break;
      }
    }
    if (!match) continue;
    int parity = std::popcount(key.second & support) & 1;
    acc += (parity ? -1.0 : 1.0) * static_cast<double>(count);
    est.matched += count;
  }
  if (est.matched == 0) {
    est.insufficient_data = true;
    return est;
  }
  est.value = acc / static_cast<double>(est.matched);
  return est;
}

/// Expectation values tr(P rho) for a fixed Pauli collection, plus the
/// accuracy metadata downstream constraint assembly needs.
struct ExpectationTable {
  struct Entry {
    double value = 0;
    std::uint64_t matched = 0;  // samples used; 0 in exact mode
  };

  int n = 0;
  std::string mode;       // "exact" or "sampled"
  double epsilon0 = 0;    // per-entry accuracy budget
  std::uint64_t shots = 0;  // 0 for exact tables
  std::map<PauliString, Entry> values;

  bool contains(const PauliString& p) const {
    return values.count(p.canonical()) != 0;
  }
  const Entry& entry(const PauliString& p) const {
    auto it = values.find(p.canonical());
    if (it == values.end())
      throw std::out_of_range("ExpectationTable: Pauli not present");
    return it->second;
  }
  double at(const PauliString& p) const { return entry(p).value; }
};

inline ExpectationTable build_expectation_table(
    const GibbsState& g, const std::vector<PauliString>& paulis,
    double epsilon0 = 0.0) {
  ExpectationTable table;
  table.n = g.n;
  table.mode = "exact";
  table.epsilon0 = epsilon0;
  for (const auto& p : paulis)
    table.values[p.canonical()] = {pauli_expectation(p.canonical(), g.rho).real(),
                                   0};
  return table;
}

inline ExpectationTable build_expectation_table(
    const ShadowArchive& archive, const std::vector<PauliString>& paulis,
    double epsilon0) {
  ExpectationTable table;
  table.n = archive.n;
  table.mode = "sampled";
  table.epsilon0 = epsilon0;
  table.shots = archive.total;
  for (const auto& p : paulis) {
    PauliEstimate est = estimate_pauli(archive, p.canonical());
    if (est.insufficient_data)
      throw std::runtime_error("build_expectation_table: no samples match " +
                               p.to_letters());
    table.values[p.canonical()] = {est.value, est.matched};
  }
  return table;
}

/// Shot count for which mean parities are within eps of truth with
/// probability 1 - delta simultaneously over a collection of set_size
/// Paulis of weight at most w (Hoeffding + a 3^w basis-match factor).
inline std::uint64_t shadow_sample_budget(int w, double eps, double delta,
                                          double set_size) {
  double per = 2.0 * std::pow(3.0, w) / (eps * eps) *
               std::log(2.0 * std::max(1.0, set_size) / delta);
  return static_cast<std::uint64_t>(std::ceil(per));
}

}  // namespace hamlearn
