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
#include <cmath>
#include <stdexcept>
#include <vector>

#include "hamlearn/pauli.hpp"

namespace hamlearn {

using DenseOperator = Eigen::MatrixXcd;

inline constexpr int kDenseMaxQubits = 12;

inline Eigen::Index dense_dim(int n) {
  if (n < 0 || n > kDenseMaxQubits)
    throw std::invalid_argument("dense: qubit count exceeds n_max");
  return Eigen::Index{1} << n;
}

/// Dense matrix of a canonical Pauli string times its phase.
/// Column j has a single entry at row j ^ x_mask with value
/// i^{phase_exp + |x&z|} (-1)^{|z & j|}.
inline DenseOperator to_dense(const PauliString& p) {
  Eigen::Index d = dense_dim(p.n);
  DenseOperator mat = DenseOperator::Zero(d, d);
  cplx base = PauliString(p.n, 0, 0,
                          p.phase_exp + std::popcount(p.x_mask & p.z_mask))
                  .phase_factor();
  for (Eigen::Index j = 0; j < d; ++j) {
    double sign = (std::popcount(p.z_mask & static_cast<std::uint64_t>(j)) & 1)
                      ? -1.0 : 1.0;
    mat(static_cast<Eigen::Index>(static_cast<std::uint64_t>(j) ^ p.x_mask), j) =
        base * sign;
  }
  return mat;
}

inline DenseOperator to_dense(const OperatorSum& o) {
  Eigen::Index d = dense_dim(o.num_qubits());
  DenseOperator mat = DenseOperator::Zero(d, d);
  for (const auto& [p, c] : o.terms()) {
    cplx base = c * PauliString(p.n, 0, 0, std::popcount(p.x_mask & p.z_mask))
                        .phase_factor();
    for (Eigen::Index j = 0; j < d; ++j) {
      double sign = (std::popcount(p.z_mask & static_cast<std::uint64_t>(j)) & 1)
                        ? -1.0 : 1.0;
      mat(static_cast<Eigen::Index>(static_cast<std::uint64_t>(j) ^ p.x_mask), j) +=
          base * sign;
    }
  }
  return mat;
}

/// tr(P rho) without materializing P.
inline cplx pauli_expectation(const PauliString& p, const DenseOperator& rho) {
  Eigen::Index d = rho.rows();
  cplx base = PauliString(p.n, 0, 0,
                          p.phase_exp + std::popcount(p.x_mask & p.z_mask))
                  .phase_factor();
  cplx acc = 0;
  for (Eigen::Index j = 0; j < d; ++j) {
    double sign = (std::popcount(p.z_mask & static_cast<std::uint64_t>(j)) & 1)
                      ? -1.0 : 1.0;
    acc += sign * rho(j, static_cast<Eigen::Index>(static_cast<std::uint64_t>(j) ^
                                                   p.x_mask));
  }
  return base * acc;
}

/// Gibbs state rho = exp(-beta H) / tr exp(-beta H) with the eigensystem
/// of H retained for downstream spectral work.
struct GibbsState {
  int n = 0;
  double beta = 0;
  DenseOperator rho;
  Eigen::VectorXd eigenvalues;       // of H, ascending
  DenseOperator eigenvectors;        // columns
  Eigen::VectorXd boltzmann;         // e^{-beta sigma_i} / Z, sums to 1
  double log_partition = 0;          // log tr e^{-beta H}
};

inline GibbsState gibbs_state(const HamiltonianSpec& spec) {
  spec.validate();
  GibbsState g;
  g.n = spec.n;
  g.beta = spec.beta;
  DenseOperator h = to_dense(spec.to_operator());
  Eigen::SelfAdjointEigenSolver<DenseOperator> es(h);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("gibbs_state: eigensolver failure");
  g.eigenvalues = es.eigenvalues();
  g.eigenvectors = es.eigenvectors();
  double emin = g.eigenvalues.minCoeff();
  Eigen::VectorXd w = (-spec.beta * (g.eigenvalues.array() - emin)).exp();
  double z = w.sum();
  g.boltzmann = w / z;
  g.log_partition = std::log(z) - spec.beta * emin;
  g.rho = g.eigenvectors * g.boltzmann.asDiagonal() *
          g.eigenvectors.adjoint();
  return g;
}

inline cplx expectation(const OperatorSum& o, const GibbsState& g) {
  cplx acc = 0;
  for (const auto& [p, c] : o.terms()) acc += c * pauli_expectation(p, g.rho);
  return acc;
}

inline cplx expectation(const PauliString& p, const GibbsState& g) {
  return pauli_expectation(p, g.rho);
}

inline cplx expectation(const DenseOperator& o, const GibbsState& g) {
  if (o.rows() != g.rho.rows())
    throw std::invalid_argument("expectation: dimension mismatch");
  return (o * g.rho).trace();
}

/// Spectral band profile of Corollary-style projector bounds:
/// ||Pi_{[sigma,inf)} A Pi_{(-inf,varsigma]}|| against
/// ||A|| exp(-(sigma - varsigma - 4R) / (4 g k)) with g = degree + 1.
struct AklPoint {
  double sigma = 0, varsigma = 0;
  double norm = 0, bound = 0;
};

struct AklReport {
  double r_constant = 0;
  double one_spin = 0;
  std::vector<AklPoint> points;
  bool all_within_bound = true;
};

inline AklReport akl_band_profile(const HamiltonianSpec& spec,
                                  const GibbsState& g, const PauliString& a,
                                  int grid_per_axis = 40) {
  AklReport report;
  DualGraph graph = build_dual_graph(spec);
  int k = spec.max_support();
  double one_spin = graph.max_degree + 1;
  // R: number of terms failing to commute with A; use the remark's two
  // cases, taking the conservative larger value when neither applies.
  bool inside_term = false;
  for (const auto& t : spec.terms)
    if ((a.support_mask() & ~t.support_mask()) == 0) inside_term = true;
  double r = inside_term ? (graph.max_degree + 1)
                         : static_cast<double>(a.support_size() * graph.max_degree);
  report.r_constant = r;
  report.one_spin = one_spin;

  DenseOperator a_tilde = g.eigenvectors.adjoint() * to_dense(a) * g.eigenvectors;
  double lo = g.eigenvalues.minCoeff(), hi = g.eigenvalues.maxCoeff();
  double a_norm = 1.0;  // Pauli strings are unitary
  for (int si = 0; si < grid_per_axis; ++si) {
    double sigma = lo + (hi - lo) * si / (grid_per_axis - 1);
    for (int vi = 0; vi < grid_per_axis; ++vi) {
      double varsigma = lo + (hi - lo) * vi / (grid_per_axis - 1);
      // Rows: eigenvalues >= sigma.  Cols: eigenvalues <= varsigma.
      std::vector<Eigen::Index> rows, cols;
      for (Eigen::Index i = 0; i < g.eigenvalues.size(); ++i) {
        if (g.eigenvalues(i) >= sigma) rows.push_back(i);
        if (g.eigenvalues(i) <= varsigma) cols.push_back(i);
      }
      AklPoint pt;
      pt.sigma = sigma;
      pt.varsigma = varsigma;
      pt.bound = a_norm * std::exp(-(sigma - varsigma - 4 * r) / (4 * one_spin * k));
      if (!rows.empty() && !cols.empty()) {
        DenseOperator sub(static_cast<Eigen::Index>(rows.size()),
                          static_cast<Eigen::Index>(cols.size()));
        for (std::size_t i = 0; i < rows.size(); ++i)
          for (std::size_t j = 0; j < cols.size(); ++j)
            sub(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                a_tilde(rows[i], cols[j]);
        if (sub.rows() == 1 || sub.cols() == 1) {
          pt.norm = sub.norm();
        } else {
          DenseOperator gram = sub.adjoint() * sub;
          Eigen::SelfAdjointEigenSolver<DenseOperator> es(gram,
                                                          Eigen::EigenvaluesOnly);
          pt.norm = std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
        }
      }
      if (pt.norm > pt.bound * (1 + 1e-9)) report.all_within_bound = false;
      report.points.push_back(pt);
    }
  }
  return report;
}

/// Both sides' data for the local-marginal variance probe.  The paper's
/// constants are unspecified, so this is reported, not asserted.
struct MarginalProbe {
  double lhs = 0;       // tr(A^2 rho)
  double rhs_data = 0;  // max_i tr(A_{(i)}^2) / d
};

inline MarginalProbe marginal_probe(const OperatorSum& a, const HamiltonianSpec& spec,
                                    const GibbsState& g) {
  if (!a.is_hermitian()) throw std::invalid_argument("marginal_probe: A not Hermitian");
  MarginalProbe probe;
  DenseOperator ad = to_dense(a);
  probe.lhs = std::real(((ad * ad) * g.rho).trace());
  double d = static_cast<double>(dense_dim(spec.n));
  for (int i = 0; i < spec.n; ++i) {
    OperatorSum loc = a.localize(i);
    // tr(P Q) = d * [P == Q] for canonical Paulis, so tr(A_{(i)}^2)/d is
    // the coefficient square sum.
    double sq = 0;
    for (const auto& [p, c] : loc.terms()) sq += std::norm(c);
    probe.rhs_data = std::max(probe.rhs_data, sq);
  }
  (void)d;
  return probe;
}

/// |tr(B q(-beta H | A) rho) - tr(A B rho)| through the eigenbasis route;
/// q is any pointwise-evaluable function.
template <typename Fn>
double feasibility_residual(const GibbsState& g, Fn&& q, const PauliString& a,
                            const PauliString& b) {
  Eigen::Index d = g.rho.rows();
  DenseOperator at = g.eigenvectors.adjoint() * to_dense(a) * g.eigenvectors;
  DenseOperator bt = g.eigenvectors.adjoint() * to_dense(b) * g.eigenvectors;
  // tr(B M rho) in the eigenbasis with rho diagonal, M = A o q(-beta (s_i - s_j)).
  cplx lhs = 0, rhs = 0;
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) {
      cplx m = at(i, j) * q(-g.beta * (g.eigenvalues(i) - g.eigenvalues(j)));
      lhs += bt(j, i) * m * g.boltzmann(j);
      rhs += bt(j, i) * at(i, j) * g.boltzmann(i);
    }
  return std::abs(lhs - rhs);
}

}  // namespace hamlearn
