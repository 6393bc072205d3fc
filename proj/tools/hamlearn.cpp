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

// Command-line front end: instance generation, measurement simulation,
// learning, polynomial verification, and diagnostics.  Every subcommand
// that writes an output file also writes `<output>.manifest.json` with the
// full configuration, so runs are reproducible bit for bit.

#include <chrono>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "hamlearn/dense.hpp"
#include "hamlearn/flat.hpp"
#include "hamlearn/io.hpp"
#include "hamlearn/learner.hpp"
#include "hamlearn/measurement.hpp"

namespace {

using hamlearn::json;

double now_seconds() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

void write_manifest(const std::string& out_path, const std::string& subcommand,
                    const json& config) {
  hamlearn::write_json_file(out_path + ".manifest.json",
                            hamlearn::make_manifest(subcommand, config));
}

void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << body;
}

hamlearn::HamiltonianSpec load_spec(const std::string& path) {
  return hamlearn::spec_from_json(hamlearn::read_json_file(path));
}

// ---------------------------------------------------------------------------
// gen

struct GenOpts {
  std::string model = "tfim";
  int n = 6;
  double beta = 1.0;
  double j = 1.0, h = 0.5;
  int k = 2, m = 0;
  std::uint64_t seed = 1;
  std::string out = "spec.json";
};

int run_gen(const GenOpts& o) {
  hamlearn::HamiltonianSpec spec;
  if (o.model == "tfim") {
    spec = hamlearn::gen_tfim(o.n, o.beta, o.j, o.h);
  } else if (o.model == "random-local") {
    int m = o.m > 0 ? o.m : 2 * o.n - 1;
    spec = hamlearn::gen_random_local(o.n, o.k, m, o.beta, o.seed);
  } else {
    throw CLI::ValidationError("--model", "unknown model " + o.model);
  }
  hamlearn::write_json_file(o.out, hamlearn::spec_to_json(spec));
  write_manifest(o.out, "gen",
                 json{{"model", o.model}, {"n", o.n}, {"beta", o.beta},
                      {"j", o.j}, {"h", o.h}, {"k", o.k}, {"m", o.m},
                      {"seed", o.seed}, {"out", o.out}});
  std::cout << "wrote " << o.out << " (" << spec.num_terms() << " terms, n="
            << spec.n << ", beta=" << spec.beta << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------
// Shared learner-shape options (decide which Paulis a table must cover).

struct ShapeOpts {
  double epsilon = 0.05;
  double epsilon0 = -1.0;
  int degree = 6;
  int radius_a = 3;
  int radius_b = 2;
  int relax_degree = 4;
  std::string backend = "cross-check";
  std::uint64_t seed = 1;
};

hamlearn::LearnConfig to_config(const ShapeOpts& s) {
  hamlearn::LearnConfig cfg;
  cfg.eps = s.epsilon;
  cfg.eps0 = s.epsilon0;
  cfg.degree_cap = s.degree;
  cfg.r_a = s.radius_a;
  cfg.r_b = s.radius_b;
  cfg.relax_degree = s.relax_degree;
  cfg.backend = s.backend;
  cfg.seed = s.seed;
  return cfg;
}

void add_shape_options(CLI::App* cmd, ShapeOpts& s, bool learner_flags) {
  cmd->add_option("--degree", s.degree, "cap on the surrogate degree D");
  cmd->add_option("--radius-a", s.radius_a,
                  "dual-graph radius of the commutator Pauli set");
  cmd->add_option("--radius-b", s.radius_b,
                  "dual-graph radius of the flat-constraint Pauli set");
  if (learner_flags) {
    cmd->add_option("--epsilon", s.epsilon, "flat-constraint tolerance");
    cmd->add_option("--epsilon0", s.epsilon0,
                    "commutator tolerance (negative: default by table mode)");
    cmd->add_option("--relaxation-degree", s.relax_degree,
                    "moment relaxation degree 2d");
    cmd->add_option("--backend", s.backend, "moment | direct | cross-check");
    cmd->add_option("--seed", s.seed, "solver multistart seed");
  }
}

std::vector<hamlearn::PauliString> table_targets(
    const hamlearn::HamiltonianSpec& spec, const ShapeOpts& shape) {
  hamlearn::LearnConfig cfg = to_config(shape);
  hamlearn::DualGraph graph = hamlearn::build_dual_graph(spec);
  hamlearn::UniPoly q = hamlearn::learner_poly(cfg, spec);
  return hamlearn::required_paulis(spec, graph, q, cfg);
}

// ---------------------------------------------------------------------------
// exact-expect

struct ExactExpectOpts {
  std::string hamiltonian;
  std::string out = "table.json";
  double epsilon0 = 0.0;
  ShapeOpts shape;
};

int run_exact_expect(const ExactExpectOpts& o) {
  hamlearn::HamiltonianSpec spec = load_spec(o.hamiltonian);
  hamlearn::GibbsState g = hamlearn::gibbs_state(spec);
  auto targets = table_targets(spec, o.shape);
  hamlearn::ExpectationTable table =
      hamlearn::build_expectation_table(g, targets, o.epsilon0);
  hamlearn::write_json_file(o.out, hamlearn::table_to_json(table));
  write_manifest(o.out, "exact-expect",
                 json{{"hamiltonian", o.hamiltonian}, {"out", o.out},
                      {"epsilon0", o.epsilon0}, {"degree", o.shape.degree},
                      {"radius_a", o.shape.radius_a},
                      {"radius_b", o.shape.radius_b}});
  std::cout << "wrote " << o.out << " (" << table.values.size()
            << " exact expectations)\n";
  return 0;
}

// ---------------------------------------------------------------------------
// sample

struct SampleOpts {
  std::string hamiltonian;
  std::string out = "shadows.jsonl";
  std::uint64_t n_shots = 100000;
  std::uint64_t seed = 1;
};

int run_sample(const SampleOpts& o) {
  hamlearn::HamiltonianSpec spec = load_spec(o.hamiltonian);
  hamlearn::GibbsState g = hamlearn::gibbs_state(spec);
  hamlearn::ShadowArchive archive =
      hamlearn::sample_shadows(g, o.n_shots, o.seed);
  std::ofstream os(o.out);
  if (!os) throw std::runtime_error("cannot open for writing: " + o.out);
  hamlearn::shadows_to_jsonl(archive, os);
  os.close();
  write_manifest(o.out, "sample",
                 json{{"hamiltonian", o.hamiltonian}, {"out", o.out},
                      {"n_shots", o.n_shots}, {"seed", o.seed}});
  std::cout << "wrote " << o.out << " (" << o.n_shots << " shots, "
            << archive.counts.size() << " distinct records)\n";
  return 0;
}

// ---------------------------------------------------------------------------
// learn

struct LearnOpts {
  std::string hamiltonian;
  std::string table;    // pre-built expectation table (JSON)
  std::string shadows;  // shadow archive (JSONL)
  std::uint64_t shots = 0;  // sample internally
  std::string out = "report.json";
  bool no_truth = false;
  ShapeOpts shape;
};

json report_to_json(const hamlearn::LearnReport& rep) {
  json j;
  j["format_version"] = hamlearn::kFormatVersion;
  j["lambda_hat"] = rep.lambda_hat;
  j["backend"] = rep.backend;
  j["eps_used"] = rep.eps_used;
  j["eps0_used"] = rep.eps0_used;
  j["escalations"] = rep.escalations;
  j["moment"] = json{{"converged", rep.moment_converged},
                     {"verified", rep.moment_verified},
                     {"iterations", rep.moment_iterations},
                     {"psd_residual", rep.psd_residual},
                     {"slab_residual", rep.slab_residual}};
  j["direct_violation"] = rep.direct_violation;
  j["clipping"] = rep.clipping;
  if (rep.backend_disagreement >= 0)
    j["backend_disagreement"] = rep.backend_disagreement;
  if (rep.max_error >= 0) j["max_error"] = rep.max_error;
  j["sizes"] = json{{"set_a", rep.set_a_size},
                    {"set_b", rep.set_b_size},
                    {"commutator_constraints", rep.num_commutator},
                    {"flat_constraints", rep.num_flat},
                    {"moments", rep.num_moments},
                    {"basis", rep.basis_size}};
  j["log"] = rep.log;
  return j;
}

int run_learn(const LearnOpts& o) {
  hamlearn::HamiltonianSpec spec = load_spec(o.hamiltonian);
  hamlearn::LearnConfig cfg = to_config(o.shape);

  hamlearn::ExpectationTable table;
  if (!o.table.empty()) {
    table = hamlearn::table_from_json(hamlearn::read_json_file(o.table));
  } else {
    auto targets = table_targets(spec, o.shape);
    if (!o.shadows.empty()) {
      std::ifstream is(o.shadows);
      if (!is) throw std::runtime_error("cannot open " + o.shadows);
      hamlearn::ShadowArchive archive =
          hamlearn::shadows_from_jsonl(is, spec.n);
      table = hamlearn::build_expectation_table(archive, targets,
                                                o.shape.epsilon);
    } else if (o.shots > 0) {
      hamlearn::GibbsState g = hamlearn::gibbs_state(spec);
      hamlearn::ShadowArchive archive =
          hamlearn::sample_shadows(g, o.shots, o.shape.seed);
      table = hamlearn::build_expectation_table(archive, targets,
                                                o.shape.epsilon);
    } else {
      hamlearn::GibbsState g = hamlearn::gibbs_state(spec);
      table = hamlearn::build_expectation_table(g, targets, 1e-12);
    }
  }

  const std::vector<double>* truth = o.no_truth ? nullptr : &spec.coeffs;
  hamlearn::LearnReport rep = hamlearn::learn(spec, table, cfg, truth);
  hamlearn::write_json_file(o.out, report_to_json(rep));
  write_manifest(o.out, "learn",
                 json{{"hamiltonian", o.hamiltonian}, {"table", o.table},
                      {"shadows", o.shadows}, {"shots", o.shots},
                      {"out", o.out}, {"epsilon", o.shape.epsilon},
                      {"epsilon0", o.shape.epsilon0},
                      {"degree", o.shape.degree},
                      {"radius_a", o.shape.radius_a},
                      {"radius_b", o.shape.radius_b},
                      {"relaxation_degree", o.shape.relax_degree},
                      {"backend", o.shape.backend}, {"seed", o.shape.seed},
                      {"no_truth", o.no_truth}});
  std::cout << "wrote " << o.out << "\n";
  std::cout << "lambda_hat:";
  for (double v : rep.lambda_hat) std::cout << " " << v;
  std::cout << "\n";
  if (rep.max_error >= 0) std::cout << "max_error: " << rep.max_error << "\n";
  if (rep.backend_disagreement >= 0)
    std::cout << "backend_disagreement: " << rep.backend_disagreement << "\n";
  for (const auto& line : rep.log) std::cout << "note: " << line << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// verify-poly

struct VerifyPolyOpts {
  double beta = 1.0;
  double eps = 0.01;
  double eta = 5.0 / 6.0;
  double kappa = 3.0;
  std::string out = "verify-poly.json";
  std::string csv;
};

int run_verify_poly(const VerifyPolyOpts& o) {
  hamlearn::FlatParams params =
      hamlearn::select_params(o.beta, o.eps, o.eta, o.kappa);
  hamlearn::FlatGrid grid;
  hamlearn::PointwiseQ q(params.k, params.l);
  hamlearn::FlatReport rep = hamlearn::verify_flat(q, params, grid);

  json j;
  j["format_version"] = hamlearn::kFormatVersion;
  j["params"] = json{{"k", params.k}, {"l", params.l},
                     {"kappa", params.kappa}, {"eta", params.eta},
                     {"eps", params.eps}, {"beta", o.beta}};
  j["grid"] = json{{"inside_points", grid.inside_points},
                   {"x_max", grid.x_max},
                   {"outside_points", grid.outside_points}};
  j["max_err_inside"] = rep.max_err_inside;
  j["max_ratio_outside"] = rep.max_ratio_outside;
  j["pass"] = rep.pass;
  hamlearn::write_json_file(o.out, j);
  write_manifest(o.out, "verify-poly",
                 json{{"beta", o.beta}, {"eps", o.eps}, {"eta", o.eta},
                      {"kappa", o.kappa}, {"out", o.out}, {"csv", o.csv}});

  if (!o.csv.empty()) {
    std::ostringstream cs;
    cs << "x,q,exp\n";
    q.reset_cache();
    for (int i = 0; i <= 400; ++i) {
      double x = -grid.x_max + 2 * grid.x_max * i / 400.0;
      cs << x << "," << q(x) << "," << std::exp(x) << "\n";
    }
    write_text_file(o.csv, cs.str());
  }
  std::cout << "k=" << params.k << " l=" << params.l
            << " max_err_inside=" << rep.max_err_inside
            << " max_ratio_outside=" << rep.max_ratio_outside
            << " pass=" << (rep.pass ? "yes" : "no") << "\n";
  return rep.pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// diagnose-akl

struct DiagnoseAklOpts {
  std::string hamiltonian;
  std::string observable;  // Pauli letters, e.g. "XIIIIIII"
  int grid = 40;
  std::string out = "akl.csv";
};

int run_diagnose_akl(const DiagnoseAklOpts& o) {
  hamlearn::HamiltonianSpec spec = load_spec(o.hamiltonian);
  std::string letters = o.observable;
  if (letters.empty()) {
    letters = "X" + std::string(static_cast<std::size_t>(spec.n - 1), 'I');
  }
  hamlearn::PauliString a = hamlearn::PauliString::from_letters(letters);
  hamlearn::GibbsState g = hamlearn::gibbs_state(spec);
  hamlearn::AklReport rep = hamlearn::akl_band_profile(spec, g, a, o.grid);

  std::ostringstream cs;
  cs << "sigma,varsigma,norm,bound\n";
  for (const auto& pt : rep.points)
    cs << pt.sigma << "," << pt.varsigma << "," << pt.norm << "," << pt.bound
       << "\n";
  write_text_file(o.out, cs.str());
  write_manifest(o.out, "diagnose-akl",
                 json{{"hamiltonian", o.hamiltonian},
                      {"observable", letters}, {"grid", o.grid},
                      {"out", o.out}});
  std::cout << "wrote " << o.out << " (" << rep.points.size()
            << " grid points, R=" << rep.r_constant << ", all_within_bound="
            << (rep.all_within_bound ? "yes" : "no") << ")\n";
  return rep.all_within_bound ? 0 : 1;
}

// ---------------------------------------------------------------------------
// bench

struct BenchOpts {
  int n = 6;
  double beta = 1.0;
  std::string out = "bench.csv";
};

int run_bench(const BenchOpts& o) {
  std::ostringstream cs;
  cs << "stage,seconds,size\n";
  auto stage = [&](const std::string& name, auto&& fn) {
    double t0 = now_seconds();
    std::size_t size = fn();
    cs << name << "," << (now_seconds() - t0) << "," << size << "\n";
  };

  hamlearn::HamiltonianSpec spec = hamlearn::gen_tfim(o.n, o.beta);
  hamlearn::GibbsState g = [&] {
    hamlearn::GibbsState out = hamlearn::gibbs_state(spec);
    return out;
  }();
  stage("gibbs_state", [&] {
    hamlearn::GibbsState tmp = hamlearn::gibbs_state(spec);
    return static_cast<std::size_t>(tmp.rho.rows());
  });

  hamlearn::LearnConfig cfg;
  hamlearn::DualGraph graph = hamlearn::build_dual_graph(spec);
  hamlearn::UniPoly q = hamlearn::learner_poly(cfg, spec);
  std::vector<hamlearn::PauliString> reqs;
  stage("required_paulis", [&] {
    reqs = hamlearn::required_paulis(spec, graph, q, cfg);
    return reqs.size();
  });
  hamlearn::ExpectationTable table;
  stage("exact_table", [&] {
    table = hamlearn::build_expectation_table(g, reqs, 1e-12);
    return table.values.size();
  });
  stage("sample_100k_shadows", [&] {
    hamlearn::ShadowArchive a = hamlearn::sample_shadows(g, 100000, 1);
    return a.counts.size();
  });
  cfg.eps0 = cfg.eps * cfg.eps /
             std::pow(static_cast<double>(spec.num_terms()), 3.0);
  hamlearn::ConstraintSystem sys;
  stage("build_constraints", [&] {
    sys = hamlearn::build_constraint_system(spec, graph, table, q, cfg);
    return sys.constraints.size();
  });
  std::vector<hamlearn::MultiPoly::Monomial> pool;
  stage("relevant_monomials", [&] {
    pool = hamlearn::relevant_monomials(
        graph, spec, std::max(1, q.degree()),
        std::max(cfg.relax_degree, q.degree() + 1));
    return pool.size();
  });
  hamlearn::MomentRelaxation rel;
  stage("assemble_relaxation", [&] {
    rel = hamlearn::assemble_moment_relaxation(sys, cfg.relax_degree, pool,
                                               cfg.loc_block_cap);
    return rel.moments.size();
  });
  stage("direct_solve_2_restarts", [&] {
    hamlearn::DirectSolution ds = hamlearn::direct_solve(sys, 2, cfg.seed);
    return ds.lambda_hat.size();
  });
  stage("moment_solve_2000_iters", [&] {
    hamlearn::RelaxationSolution sol =
        hamlearn::solve_relaxation(rel, cfg.tol, 2000);
    return static_cast<std::size_t>(sol.iterations);
  });

  write_text_file(o.out, cs.str());
  write_manifest(o.out, "bench",
                 json{{"n", o.n}, {"beta", o.beta}, {"out", o.out}});
  std::cout << "wrote " << o.out << "\n" << cs.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hamiltonian learning from Gibbs-state measurements"};
  app.require_subcommand(1);

  GenOpts gen;
  CLI::App* cgen = app.add_subcommand("gen", "generate a Hamiltonian instance");
  cgen->add_option("--model", gen.model, "tfim | random-local");
  cgen->add_option("--n", gen.n, "qubit count")->check(CLI::Range(1, 12));
  cgen->add_option("--beta", gen.beta, "inverse temperature");
  cgen->add_option("--coupling", gen.j, "tfim ZZ coupling");
  cgen->add_option("--field", gen.h, "tfim transverse field");
  cgen->add_option("--k", gen.k, "random-local term support");
  cgen->add_option("--m", gen.m, "random-local term count (0: 2n-1)");
  cgen->add_option("--seed", gen.seed, "random-local seed");
  cgen->add_option("--out", gen.out, "output spec JSON");

  ExactExpectOpts ee;
  CLI::App* cee = app.add_subcommand(
      "exact-expect", "exact expectation table for a learner run");
  cee->add_option("--hamiltonian", ee.hamiltonian, "spec JSON")->required();
  cee->add_option("--out", ee.out, "output table JSON");
  cee->add_option("--epsilon0", ee.epsilon0, "advertised accuracy metadata");
  add_shape_options(cee, ee.shape, /*learner_flags=*/false);

  SampleOpts sam;
  CLI::App* csam =
      app.add_subcommand("sample", "simulate randomized Pauli measurements");
  csam->add_option("--hamiltonian", sam.hamiltonian, "spec JSON")->required();
  csam->add_option("--n-shots", sam.n_shots, "number of samples")->required();
  csam->add_option("--seed", sam.seed, "sampling seed");
  csam->add_option("--out", sam.out, "output shadow JSONL");

  LearnOpts lrn;
  CLI::App* clrn =
      app.add_subcommand("learn", "learn coefficients from a table or shots");
  clrn->add_option("--hamiltonian", lrn.hamiltonian, "spec JSON")->required();
  clrn->add_option("--table", lrn.table, "expectation table JSON");
  clrn->add_option("--shadows", lrn.shadows, "shadow archive JSONL");
  clrn->add_option("--shots", lrn.shots,
                   "sample this many shots internally (0: exact table)");
  clrn->add_option("--out", lrn.out, "output report JSON");
  clrn->add_flag("--no-truth", lrn.no_truth,
                 "do not compare against the spec coefficients");
  add_shape_options(clrn, lrn.shape, /*learner_flags=*/true);

  VerifyPolyOpts vp;
  CLI::App* cvp = app.add_subcommand(
      "verify-poly", "verify the flat exponential approximation");
  cvp->add_option("--beta", vp.beta, "inverse temperature (metadata)");
  cvp->add_option("--eps", vp.eps, "target approximation error");
  cvp->add_option("--eta", vp.eta, "flatness slope in (0,1)");
  cvp->add_option("--kappa", vp.kappa, "approximation half-width >= 1");
  cvp->add_option("--out", vp.out, "output report JSON");
  cvp->add_option("--csv", vp.csv, "optional CSV of (x, q(x), e^x)");

  DiagnoseAklOpts akl;
  CLI::App* cakl = app.add_subcommand(
      "diagnose-akl", "off-band matrix-element decay profile");
  cakl->add_option("--hamiltonian", akl.hamiltonian, "spec JSON")->required();
  cakl->add_option("--observable", akl.observable,
                   "Pauli letters (default: X on qubit 0)");
  cakl->add_option("--grid", akl.grid, "grid points per spectral axis")
      ->check(CLI::Range(2, 200));
  cakl->add_option("--out", akl.out, "output CSV");

  BenchOpts bench;
  CLI::App* cbench = app.add_subcommand("bench", "stage timing benchmark");
  cbench->add_option("--n", bench.n, "qubit count")->check(CLI::Range(2, 12));
  cbench->add_option("--beta", bench.beta, "inverse temperature");
  cbench->add_option("--out", bench.out, "output CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (cgen->parsed()) return run_gen(gen);
    if (cee->parsed()) return run_exact_expect(ee);
    if (csam->parsed()) return run_sample(sam);
    if (clrn->parsed()) return run_learn(lrn);
    if (cvp->parsed()) return run_verify_poly(vp);
    if (cakl->parsed()) return run_diagnose_akl(akl);
    if (cbench->parsed()) return run_bench(bench);
  } catch (const std::exception& e) {
    std::cout << json{{"error", e.what()}}.dump() << "\n";
    return 1;
  }
  return 2;
}
