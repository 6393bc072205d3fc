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

#include <cstdint>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hamlearn/measurement.hpp"
#include "hamlearn/pauli.hpp"

namespace hamlearn {

inline constexpr int kFormatVersion = 1;

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// HamiltonianSpec JSON: {"format_version", "n", "beta", "terms": [{"pauli","coeff"}]}

inline json spec_to_json(const HamiltonianSpec& spec) {
  json terms = json::array();
  for (std::size_t a = 0; a < spec.terms.size(); ++a)
    terms.push_back({{"pauli", spec.terms[a].to_letters()},
                     {"coeff", spec.coeffs[a]}});
  return json{{"format_version", kFormatVersion},
              {"n", spec.n},
              {"beta", spec.beta},
              {"terms", std::move(terms)}};
}

inline HamiltonianSpec spec_from_json(const json& j) {
  HamiltonianSpec spec;
  spec.n = j.at("n").get<int>();
  spec.beta = j.at("beta").get<double>();
  for (const auto& t : j.at("terms")) {
    PauliString p = PauliString::from_letters(t.at("pauli").get<std::string>());
    if (p.n != spec.n)
      throw std::invalid_argument("spec_from_json: term length != n");
    spec.terms.push_back(p);
    spec.coeffs.push_back(t.at("coeff").get<double>());
  }
  spec.validate();
  return spec;
}

// ---------------------------------------------------------------------------
// ExpectationTable JSON.

inline json table_to_json(const ExpectationTable& t) {
  json entries = json::array();
  for (const auto& [p, e] : t.values)
    entries.push_back({{"pauli", p.to_letters()},
                       {"value", e.value},
                       {"matched", e.matched}});
  return json{{"format_version", kFormatVersion},
              {"n", t.n},
              {"mode", t.mode},
              {"epsilon0", t.epsilon0},
              {"shots", t.shots},
              {"entries", std::move(entries)}};
}

inline ExpectationTable table_from_json(const json& j) {
  ExpectationTable t;
  t.n = j.at("n").get<int>();
  t.mode = j.at("mode").get<std::string>();
  t.epsilon0 = j.at("epsilon0").get<double>();
  t.shots = j.at("shots").get<std::uint64_t>();
  for (const auto& e : j.at("entries")) {
    PauliString p = PauliString::from_letters(e.at("pauli").get<std::string>());
    ExpectationTable::Entry entry;
    entry.value = e.at("value").get<double>();
    entry.matched = e.value("matched", std::uint64_t{0});
    t.values[p] = entry;
  }
  return t;
}

// ---------------------------------------------------------------------------
// Shadow archives as JSONL: one record per distinct (basis, outcome), with
// an optional "count" field (omitted when 1) to keep large archives small.

inline std::string outcome_to_string(std::uint64_t outcome, int n) {
  std::string s(static_cast<std::size_t>(n), '0');
  for (int q = 0; q < n; ++q)
    if ((outcome >> q) & 1) s[static_cast<std::size_t>(q)] = '1';
  return s;
}

inline std::uint64_t outcome_from_string(const std::string& s) {
  std::uint64_t out = 0;
  for (std::size_t q = 0; q < s.size(); ++q) {
    if (s[q] == '1')
      out |= std::uint64_t{1} << q;
    else if (s[q] != '0')
      throw std::invalid_argument("outcome_from_string: invalid bit");
  }
  return out;
}

inline void shadows_to_jsonl(const ShadowArchive& archive, std::ostream& os) {
  for (const auto& [key, count] : archive.counts) {
    json line{{"basis", key.first},
              {"outcome", outcome_to_string(key.second, archive.n)}};
    if (count != 1) line["count"] = count;
    os << line.dump() << '\n';
  }
}

inline ShadowArchive shadows_from_jsonl(std::istream& is, int n) {
  ShadowArchive archive;
  archive.n = n;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    archive.add(j.at("basis").get<std::string>(),
                outcome_from_string(j.at("outcome").get<std::string>()),
                j.value("count", std::uint64_t{1}));
  }
  return archive;
}

// ---------------------------------------------------------------------------
// Instance generators.

inline HamiltonianSpec gen_tfim(int n, double beta, double j = 1.0,
                                double h = 0.5) {
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
  spec.validate();
  return spec;
}

/// Random k-local chain instance: terms act on contiguous windows of at
/// most k qubits with non-identity letters at the window edges, and
/// coefficients drawn uniformly from [-1, 1].  Distinct Pauli supports
/// are enforced, so the spec is well defined.
inline HamiltonianSpec gen_random_local(int n, int k, int m, double beta,
                                        std::uint64_t seed) {
  if (k < 1 || k > n) throw std::invalid_argument("gen_random_local: bad k");
  HamiltonianSpec spec;
  spec.n = n;
  spec.beta = beta;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coeff(-1.0, 1.0);
  std::uniform_int_distribution<int> letter(1, 3);  // X, Y, Z
  static constexpr char kLetters[4] = {'I', 'X', 'Y', 'Z'};
  std::set<std::string> seen;
  int guard = 0;
  while (static_cast<int>(spec.terms.size()) < m) {
    if (++guard > 1000 * m)
      throw std::runtime_error("gen_random_local: cannot place distinct terms");
    int width = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(k));
    int start = static_cast<int>(rng() % static_cast<std::uint64_t>(n - width + 1));
    std::string s(static_cast<std::size_t>(n), 'I');
    for (int q = start; q < start + width; ++q)
      s[static_cast<std::size_t>(q)] = kLetters[letter(rng)];
    // Force the window edges non-identity so width is the true support span.
    if (s[static_cast<std::size_t>(start)] == 'I') continue;
    if (seen.count(s)) continue;
    seen.insert(s);
    spec.terms.push_back(PauliString::from_letters(s));
    spec.coeffs.push_back(coeff(rng));
  }
  spec.validate();
  return spec;
}

// ---------------------------------------------------------------------------
// File helpers and run manifests.

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  in >> j;
  return j;
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

/// Every CLI run writes `<output>.manifest.json` capturing the full
/// configuration; re-running with an identical manifest reproduces the
/// outputs bit for bit.
inline json make_manifest(const std::string& subcommand, const json& config) {
  return json{{"tool", "hamlearn"},
              {"format_version", kFormatVersion},
              {"subcommand", subcommand},
              {"config", config}};
}

}  // namespace hamlearn
