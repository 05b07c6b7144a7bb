// SPDX-License-Identifier: MIT
//
// Report serialization.  CSV data rows are canonical: fixed column order,
// %.12g floats, rows sorted by (R, N, seed, name, sigma), no timestamps —
// replaying a config with the same seed must reproduce the bytes exactly.
// JSON is the superset (audits, levels, fit) for humans and debugging.
#pragma once

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <tuple>

#include "pex/verify.hpp"

namespace pex {

inline std::string csv_header() {
  return "name,n,R,N,sigma,eps,seed,lhs,rhs_core,ratio";
}

inline std::string csv_row(const EstimateReport& r) {
  std::ostringstream os;
  os << r.name << ',' << r.n << ',' << r.R << ',' << r.N << ',' << r.sigma
     << ',' << fmt_g(r.eps) << ',' << r.seed << ',' << fmt_g(r.lhs) << ','
     << fmt_g(r.rhs_core) << ',' << fmt_g(r.ratio);
  return os.str();
}

// Full CSV document.  `config_digest` fingerprints the originating
// configuration so replays are comparable at a glance.
inline std::string report_csv(std::vector<EstimateReport> reports,
                              std::uint64_t config_digest) {
  std::sort(reports.begin(), reports.end(),
            [](const EstimateReport& a, const EstimateReport& b) {
              return std::tie(a.R, a.N, a.seed, a.name, a.sigma) <
                     std::tie(b.R, b.N, b.seed, b.name, b.sigma);
            });
  std::ostringstream os;
  char digest[32];
  std::snprintf(digest, sizeof digest, "%016llx",
                (unsigned long long)config_digest);
  os << "# config=" << digest << '\n' << csv_header() << '\n';
  for (const EstimateReport& r : reports) os << csv_row(r) << '\n';
  return os.str();
}

inline nlohmann::json report_json(const EstimateReport& r) {
  nlohmann::json j{{"name", r.name},   {"n", r.n},
                   {"R", r.R},         {"N", r.N},
                   {"sigma", r.sigma}, {"eps", r.eps},
                   {"seed", r.seed},   {"lhs", r.lhs},
                   {"rhs_core", r.rhs_core}, {"ratio", r.ratio},
                   {"levels", r.levels}, {"audits", r.audits}};
  if (r.fit)
    j["fit"] = {{"slope", r.fit->slope},
                {"stderr", r.fit->stderr_slope},
                {"intercept", r.fit->intercept},
                {"npoints", r.fit->npoints}};
  return j;
}

inline nlohmann::json reports_json(const std::vector<EstimateReport>& reports,
                                   std::uint64_t config_digest) {
  nlohmann::json arr = nlohmann::json::array();
  for (const EstimateReport& r : reports) arr.push_back(report_json(r));
  char digest[32];
  std::snprintf(digest, sizeof digest, "%016llx",
                (unsigned long long)config_digest);
  return nlohmann::json{{"config", digest}, {"reports", arr}};
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("output: cannot open " + path);
  os << text;
  if (!os) throw ConfigError("output: write failed for " + path);
}

// Default output directory: $PEX_OUT if set, else the working directory.
inline std::string default_output_dir() {
  const char* env = std::getenv("PEX_OUT");
  return env && *env ? env : ".";
}

} // namespace pex
