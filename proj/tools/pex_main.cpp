// SPDX-License-Identifier: MIT
//
// Batch experiment runner for the extension-estimate laboratory.
//
//   pex <experiment> [target] [flags]
//   pex verify <experiment> [flags]        (alias)
//   pex scan <experiment> [flags]          (sweep + fitted exponent row)
//
// Configuration comes from an optional key-value file (--config) with dotted
// sections (experiment.*, profile.*, collection.*, output.*); command-line
// flags override file keys.  Outputs are a CSV (fixed column order, sorted
// rows, no timestamps — replaying a config is byte-identical) and a JSON
// report with the full audit trail.  Both embed a hash of the effective
// configuration.
//
// Exit codes: 0 success, 1 configuration error (diagnostic names the field),
// 2 violated invariant (diagnostic names the failed audit).

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pex/pex.hpp"

namespace {

using namespace pex;

// ---------------------------------------------------------------------------
// options
// ---------------------------------------------------------------------------

struct Options {
  std::string experiment;
  std::string target; // scan/verify argument
  std::string config_path;

  int n = 2;
  std::string R = "256";  // comma list for scans
  double eps = 0.1;
  double h = 0.25;
  double p = -1.0; // < 0: critical exponent 2(n+1)/(n-1)
  double wf = 3.0;
  std::uint64_t seed = 1;
  int seeds = 1; // sweep width: seed, seed+1, ..., seed+seeds-1
  std::string N = "64";   // comma list for scans
  std::string sigma = "4"; // comma list for scans
  long tubes = 300;        // per family; 0 = random count in [100, 800]
  double c_sat = 50.0;
  long rows_per_block = 0; // 0 = generator default
  int threads = 1;
  bool skip_brute = false;

  std::string profile_tag = "bump";
  std::string box;  // n=2: "lo,hi"; n=3: "lo0,lo1,hi0,hi1"; empty = full
  std::string box2; // second interval (bilinear experiment)

  std::string generator;  // empty = per-experiment default
  std::string cubes_spec; // explicit collection: "cx:cy[:cz];..."

  std::string out_dir;
  std::string csv_name;
  std::string json_name;
};

// ---------------------------------------------------------------------------
// parsing helpers
// ---------------------------------------------------------------------------

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  auto e = s.find_last_not_of(" \t\r\n");
  return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, sep)) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

long to_long(const std::string& s, const std::string& field) {
  try {
    std::size_t pos = 0;
    long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(field + ": not an integer: '" + s + "'");
  }
}

double to_double(const std::string& s, const std::string& field) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(field + ": not a number: '" + s + "'");
  }
}

std::vector<long> parse_longs(const std::string& s, const std::string& field) {
  std::vector<long> out;
  for (const std::string& tok : split(s, ',')) out.push_back(to_long(tok, field));
  if (out.empty()) throw ConfigError(field + ": empty list");
  return out;
}

FreqBox parse_box(const std::string& s, int n, const std::string& field) {
  if (s.empty()) return {};
  std::vector<double> v;
  for (const std::string& tok : split(s, ',')) v.push_back(to_double(tok, field));
  FreqBox b;
  if (n == 2) {
    if (v.size() != 2) throw ConfigError(field + ": expected 'lo,hi'");
    b.lo = {v[0], -1.0};
    b.hi = {v[1], 1.0};
  } else {
    if (v.size() != 4) throw ConfigError(field + ": expected 'lo0,lo1,hi0,hi1'");
    b.lo = {v[0], v[1]};
    b.hi = {v[2], v[3]};
  }
  return b;
}

// Flat key-value config file: `key = value` lines with dotted keys, optional
// `[section]` headers that prefix the keys below them, `#` comments.
std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path);
  std::map<std::string, std::string> kv;
  std::string line, section;
  while (std::getline(is, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      if (!section.empty()) section += '.';
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: malformed line '" + line + "'");
    std::string key = section + trim(line.substr(0, eq));
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

// ---------------------------------------------------------------------------
// instance construction
// ---------------------------------------------------------------------------

Profile make_profile(const ScaleConfig& cfg, const std::string& tag,
                     const FreqBox& box, std::uint64_t seed) {
  if (tag == "bump") return profile_bump(cfg, box);
  if (tag == "constant") return profile_constant(cfg, box);
  if (tag == "random-phase-bump" || tag == "random-phase")
    return profile_random_phase_bump(cfg, box, seed);
  throw ConfigError("profile.tag: unknown tag '" + tag + "'");
}

std::vector<Profile> make_family(const ScaleConfig& cfg, const std::string& tag,
                                 std::uint64_t seed) {
  if (tag == "bump") return standard_bump_family(cfg);
  if (tag == "random-phase-bump" || tag == "random-phase")
    return random_phase_family(cfg, seed);
  throw ConfigError("profile.tag: family experiments accept 'bump' or "
                    "'random-phase-bump', got '" + tag + "'");
}

std::vector<const Profile*> family_ptrs(const std::vector<Profile>& fam) {
  std::vector<const Profile*> fs;
  for (const Profile& f : fam) fs.push_back(&f);
  return fs;
}

CubeCollection parse_explicit_cubes(const ScaleConfig& cfg, const std::string& spec) {
  CubeCollection cubes;
  for (const std::string& tok : split(spec, ';')) {
    auto parts = split(tok, ':');
    if (long(parts.size()) != cfg.n)
      throw ConfigError("collection.cubes: expected " + std::to_string(cfg.n) +
                        " indices in '" + tok + "'");
    DyadicCube q{};
    for (std::size_t d = 0; d < parts.size(); ++d) {
      q.idx[d] = to_long(parts[d], "collection.cubes");
      if (q.idx[d] < 0 || q.idx[d] >= cfg.sR)
        throw ConfigError("collection.cubes: index out of [0," +
                          std::to_string(cfg.sR) + ") in '" + tok + "'");
    }
    cubes.push_back(q);
  }
  if (cubes.empty()) throw ConfigError("collection.cubes: empty list");
  return cubes;
}

// A block of cells around the focal point R/2 per axis (the bush ensemble).
CubeCollection bush_cells(const ScaleConfig& cfg) {
  if (cfg.n != 2)
    throw ConfigError("collection.generator: bush is implemented for n=2");
  CubeCollection cubes;
  long c0 = cfg.sR / 2 - 1;
  for (long r = c0; r < c0 + 4; ++r)
    for (long c = c0; c < c0 + 4; ++c) cubes.push_back(DyadicCube{{c, r, 0}});
  return cubes;
}

CubeCollection make_cubes(const ScaleConfig& cfg, const std::string& generator,
                          long N, std::uint64_t seed, const std::string& spec) {
  if (generator == "random") {
    Rng rng(seed);
    return random_cube_collection(cfg, N, rng);
  }
  if (generator == "grid") return full_cell_grid(cfg);
  if (generator == "line") {
    CubeCollection cubes;
    long cnt = std::min(N, cfg.sR);
    if (cnt < 1) throw ConfigError("collection.N: must be >= 1");
    for (long c = 0; c < cnt; ++c)
      cubes.push_back(DyadicCube{{c, cfg.sR / 2, cfg.n == 3 ? cfg.sR / 2 : 0}});
    return cubes;
  }
  if (generator == "graph") {
    CubeCollection cubes;
    long cnt = std::min(N, cfg.sR);
    if (cnt < 1) throw ConfigError("collection.N: must be >= 1");
    for (long c = 0; c < cnt; ++c) {
      long y = (cfg.sR / 4 + c / 2) % cfg.sR;
      cubes.push_back(DyadicCube{{c, y, cfg.n == 3 ? cfg.sR / 2 : 0}});
    }
    return cubes;
  }
  if (generator == "bush") return bush_cells(cfg);
  if (generator == "explicit") return parse_explicit_cubes(cfg, spec);
  throw ConfigError("collection.generator: unknown '" + generator + "'");
}

SquareGenerator square_generator(const std::string& g) {
  if (g == "line" || g.empty()) return SquareGenerator::HorizontalLine;
  if (g == "graph") return SquareGenerator::LipschitzGraph;
  if (g == "random") return SquareGenerator::RandomDisjoint;
  throw ConfigError("collection.generator: squares accept line|graph|random, got '" + g + "'");
}

// Bilinear profile pair on disjoint intervals.
std::pair<Profile, Profile> carleson_pair(const ScaleConfig& cfg, const Options& o) {
  FreqBox b1 = o.box.empty() ? FreqBox{{-1.0, -1.0}, {-0.25, 1.0}}
                             : parse_box(o.box, cfg.n, "profile.box");
  FreqBox b2 = o.box2.empty() ? FreqBox{{0.25, -1.0}, {1.0, 1.0}}
                              : parse_box(o.box2, cfg.n, "profile.box2");
  return {make_profile(cfg, o.profile_tag, b1, o.seed),
          make_profile(cfg, o.profile_tag, b2, o.seed + 1)};
}

// Transversal family concentrated through one spatial point (the bush input
// for the saturated estimate): focusing + translation move the whole field
// pattern to the center of [0,R]^2.
std::vector<Profile> bush_family(const ScaleConfig& cfg, const std::string& tag,
                                 std::uint64_t seed) {
  std::vector<Profile> fam = make_family(cfg, tag, seed);
  double c = double(cfg.R) / 2.0;
  for (Profile& f : fam) f = modulate_translate(modulate_focus(std::move(f), -c), {-c, 0.0});
  return fam;
}

std::string default_generator(const std::string& experiment) {
  if (experiment == "kakeya" || experiment == "refined-decoupling") return "grid";
  if (experiment == "saturated") return "bush";
  return "random";
}

// ---------------------------------------------------------------------------
// single experiments
// ---------------------------------------------------------------------------

EstimateReport run_decompose(const ScaleConfig& cfg, const Options& o) {
  Profile f = make_profile(cfg, o.profile_tag,
                           parse_box(o.box, cfg.n, "profile.box"), o.seed);
  Decomposition dec = decompose(f, o.wf);
  WeightClasses wc = weight_classes(dec);
  EstimateReport r;
  r.name = "wave-packet-decomposition";
  r.n = cfg.n;
  r.R = cfg.R;
  r.eps = cfg.eps;
  r.seed = o.seed;
  double fn = l2_norm(f);
  double res = l2_norm(dec.residual);
  double mass = 0.0;
  long kept = 0;
  for (const WavePacket& pkt : dec.packets)
    if (pkt.kept) {
      mass += std::norm(pkt.coef);
      ++kept;
    }
  r.lhs = res;
  r.rhs_core = fn;
  r.ratio = fn > 0 ? res / fn : 0.0;
  r.N = kept;
  r.levels = {long(wc.count)};
  double fn2 = fn * fn;
  r.audits["packets"] = dec.packets.size();
  r.audits["kept"] = kept;
  r.audits["classes"] = wc.count;
  r.audits["wmin"] = wc.wmin;
  r.audits["wmax"] = wc.wmax;
  r.audits["dropped_mass"] = wc.dropped_mass;
  r.audits["parseval_rel"] = fn2 > 0 ? std::abs(mass + res * res - fn2) / fn2 : 0.0;
  r.audits["parseval_ok"] = fn2 <= 0 || std::abs(mass + res * res - fn2) / fn2 <= 1e-9;
  return r;
}

std::vector<EstimateReport> run_single(const Options& o) {
  std::vector<long> Rs = parse_longs(o.R, "experiment.R");
  ScaleConfig cfg(o.n, Rs[0], o.eps, o.h);
  double p = o.p;
  long N = parse_longs(o.N, "experiment.N")[0];
  std::string gen = o.generator.empty() ? default_generator(o.experiment) : o.generator;
  const std::string& e = o.experiment;

  if (e == "decompose") return {run_decompose(cfg, o)};

  if (e == "classical") {
    Profile f = make_profile(cfg, o.profile_tag,
                             parse_box(o.box, cfg.n, "profile.box"), o.seed);
    EstimateReport r = verify_classical(f, p, o.threads);
    r.seed = o.seed;
    return {r};
  }
  if (e == "refined-decoupling") {
    Profile f = make_profile(cfg, o.profile_tag,
                             parse_box(o.box, cfg.n, "profile.box"), o.seed);
    CubeCollection cubes = make_cubes(cfg, gen, N, o.seed, o.cubes_spec);
    EstimateReport r = verify_refined_decoupling(f, cubes, p, o.wf, o.threads);
    r.seed = o.seed;
    return {r};
  }
  if (e == "kakeya") {
    Rng rng(o.seed);
    std::vector<std::vector<Tube>> fams;
    for (const FreqBox& b : standard_transversal_boxes(cfg)) {
      long count = o.tubes > 0 ? o.tubes : 100 + long(rng.bounded(701));
      fams.push_back(random_tube_family(cfg, b, count, rng));
    }
    CubeCollection cubes = make_cubes(cfg, gen, N, o.seed + 1, o.cubes_spec);
    EstimateReport r = kakeya_bucket_scan(cfg, fams, cubes);
    r.seed = o.seed;
    return {r};
  }
  if (e == "multilinear" || e == "select") {
    std::vector<Profile> fam = make_family(cfg, o.profile_tag, o.seed);
    CubeCollection cubes = make_cubes(cfg, gen, N, o.seed, o.cubes_spec);
    EstimateReport r = verify_multilinear_refined(family_ptrs(fam), cubes, p,
                                                  o.wf, o.threads, !o.skip_brute);
    r.seed = o.seed;
    if (e == "select") r.name = "packet-selection";
    return {r};
  }
  if (e == "corollary") {
    std::vector<Profile> fam = make_family(cfg, o.profile_tag, o.seed);
    CubeCollection cubes = make_cubes(cfg, gen, N, o.seed, o.cubes_spec);
    EstimateReport r = verify_corollary(family_ptrs(fam), cubes, p, o.threads);
    r.seed = o.seed;
    return {r};
  }
  if (e == "saturated") {
    std::vector<Profile> fam = gen == "bush"
                                   ? bush_family(cfg, o.profile_tag, o.seed)
                                   : make_family(cfg, o.profile_tag, o.seed);
    CubeCollection cubes = make_cubes(cfg, gen, N, o.seed, o.cubes_spec);
    EstimateReport r = verify_saturated_decoupling(family_ptrs(fam), cubes,
                                                   o.c_sat, p, o.wf, o.threads);
    r.seed = o.seed;
    return {r};
  }
  if (e == "linear") {
    long sg = parse_longs(o.sigma, "experiment.sigma")[0];
    WedgeSlabInstance inst = wedge_slab_instance(cfg, sg);
    long rpb = o.rows_per_block > 0 ? o.rows_per_block : inst.rows_per_block;
    EstimateReport r = verify_linear_refined(inst.f, inst.cubes, rpb, p, o.wf, o.threads);
    r.seed = o.seed;
    return {r};
  }
  if (e == "carleson") {
    auto [f1, f2] = carleson_pair(cfg, o);
    std::string sgen = o.generator.empty() ? "line" : o.generator;
    SquareConfig sq = unit_square_config(cfg, square_generator(sgen), o.seed);
    validate_square_config(cfg, sq);
    EstimateReport r = verify_carleson(f1, f2, sq, o.threads);
    r.seed = o.seed;
    return {r};
  }
  throw ConfigError("experiment.name: unknown experiment '" + e + "'");
}

// ---------------------------------------------------------------------------
// scans
// ---------------------------------------------------------------------------

std::vector<std::uint64_t> seed_list(const Options& o) {
  if (o.seeds < 1) throw ConfigError("experiment.seeds: must be >= 1");
  std::vector<std::uint64_t> s;
  for (int k = 0; k < o.seeds; ++k) s.push_back(o.seed + std::uint64_t(k));
  return s;
}

// Scan abscissa for the fitted exponent: the parameter the target sweeps.
double scan_abscissa(const std::string& target, const EstimateReport& r) {
  if (target == "multilinear" || target == "corollary") return double(r.N);
  if (target == "linear") return double(r.sigma);
  return double(r.R);
}

std::vector<EstimateReport> run_scan(const Options& o) {
  const std::string& t = o.target;
  static const std::set<std::string> scannable{
      "classical", "refined-decoupling", "multilinear",
      "corollary", "linear",             "carleson"};
  if (!scannable.count(t))
    throw ConfigError("experiment.target: '" + t + "' is not scannable");

  std::vector<long> Rs = parse_longs(o.R, "experiment.R");
  std::vector<std::uint64_t> seeds = seed_list(o);
  double p = o.p;
  std::vector<EstimateReport> rows;

  for (long R : Rs) {
    ScaleConfig cfg(o.n, R, o.eps, o.h);
    if (t == "classical") {
      FreqBox box = parse_box(o.box, cfg.n, "profile.box");
      for (std::uint64_t s : seeds) {
        Profile f = make_profile(cfg, o.profile_tag, box, s);
        EstimateReport r = verify_classical(f, p, o.threads);
        r.seed = s;
        rows.push_back(std::move(r));
      }
    } else if (t == "refined-decoupling") {
      FreqBox box = parse_box(o.box, cfg.n, "profile.box");
      std::string gen = o.generator.empty() ? "grid" : o.generator;
      long N = parse_longs(o.N, "experiment.N")[0];
      for (std::uint64_t s : seeds) {
        Profile f = make_profile(cfg, o.profile_tag, box, s);
        CubeCollection cubes = make_cubes(cfg, gen, N, s, o.cubes_spec);
        EstimateReport r = verify_refined_decoupling(f, cubes, p, o.wf, o.threads);
        r.seed = s;
        rows.push_back(std::move(r));
      }
    } else if (t == "multilinear") {
      std::vector<Profile> fam = make_family(cfg, o.profile_tag, o.seed);
      std::vector<long> Ns = parse_longs(o.N, "experiment.N");
      auto batch = multilinear_refined_sweep(family_ptrs(fam), Ns, seeds, p,
                                             o.wf, o.threads, !o.skip_brute);
      rows.insert(rows.end(), batch.begin(), batch.end());
    } else if (t == "corollary") {
      std::vector<Profile> fam = make_family(cfg, o.profile_tag, o.seed);
      auto fs = family_ptrs(fam);
      for (long N : parse_longs(o.N, "experiment.N"))
        for (std::uint64_t s : seeds) {
          Rng rng(s);
          CubeCollection cubes = random_cube_collection(cfg, N, rng);
          EstimateReport r = verify_corollary(fs, cubes, p, o.threads);
          r.seed = s;
          rows.push_back(std::move(r));
        }
    } else if (t == "linear") {
      for (long sg : parse_longs(o.sigma, "experiment.sigma")) {
        WedgeSlabInstance inst = wedge_slab_instance(cfg, sg);
        long rpb = o.rows_per_block > 0 ? o.rows_per_block : inst.rows_per_block;
        EstimateReport r = verify_linear_refined(inst.f, inst.cubes, rpb, p,
                                                 o.wf, o.threads);
        r.seed = o.seed;
        rows.push_back(std::move(r));
      }
    } else if (t == "carleson") {
      auto [f1, f2] = carleson_pair(cfg, o);
      std::string sgen = o.generator.empty() ? "line" : o.generator;
      for (std::uint64_t s : seeds) {
        SquareConfig sq = unit_square_config(cfg, square_generator(sgen), s);
        validate_square_config(cfg, sq);
        EstimateReport r = verify_carleson(f1, f2, sq, o.threads);
        r.seed = s;
        rows.push_back(std::move(r));
      }
    }
  }

  // fitted exponent of lhs against the swept parameter
  std::vector<std::pair<double, double>> pts;
  std::set<double> xs;
  for (const EstimateReport& r : rows)
    if (r.lhs > 0) {
      double x = scan_abscissa(t, r);
      pts.emplace_back(x, r.lhs);
      xs.insert(x);
    }
  if (xs.size() < 3)
    throw ConfigError("scan: need at least 3 distinct sweep points with "
                      "positive lhs for the exponent fit");
  FitResult fr = fit_exponent(pts);
  EstimateReport fit;
  fit.name = "fit-" + t;
  fit.n = o.n;
  fit.eps = o.eps;
  fit.R = 0;
  fit.N = 0;
  fit.sigma = 0;
  fit.seed = 0;
  fit.lhs = 0.0;
  fit.rhs_core = fr.stderr_slope;
  fit.ratio = fr.slope; // the fitted exponent, in the generic ratio column
  fit.fit = fr;
  rows.push_back(std::move(fit));
  return rows;
}

// ---------------------------------------------------------------------------
// config plumbing
// ---------------------------------------------------------------------------

std::string canonical_config(const Options& o) {
  std::ostringstream os;
  os << "experiment=" << o.experiment << '\n'
     << "target=" << o.target << '\n'
     << "n=" << o.n << '\n'
     << "R=" << o.R << '\n'
     << "eps=" << fmt_g(o.eps) << '\n'
     << "h=" << fmt_g(o.h) << '\n'
     << "p=" << fmt_g(o.p) << '\n'
     << "wf=" << fmt_g(o.wf) << '\n'
     << "seed=" << o.seed << '\n'
     << "seeds=" << o.seeds << '\n'
     << "N=" << o.N << '\n'
     << "sigma=" << o.sigma << '\n'
     << "tubes=" << o.tubes << '\n'
     << "c_sat=" << fmt_g(o.c_sat) << '\n'
     << "rows_per_block=" << o.rows_per_block << '\n'
     << "skip_brute=" << int(o.skip_brute) << '\n'
     << "profile.tag=" << o.profile_tag << '\n'
     << "profile.box=" << o.box << '\n'
     << "profile.box2=" << o.box2 << '\n'
     << "collection.generator=" << o.generator << '\n'
     << "collection.cubes=" << o.cubes_spec << '\n';
  return os.str();
}

int run(Options& o) {
  static const std::set<std::string> experiments{
      "decompose", "select",     "classical", "refined-decoupling",
      "kakeya",    "multilinear", "corollary", "saturated",
      "linear",    "carleson",   "scan"};

  if (o.experiment == "verify") {
    if (o.target.empty())
      throw ConfigError("experiment.target: 'verify' needs an experiment name");
    o.experiment = o.target;
    o.target.clear();
  }
  if (!experiments.count(o.experiment))
    throw ConfigError("experiment.name: unknown experiment '" + o.experiment + "'");
  if (o.experiment == "scan" && o.target.empty())
    throw ConfigError("experiment.target: 'scan' needs a target experiment");
  if (o.experiment != "scan" && !o.target.empty())
    throw ConfigError("experiment.target: only 'scan' and 'verify' take a target");
  if (o.threads < 1) throw ConfigError("experiment.threads: must be >= 1");

  std::uint64_t digest = fnv1a64(canonical_config(o));
  std::vector<EstimateReport> rows =
      o.experiment == "scan" ? run_scan(o) : run_single(o);

  // emit
  std::string dir = o.out_dir.empty() ? default_output_dir() : o.out_dir;
  std::string base = o.experiment + (o.target.empty() ? "" : "-" + o.target);
  std::string csv_path = dir + "/" + (o.csv_name.empty() ? base + ".csv" : o.csv_name);
  std::string json_path = dir + "/" + (o.json_name.empty() ? base + ".json" : o.json_name);
  write_text_file(csv_path, report_csv(rows, digest));
  write_text_file(json_path, reports_json(rows, digest).dump(2) + "\n");

  for (const EstimateReport& r : rows) {
    if (r.fit) {
      std::printf("%-32s slope=%+.4f stderr=%.4f intercept=%+.4f points=%d\n",
                  r.name.c_str(), r.fit->slope, r.fit->stderr_slope,
                  r.fit->intercept, r.fit->npoints);
    } else {
      std::printf("%-32s R=%-5ld N=%-5ld sigma=%-4ld seed=%-4llu lhs=%-12.6g "
                  "rhs=%-12.6g ratio=%.6g\n",
                  r.name.c_str(), r.R, r.N, r.sigma,
                  (unsigned long long)r.seed, r.lhs, r.rhs_core, r.ratio);
    }
  }
  std::printf("wrote %s and %s (config %016llx)\n", csv_path.c_str(),
              json_path.c_str(), (unsigned long long)digest);

  // audit gate: any boolean audit named *_ok that came back false is a
  // violated invariant
  std::vector<std::string> failed;
  for (const EstimateReport& r : rows)
    for (auto it = r.audits.begin(); it != r.audits.end(); ++it)
      if (it.key().size() > 3 &&
          it.key().compare(it.key().size() - 3, 3, "_ok") == 0 &&
          it.value().is_boolean() && !it.value().get<bool>())
        failed.push_back(r.name + "." + it.key());
  if (!failed.empty()) {
    for (const std::string& f : failed)
      std::fprintf(stderr, "invariant failed: %s\n", f.c_str());
    return 2;
  }
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"numerical laboratory for paraboloid extension estimates"};
  app.add_option("experiment", o.experiment,
                 "decompose|select|classical|refined-decoupling|kakeya|"
                 "multilinear|corollary|saturated|linear|carleson|scan|verify");
  app.add_option("target", o.target, "experiment for scan/verify");
  app.add_option("--config", o.config_path, "key-value config file");
  std::map<std::string, std::pair<CLI::Option*, std::function<void(const std::string&)>>> keys;
  auto bind = [&](const std::string& key, CLI::Option* opt,
                  std::function<void(const std::string&)> set) {
    keys[key] = {opt, std::move(set)};
  };
  bind("experiment.name", app.get_option("experiment"),
       [&](const std::string& v) { o.experiment = v; });
  bind("experiment.target", app.get_option("target"),
       [&](const std::string& v) { o.target = v; });
  bind("experiment.n", app.add_option("--n", o.n, "dimension (2 or 3)"),
       [&](const std::string& v) { o.n = int(to_long(v, "experiment.n")); });
  bind("experiment.R", app.add_option("--R", o.R, "scale(s), comma list"),
       [&](const std::string& v) { o.R = v; });
  bind("experiment.eps", app.add_option("--eps", o.eps, "epsilon in (0, 1/4]"),
       [&](const std::string& v) { o.eps = to_double(v, "experiment.eps"); });
  bind("experiment.h", app.add_option("--step", o.h, "spatial sample step"),
       [&](const std::string& v) { o.h = to_double(v, "experiment.h"); });
  bind("experiment.p", app.add_option("--p", o.p, "Lebesgue exponent (<0: critical)"),
       [&](const std::string& v) { o.p = to_double(v, "experiment.p"); });
  bind("experiment.wf", app.add_option("--wf", o.wf, "packet window factor"),
       [&](const std::string& v) { o.wf = to_double(v, "experiment.wf"); });
  bind("experiment.seed", app.add_option("--seed", o.seed, "base seed"),
       [&](const std::string& v) { o.seed = std::uint64_t(to_long(v, "experiment.seed")); });
  bind("experiment.seeds", app.add_option("--seeds", o.seeds, "seed count for sweeps"),
       [&](const std::string& v) { o.seeds = int(to_long(v, "experiment.seeds")); });
  bind("experiment.N", app.add_option("--N", o.N, "cube count(s), comma list"),
       [&](const std::string& v) { o.N = v; });
  bind("experiment.sigma", app.add_option("--sigma", o.sigma, "block size(s), comma list"),
       [&](const std::string& v) { o.sigma = v; });
  bind("experiment.tubes", app.add_option("--tubes", o.tubes, "tubes per family (0: random)"),
       [&](const std::string& v) { o.tubes = to_long(v, "experiment.tubes"); });
  bind("experiment.c_sat", app.add_option("--C-sat", o.c_sat, "saturation audit tolerance"),
       [&](const std::string& v) { o.c_sat = to_double(v, "experiment.c_sat"); });
  bind("experiment.rows_per_block",
       app.add_option("--rows-per-block", o.rows_per_block, "block granularity (0: auto)"),
       [&](const std::string& v) { o.rows_per_block = to_long(v, "experiment.rows_per_block"); });
  bind("experiment.threads", app.add_option("--threads", o.threads, "worker thread cap"),
       [&](const std::string& v) { o.threads = int(to_long(v, "experiment.threads")); });
  bind("experiment.skip_brute",
       app.add_flag("--skip-brute-audit", o.skip_brute, "skip brute-force incidence re-check"),
       [&](const std::string& v) { o.skip_brute = (v == "1" || v == "true"); });
  bind("profile.tag", app.add_option("--profile", o.profile_tag, "bump|constant|random-phase-bump"),
       [&](const std::string& v) { o.profile_tag = v; });
  bind("profile.box", app.add_option("--box", o.box, "frequency support box"),
       [&](const std::string& v) { o.box = v; });
  bind("profile.box2", app.add_option("--box2", o.box2, "second support box (bilinear)"),
       [&](const std::string& v) { o.box2 = v; });
  bind("collection.generator",
       app.add_option("--collection", o.generator, "random|line|graph|grid|bush|explicit"),
       [&](const std::string& v) { o.generator = v; });
  bind("collection.cubes", app.add_option("--cubes", o.cubes_spec, "explicit cells cx:cy[:cz];..."),
       [&](const std::string& v) { o.cubes_spec = v; });
  bind("output.dir", app.add_option("--out-dir", o.out_dir, "output directory (default $PEX_OUT or .)"),
       [&](const std::string& v) { o.out_dir = v; });
  bind("output.csv", app.add_option("--csv", o.csv_name, "CSV file name"),
       [&](const std::string& v) { o.csv_name = v; });
  bind("output.json", app.add_option("--json", o.json_name, "JSON file name"),
       [&](const std::string& v) { o.json_name = v; });

  CLI11_PARSE(app, argc, argv);

  try {
    if (!o.config_path.empty()) {
      for (const auto& [key, value] : parse_config_file(o.config_path)) {
        auto it = keys.find(key);
        if (it == keys.end()) throw pex::ConfigError("config: unknown key '" + key + "'");
        auto& [opt, set] = it->second;
        if (opt->count() == 0) set(value); // flags override file keys
      }
    }
    if (o.experiment.empty())
      throw pex::ConfigError("experiment.name: required (positional or config)");
    return run(o);
  } catch (const pex::ConfigError& ex) {
    std::fprintf(stderr, "config error: %s\n", ex.what());
    return 1;
  } catch (const pex::InvariantError& ex) {
    std::fprintf(stderr, "invariant error: %s\n", ex.what());
    return 2;
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 2;
  }
}
