// SPDX-License-Identifier: MIT
//
// Deterministic instance generators: transversal profile families, cube
// collections, tube families and the unit-square configurations for the
// bilinear experiment.  Everything random flows through Rng(seed).
#pragma once

#include <algorithm>

#include "pex/selection.hpp"
#include "pex/wavepacket.hpp"

namespace pex {

// n pairwise-separated frequency boxes; any choice of one cap per box is
// transversal with volume far above the 0.01 threshold.
inline std::vector<FreqBox> standard_transversal_boxes(const ScaleConfig& cfg) {
  if (cfg.n == 2)
    return {FreqBox{{-1.0, -1.0}, {-0.25, 1.0}}, FreqBox{{0.25, -1.0}, {1.0, 1.0}}};
  return {FreqBox{{-1.0, -1.0}, {-0.25, -0.25}},
          FreqBox{{0.25, -1.0}, {1.0, -0.25}},
          FreqBox{{-0.375, 0.25}, {0.375, 1.0}}};
}

// Smooth transversal bump family (one profile per box).
inline std::vector<Profile> standard_bump_family(const ScaleConfig& cfg) {
  std::vector<Profile> out;
  for (const FreqBox& b : standard_transversal_boxes(cfg)) out.push_back(profile_bump(cfg, b));
  return out;
}

// Random-phase transversal family; family i uses seed + i.
inline std::vector<Profile> random_phase_family(const ScaleConfig& cfg,
                                                std::uint64_t seed) {
  std::vector<Profile> out;
  std::uint64_t s = seed;
  for (const FreqBox& b : standard_transversal_boxes(cfg))
    out.push_back(profile_random_phase_bump(cfg, b, s++));
  return out;
}

// N distinct cubes drawn uniformly from the sR^n grid over [0,R]^n,
// returned in canonical (z, y, x) order.
inline CubeCollection random_cube_collection(const ScaleConfig& cfg, long N,
                                             Rng& rng) {
  long total = cfg.sR * cfg.sR * (cfg.n == 3 ? cfg.sR : 1);
  if (N < 1 || N > total)
    throw ConfigError("random_cube_collection: N out of range");
  std::vector<long> ids = rng.sample_without_replacement(total, N);
  std::sort(ids.begin(), ids.end());
  CubeCollection cubes;
  cubes.reserve(std::size_t(N));
  for (long id : ids) {
    DyadicCube q{};
    q.idx[0] = id % cfg.sR;
    q.idx[1] = (id / cfg.sR) % cfg.sR;
    q.idx[2] = cfg.n == 3 ? id / (cfg.sR * cfg.sR) : 0;
    cubes.push_back(q);
  }
  return cubes;
}

// ---------------------------------------------------------------------------
// wedge-slab instance (linear estimate, saturating family)
// ---------------------------------------------------------------------------

// Constant profile focused below the square: f(xi) = e(Y0 xi^2) on [-1,1].
// Its field concentrates on the wedge |x1| <~ 2 (x2 + Y0); per-cube values
// decay like (x2 + Y0)^{-1/2}, essentially constant along each row.  The
// collection places blocks at height ~ 18 sigma so that the restricted
// L^p mass scales like sigma^{-1/(n+1)}.
struct WedgeSlabInstance {
  Profile f;
  CubeCollection cubes;    // row-major: for each row, all columns
  long rows_per_block = 1; // partition granularity (re-applied after restriction)
  long sigma = 0;          // requested sigma = column count per block
  std::vector<long> rows;
};

inline WedgeSlabInstance wedge_slab_instance(const ScaleConfig& cfg, long sigma,
                                             double Y0 = 56.0) {
  if (cfg.n != 2) throw ConfigError("wedge_slab_instance: n must be 2");
  if (sigma < 1 || sigma > 2 * cfg.sR)
    throw ConfigError("wedge_slab_instance: sigma out of range");
  WedgeSlabInstance inst;
  inst.sigma = sigma;
  inst.f = modulate_focus(profile_constant(cfg), Y0);
  inst.f.tag = "wedge-slab";
  if (sigma <= cfg.sR) {
    long r = std::lround((18.0 * double(sigma) - Y0 - double(cfg.sR) / 2.0) /
                         double(cfg.sR));
    r = std::clamp(r, 0L, cfg.sR - 1);
    inst.rows = {r};
  } else {
    inst.rows = {cfg.sR - 2, cfg.sR - 1};
  }
  long ncols = std::min(sigma, cfg.sR);
  for (long r : inst.rows)
    for (long c = 0; c < ncols; ++c) inst.cubes.push_back(DyadicCube{{c, r, 0}});
  // sigma <= sR: one block per row; sigma > sR: the two rows form one block
  inst.rows_per_block = sigma <= cfg.sR ? 1 : 2;
  return inst;
}

// ---------------------------------------------------------------------------
// tube families (incidence experiment)
// ---------------------------------------------------------------------------

// Random tubes from one frequency box: caps whose center lies in the box,
// shifts v = sR * t with t in [-sR, 2 sR] (tubes meeting [0,R]^n), sampled
// without replacement.
inline std::vector<Tube> random_tube_family(const ScaleConfig& cfg,
                                            const FreqBox& box, long count,
                                            Rng& rng) {
  std::vector<long> caps1, caps2;
  for (long c = 0; c < cfg.ncaps; ++c) {
    double xc = cap_center(cfg, c);
    if (xc > box.lo[0] && xc < box.hi[0]) caps1.push_back(c);
    if (cfg.n == 3 && xc > box.lo[1] && xc < box.hi[1]) caps2.push_back(c);
  }
  if (cfg.n == 2) caps2 = {0};
  const long nt = 3 * cfg.sR + 1; // t in [-sR, 2 sR]
  long total = long(caps1.size()) * long(caps2.size()) * nt * (cfg.n == 3 ? nt : 1);
  if (count < 1 || count > total)
    throw ConfigError("random_tube_family: count out of range");
  std::vector<long> ids = rng.sample_without_replacement(total, count);
  std::sort(ids.begin(), ids.end());
  std::vector<Tube> tubes;
  tubes.reserve(std::size_t(count));
  for (long id : ids) {
    long rem = id;
    long t1 = rem % nt;
    rem /= nt;
    long t2 = 0;
    if (cfg.n == 3) {
      t2 = rem % nt;
      rem /= nt;
    }
    long c1 = caps1[std::size_t(rem % long(caps1.size()))];
    rem /= long(caps1.size());
    long c2 = caps2[std::size_t(rem)];
    Tube tb;
    tb.cap = Cap{{c1, cfg.n == 3 ? c2 : 0}};
    tb.v = {cfg.sR * (t1 - cfg.sR), cfg.n == 3 ? cfg.sR * (t2 - cfg.sR) : 0};
    tubes.push_back(tb);
  }
  return tubes;
}

// ---------------------------------------------------------------------------
// unit-square configurations (bilinear experiment)
// ---------------------------------------------------------------------------

// Unit square [x, x+1) x [y, y+1) with integer corner.
struct UnitSquare {
  long x = 0, y = 0;
};

enum class SquareGenerator { HorizontalLine, LipschitzGraph, RandomDisjoint };

struct SquareConfig {
  std::vector<UnitSquare> squares; // pairwise disjoint x-projections
  SquareGenerator generator = SquareGenerator::HorizontalLine;
};

// ~R unit squares with pairwise disjoint x-projections (one per integer x).
//   horizontal-line: all at height R/2
//   lipschitz-graph: sawtooth y(x) = R/4 + |x - R/2| / 2 (slope 1/2)
//   random-disjoint: heights uniform in [0, R-1]
inline SquareConfig unit_square_config(const ScaleConfig& cfg, SquareGenerator g,
                                       std::uint64_t seed = 0) {
  SquareConfig sq;
  sq.generator = g;
  Rng rng(seed);
  for (long x = 0; x < cfg.R; ++x) {
    long y = 0;
    switch (g) {
      case SquareGenerator::HorizontalLine: y = cfg.R / 2; break;
      case SquareGenerator::LipschitzGraph:
        y = cfg.R / 4 + std::labs(x - cfg.R / 2) / 2;
        break;
      case SquareGenerator::RandomDisjoint:
        y = long(rng.bounded(std::uint64_t(cfg.R)));
        break;
    }
    sq.squares.push_back(UnitSquare{x, y});
  }
  return sq;
}

// Pairwise disjoint x-projections (here: distinct integer x corners).
inline void validate_square_config(const ScaleConfig& cfg, const SquareConfig& sq) {
  std::vector<long> xs;
  for (const UnitSquare& s : sq.squares) {
    if (s.x < 0 || s.x + 1 > cfg.R || s.y < 0 || s.y + 1 > cfg.R)
      throw ConfigError("squares: square outside [0,R]^2");
    xs.push_back(s.x);
  }
  std::sort(xs.begin(), xs.end());
  if (std::adjacent_find(xs.begin(), xs.end()) != xs.end())
    throw ConfigError("squares: x-projections not pairwise disjoint");
  long N = long(sq.squares.size());
  if (2 * N < cfg.R || N > 2 * cfg.R)
    throw ConfigError("squares: count must be within factor 2 of R");
}

} // namespace pex
