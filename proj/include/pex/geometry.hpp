// SPDX-License-Identifier: MIT
//
// Tube/cube incidence geometry at scale R.
//
//   caps      side R^{-1/2} frequency cubes partitioning [-1,1)^(n-1)
//   tubes     T(cap, v): axis x'(t) = -v - 2 xi_c t for t = x_n in [0, R],
//             v on the sqrt(R) lattice; the fat tube is the
//             R^{1/2+eps}-neighborhood of the axis
//   cubes     sqrt(R)-cells of [0, R]^n, indexed by (cx, cy[, cz])
//
// fat_tube_meets_cube tests the cube center against the axis segment with
// threshold R^{1/2+eps} + (sqrt(n)/2) sqrt(R), i.e. fat tube against the
// cube's circumscribed ball.  incidence_counts must agree exactly with the
// brute-force loop; the grid index only prefilters candidates.
#pragma once

#include <algorithm>
#include <map>
#include <vector>

#include "pex/common.hpp"

namespace pex {

struct Cap {
  std::array<long, 2> idx{0, 0}; // one entry used when n=2
};

struct DyadicCube {
  std::array<long, 3> idx{0, 0, 0}; // (cx, cy) when n=2, (cx, cy, cz) when n=3
  long operator[](std::size_t i) const { return idx[i]; }
  std::size_t size() const { return 3; }
  friend bool operator==(const DyadicCube&, const DyadicCube&) = default;
  friend auto operator<=>(const DyadicCube&, const DyadicCube&) = default;
};

struct Tube {
  Cap cap;
  std::array<long, 2> v{0, 0}; // sqrt(R)-lattice translate per axis
};

using CubeCollection = std::vector<DyadicCube>;

// Flat cell id with cx fastest: cx + sR*(cy + sR*cz).  Inverse of the
// decode used by the random-collection generator.
inline long cell_flat_index(const ScaleConfig& cfg, const DyadicCube& q) {
  long id = q.idx[0] + cfg.sR * q.idx[1];
  if (cfg.n == 3) id += cfg.sR * cfg.sR * q.idx[2];
  return id;
}

// All sR^(n) cells of [0,R]^n in flat-index order.
inline CubeCollection full_cell_grid(const ScaleConfig& cfg) {
  CubeCollection out;
  const long nz = cfg.n == 3 ? cfg.sR : 1;
  out.reserve(std::size_t(cfg.sR * cfg.sR * nz));
  for (long cz = 0; cz < nz; ++cz)
    for (long cy = 0; cy < cfg.sR; ++cy)
      for (long cx = 0; cx < cfg.sR; ++cx)
        out.push_back(DyadicCube{{cx, cy, cz}});
  return out;
}

// Cap center per axis: xi_c = -1 + (c + 1/2)/sqrt(R).
inline double cap_center(const ScaleConfig& cfg, long c) {
  if (c < 0 || c >= cfg.ncaps) throw ConfigError("cap index out of range");
  return -1.0 + (double(c) + 0.5) / double(cfg.sR);
}

inline std::array<double, 2> cap_center_vec(const ScaleConfig& cfg, const Cap& cap) {
  std::array<double, 2> x{cap_center(cfg, cap.idx[0]), 0.0};
  if (cfg.n == 3) x[1] = cap_center(cfg, cap.idx[1]);
  return x;
}

// Unit tangent of the light ray with frequency xi: (-2 xi, 1)/|(-2 xi, 1)|.
// Throws when xi leaves the frequency domain [-1, 1]^(n-1).
inline std::array<double, 3> direction_of_cap(const ScaleConfig& cfg,
                                              const std::array<double, 2>& xi) {
  for (int i = 0; i < cfg.d(); ++i)
    if (!(xi[std::size_t(i)] >= -1.0 && xi[std::size_t(i)] <= 1.0))
      throw ConfigError("direction_of_cap: xi outside [-1,1]^(n-1)");
  double n2 = 1.0;
  for (int i = 0; i < cfg.d(); ++i) n2 += 4.0 * xi[std::size_t(i)] * xi[std::size_t(i)];
  double inv = 1.0 / std::sqrt(n2);
  std::array<double, 3> d{0, 0, 0};
  for (int i = 0; i < cfg.d(); ++i) d[std::size_t(i)] = -2.0 * xi[std::size_t(i)] * inv;
  d[std::size_t(cfg.d())] = inv;
  return d;
}

// |det| of the n direction vectors of n caps; permutation invariant.
// Values >= c_n = 0.01 count as transverse.
inline constexpr double kTransversalityThreshold = 0.01;

inline double transversality_volume(const ScaleConfig& cfg,
                                    const std::vector<std::array<double, 2>>& xis) {
  if (long(xis.size()) != cfg.n)
    throw ConfigError("transversality_volume: need n frequency points");
  if (cfg.n == 2) {
    auto a = direction_of_cap(cfg, xis[0]);
    auto b = direction_of_cap(cfg, xis[1]);
    return std::abs(a[0] * b[1] - a[1] * b[0]);
  }
  auto a = direction_of_cap(cfg, xis[0]);
  auto b = direction_of_cap(cfg, xis[1]);
  auto c = direction_of_cap(cfg, xis[2]);
  double det = a[0] * (b[1] * c[2] - b[2] * c[1]) -
               a[1] * (b[0] * c[2] - b[2] * c[0]) +
               a[2] * (b[0] * c[1] - b[1] * c[0]);
  return std::abs(det);
}

// Distance from the cube center to the tube's axis segment.
inline double cube_axis_distance(const ScaleConfig& cfg, const Tube& t,
                                 const DyadicCube& q) {
  const double R = double(cfg.R), sR = double(cfg.sR);
  auto xc = cap_center_vec(cfg, t.cap);
  // Segment a + s*(b-a), s in [0,1]: a = (-v, 0), b = (-v - 2 xi R, R).
  double ax = -double(t.v[0]), ay = cfg.n == 3 ? -double(t.v[1]) : 0.0;
  double dx = -2.0 * xc[0] * R, dy = cfg.n == 3 ? -2.0 * xc[1] * R : 0.0;
  double dz = R;
  double cx = (double(q.idx[0]) + 0.5) * sR;
  double cy = (double(q.idx[1]) + 0.5) * sR;
  double cz = (double(q.idx[2]) + 0.5) * sR;
  double px, py, pz;
  if (cfg.n == 2) {
    py = 0;
    double s = ((cx - ax) * dx + cy * dz) / (dx * dx + dz * dz);
    s = std::clamp(s, 0.0, 1.0);
    px = ax + s * dx;
    pz = s * dz;
    double ex = cx - px, ez = cy - pz;
    return std::sqrt(ex * ex + ez * ez);
  }
  double s = ((cx - ax) * dx + (cy - ay) * dy + cz * dz) / (dx * dx + dy * dy + dz * dz);
  s = std::clamp(s, 0.0, 1.0);
  px = ax + s * dx;
  py = ay + s * dy;
  pz = s * dz;
  double ex = cx - px, ey = cy - py, ez = cz - pz;
  return std::sqrt(ex * ex + ey * ey + ez * ez);
}

inline double fat_tube_radius(const ScaleConfig& cfg) {
  return std::pow(double(cfg.R), 0.5 + cfg.eps) +
         0.5 * std::sqrt(double(cfg.n)) * double(cfg.sR);
}

inline bool fat_tube_meets_cube(const ScaleConfig& cfg, const Tube& t,
                                const DyadicCube& q) {
  return cube_axis_distance(cfg, t, q) <= fat_tube_radius(cfg);
}

// Reference incidence: per-cube counts by the double loop.
inline std::vector<long> incidence_counts_brute(const ScaleConfig& cfg,
                                                const std::vector<Tube>& tubes,
                                                const CubeCollection& cubes) {
  std::vector<long> cnt(cubes.size(), 0);
  for (std::size_t qi = 0; qi < cubes.size(); ++qi)
    for (const Tube& t : tubes)
      if (fat_tube_meets_cube(cfg, t, cubes[qi])) ++cnt[qi];
  return cnt;
}

// Grid-indexed incidence: bucket cubes by cell, prefilter per tube by the
// axis position per slab, then apply the exact predicate to candidates.
// Agrees exactly with incidence_counts_brute by construction.
inline std::vector<long> incidence_counts(const ScaleConfig& cfg,
                                          const std::vector<Tube>& tubes,
                                          const CubeCollection& cubes) {
  const double sR = double(cfg.sR);
  const double rad = fat_tube_radius(cfg);
  // margin: if dist(center, segment) <= rad then the axis *line* evaluated at
  // the cube's height is within rad + slope * rad <= 3 rad of the center
  // (slope = 2|xi| <= 2), so a 3 rad + cell box is a guaranteed superset.
  const double margin = 3.0 * rad + sR;
  std::map<std::array<long, 3>, std::vector<std::size_t>> buckets;
  long lo[3] = {0, 0, 0}, hi[3] = {0, 0, 0};
  bool first = true;
  for (std::size_t qi = 0; qi < cubes.size(); ++qi) {
    const auto& ix = cubes[qi].idx;
    buckets[ix].push_back(qi);
    for (int d = 0; d < 3; ++d) {
      if (first || ix[std::size_t(d)] < lo[d]) lo[d] = ix[std::size_t(d)];
      if (first || ix[std::size_t(d)] > hi[d]) hi[d] = ix[std::size_t(d)];
    }
    first = false;
  }
  std::vector<long> cnt(cubes.size(), 0);
  if (cubes.empty()) return cnt;
  const long zdim = cfg.n == 2 ? 1 : 2; // index of the vertical coordinate
  for (const Tube& t : tubes) {
    auto xc = cap_center_vec(cfg, t.cap);
    for (long cz = lo[zdim]; cz <= hi[zdim]; ++cz) {
      double zc = (double(cz) + 0.5) * sR;               // slab center height
      double axisx = -double(t.v[0]) - 2.0 * xc[0] * zc; // axis at slab center
      long cxlo = long(std::floor((axisx - margin) / sR));
      long cxhi = long(std::floor((axisx + margin) / sR));
      if (cfg.n == 2) {
        for (long cx = std::max(cxlo, lo[0]); cx <= std::min(cxhi, hi[0]); ++cx) {
          auto it = buckets.find({cx, cz, 0});
          if (it == buckets.end()) continue;
          for (std::size_t qi : it->second)
            if (fat_tube_meets_cube(cfg, t, cubes[qi])) ++cnt[qi];
        }
      } else {
        double axisy = -double(t.v[1]) - 2.0 * xc[1] * zc;
        long cylo = long(std::floor((axisy - margin) / sR));
        long cyhi = long(std::floor((axisy + margin) / sR));
        for (long cx = std::max(cxlo, lo[0]); cx <= std::min(cxhi, hi[0]); ++cx)
          for (long cy = std::max(cylo, lo[1]); cy <= std::min(cyhi, hi[1]); ++cy) {
            auto it = buckets.find({cx, cy, cz});
            if (it == buckets.end()) continue;
            for (std::size_t qi : it->second)
              if (fat_tube_meets_cube(cfg, t, cubes[qi])) ++cnt[qi];
          }
      }
    }
  }
  return cnt;
}

// ---------------------------------------------------------------------------
// horizontal partitions
// ---------------------------------------------------------------------------

// Blocks of a cube collection grouped by slab index floor(corner_n / sqrt(R)),
// optionally merging `rows_per_block` adjacent slabs (the blocked generator
// used by ensembles that need per-block cardinality above one slab's
// capacity; the single-slab partition is rows_per_block = 1).
struct HorizontalPartition {
  std::vector<std::vector<std::size_t>> blocks; // indices into the collection
  long sigma = 0;                               // min nonempty block size
};

inline HorizontalPartition horizontal_blocks(const ScaleConfig& cfg,
                                             const CubeCollection& cubes,
                                             long rows_per_block) {
  if (rows_per_block < 1)
    throw ConfigError("horizontal_blocks: rows_per_block must be >= 1");
  (void)cfg;
  std::map<long, std::vector<std::size_t>> by_block;
  const std::size_t zdim = cfg.n == 2 ? 1 : 2;
  for (std::size_t qi = 0; qi < cubes.size(); ++qi)
    by_block[cubes[qi].idx[zdim] / rows_per_block].push_back(qi);
  HorizontalPartition hp;
  for (auto& [b, qs] : by_block) hp.blocks.push_back(std::move(qs));
  hp.sigma = 0;
  for (auto& blk : hp.blocks) {
    long sz = long(blk.size());
    if (hp.sigma == 0 || sz < hp.sigma) hp.sigma = sz;
  }
  return hp;
}

// The canonical partition: one slab per block.
inline HorizontalPartition almost_horizontal_partition(const ScaleConfig& cfg,
                                                       const CubeCollection& cubes) {
  return horizontal_blocks(cfg, cubes, 1);
}

// Default admissible-incidence bound for almost-horizontal blocks: D_n = 6^n.
inline long default_block_incidence_bound(const ScaleConfig& cfg) {
  long d = 1;
  for (int i = 0; i < cfg.n; ++i) d *= 6;
  return d;
}

// Audit: the largest fat-tube incidence of any tube against one block.
inline long block_incidence_max(const ScaleConfig& cfg, const CubeCollection& cubes,
                                const std::vector<std::size_t>& block,
                                const std::vector<Tube>& tubes) {
  long best = 0;
  for (const Tube& t : tubes) {
    long c = 0;
    for (std::size_t qi : block)
      if (fat_tube_meets_cube(cfg, t, cubes[qi])) ++c;
    best = std::max(best, c);
  }
  return best;
}

} // namespace pex
