// SPDX-License-Identifier: MIT
//
// Frequency profiles: complex samples on the cell-centered grid over
// [-1,1)^(n-1), plus generators (constant / smooth bump / random-phase bump),
// modulations, norms and (de)serialization.
#pragma once

#include <cstring>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pex/common.hpp"

namespace pex {

struct Profile {
  ScaleConfig cfg;
  std::vector<cplx> a; // G^(n-1) samples, row-major (j1*G + j2 when n=3)
  std::string tag;

  Profile() = default;
  explicit Profile(const ScaleConfig& c, std::string t = "zero")
      : cfg(c), a(std::size_t(c.nodes()), cplx{0.0, 0.0}), tag(std::move(t)) {}

  long size() const { return long(a.size()); }

  // Frequency coordinates of flat node index k.
  std::array<double, 2> xi_of(long k) const {
    if (cfg.n == 2) return {cfg.xi(k), 0.0};
    return {cfg.xi(k / cfg.G), cfg.xi(k % cfg.G)};
  }
  double xi_norm2_of(long k) const {
    auto x = xi_of(k);
    return cfg.n == 2 ? x[0] * x[0] : x[0] * x[0] + x[1] * x[1];
  }
};

// sqrt( ds^(n-1) * sum |a|^2 )
inline double l2_norm(const Profile& f) {
  double s = 0;
  for (const cplx& z : f.a) s += std::norm(z);
  double meas = f.cfg.n == 2 ? f.cfg.ds : f.cfg.ds * f.cfg.ds;
  return std::sqrt(meas * s);
}

inline cplx inner(const Profile& f, const Profile& g) {
  if (f.size() != g.size()) throw InvariantError("inner: size mismatch");
  cplx s{0, 0};
  for (long k = 0; k < f.size(); ++k) s += f.a[std::size_t(k)] * std::conj(g.a[std::size_t(k)]);
  double meas = f.cfg.n == 2 ? f.cfg.ds : f.cfg.ds * f.cfg.ds;
  return meas * s;
}

// Axis-aligned frequency box, [lo, hi) per axis.
struct FreqBox {
  std::array<double, 2> lo{-1.0, -1.0};
  std::array<double, 2> hi{1.0, 1.0};
  bool contains(const std::array<double, 2>& x, int d) const {
    for (int i = 0; i < d; ++i)
      if (!(x[std::size_t(i)] > lo[std::size_t(i)] && x[std::size_t(i)] < hi[std::size_t(i)])) return false;
    return true;
  }
};

// f = 1 on the box, 0 outside.
inline Profile profile_constant(const ScaleConfig& cfg, const FreqBox& box = {}) {
  Profile f(cfg, "constant");
  for (long k = 0; k < f.size(); ++k)
    if (box.contains(f.xi_of(k), cfg.d())) f.a[std::size_t(k)] = 1.0;
  return f;
}

// Separable C^inf bump exp(1 - 1/(1-s^2)) per axis, s the box-normalized
// coordinate; vanishes at the box boundary to all orders.
inline Profile profile_bump(const ScaleConfig& cfg, const FreqBox& box = {}) {
  Profile f(cfg, "bump");
  for (long k = 0; k < f.size(); ++k) {
    auto x = f.xi_of(k);
    if (!box.contains(x, cfg.d())) continue;
    double amp = 1.0;
    for (int i = 0; i < cfg.d(); ++i) {
      double s = (2.0 * x[std::size_t(i)] - (box.lo[std::size_t(i)] + box.hi[std::size_t(i)])) /
                 (box.hi[std::size_t(i)] - box.lo[std::size_t(i)]);
      double u = 1.0 - s * s;
      amp *= (u > 1e-300) ? std::exp(1.0 - 1.0 / u) : 0.0;
    }
    f.a[std::size_t(k)] = amp;
  }
  return f;
}

// Bump with an i.i.d. uniform phase on every frequency node.
inline Profile profile_random_phase_bump(const ScaleConfig& cfg, const FreqBox& box,
                                         std::uint64_t seed) {
  Profile f = profile_bump(cfg, box);
  f.tag = "random-phase-bump";
  Rng rng(seed);
  for (cplx& z : f.a) {
    double ph = rng.unit();
    z *= e(ph);
  }
  return f;
}

// Multiply by e(focus * |xi|^2); shifts the field apex to x_n = -focus.
inline Profile modulate_focus(Profile f, double focus) {
  for (long k = 0; k < f.size(); ++k)
    f.a[std::size_t(k)] *= e(focus * f.xi_norm2_of(k));
  f.tag += "+focus";
  return f;
}

// Multiply by e(shift . xi); translates the field by `shift` in x'.
inline Profile modulate_translate(Profile f, const std::array<double, 2>& shift) {
  for (long k = 0; k < f.size(); ++k) {
    auto x = f.xi_of(k);
    double t = shift[0] * x[0] + (f.cfg.n == 3 ? shift[1] * x[1] : 0.0);
    f.a[std::size_t(k)] *= e(t);
  }
  f.tag += "+shift";
  return f;
}

// ---- serialization ----
//
// Binary layout: magic "PEXPROF1", n, R (int64), eps, h (doubles),
// tag length + bytes, then 2*G^(n-1) little-endian doubles.

inline void save_profile(const Profile& f, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("save_profile: cannot open " + path);
  const char magic[8] = {'P', 'E', 'X', 'P', 'R', 'O', 'F', '1'};
  os.write(magic, 8);
  std::int64_t n = f.cfg.n, R = f.cfg.R, tl = std::int64_t(f.tag.size());
  os.write(reinterpret_cast<const char*>(&n), 8);
  os.write(reinterpret_cast<const char*>(&R), 8);
  os.write(reinterpret_cast<const char*>(&f.cfg.eps), 8);
  os.write(reinterpret_cast<const char*>(&f.cfg.h), 8);
  os.write(reinterpret_cast<const char*>(&tl), 8);
  os.write(f.tag.data(), std::streamsize(f.tag.size()));
  os.write(reinterpret_cast<const char*>(f.a.data()),
           std::streamsize(sizeof(cplx) * f.a.size()));
  if (!os) throw ConfigError("save_profile: write failed for " + path);
}

inline Profile load_profile(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("load_profile: cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (std::memcmp(magic, "PEXPROF1", 8) != 0)
    throw ConfigError("load_profile: bad magic in " + path);
  std::int64_t n, R, tl;
  double eps, h;
  is.read(reinterpret_cast<char*>(&n), 8);
  is.read(reinterpret_cast<char*>(&R), 8);
  is.read(reinterpret_cast<char*>(&eps), 8);
  is.read(reinterpret_cast<char*>(&h), 8);
  is.read(reinterpret_cast<char*>(&tl), 8);
  ScaleConfig cfg(int(n), long(R), eps, h);
  Profile f(cfg);
  f.tag.resize(std::size_t(tl));
  is.read(f.tag.data(), tl);
  is.read(reinterpret_cast<char*>(f.a.data()),
          std::streamsize(sizeof(cplx) * f.a.size()));
  if (!is) throw ConfigError("load_profile: truncated file " + path);
  return f;
}

inline nlohmann::json profile_meta_json(const Profile& f) {
  return {{"n", f.cfg.n}, {"R", f.cfg.R},     {"eps", f.cfg.eps},
          {"h", f.cfg.h}, {"tag", f.tag},     {"nodes", f.size()},
          {"l2", l2_norm(f)}};
}

} // namespace pex
