// SPDX-License-Identifier: MIT
//
// Core conventions shared by every module:
//
//   e(t) = exp(2*pi*i*t)
//   frequency grid: cell-centered, spacing ds = 1/(4R), G = 8R nodes per axis
//     covering [-1,1); xi_j = -1 + (j + 1/2) ds
//   spatial samples: cell-centered, x = x0 + i*h with x0 = h/2, h <= 1/4
//   x'-period of the lattice model: P = 1/ds = 4R
//   caps: side R^{-1/2}, m = 4 sqrt(R) frequency cells per cap per axis
//
// All randomness flows through Rng (mt19937_64 + rejection sampling) so that
// results are bit-reproducible across platforms and standard libraries.
#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace pex {

using cplx = std::complex<double>;
inline constexpr double kPi = 3.14159265358979323846;

// e(t) = exp(2 pi i t)
inline cplx e(double t) {
  double a = 2.0 * kPi * t;
  return {std::cos(a), std::sin(a)};
}

// Thrown when a configuration value is out of contract.  The message names
// the offending field so the CLI can report it verbatim (exit code 1).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when a pipeline invariant fails (exit code 2 in the CLI).
struct InvariantError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Scale parameters for one experiment instance.
//
// n is the spatial dimension (2 or 3; frequencies live in n-1 dimensions).
// R must be a power of two, at least 64, with integer square root.
struct ScaleConfig {
  int n = 2;
  long R = 256;
  double eps = 0.1;
  double h = 0.25;

  long sR = 0;    // sqrt(R): cube side and cap count scale
  long G = 0;     // frequency nodes per axis (8R)
  long m = 0;     // frequency cells per cap per axis (4 sqrt(R))
  long ncaps = 0; // caps per frequency axis (2 sqrt(R))
  long P = 0;     // x'-period of the lattice model (4R)
  long L = 0;     // row transform length (P / h)
  double ds = 0;  // frequency spacing 1/(4R)

  ScaleConfig() { init(); }
  ScaleConfig(int n_, long R_, double eps_ = 0.1, double h_ = 0.25)
      : n(n_), R(R_), eps(eps_), h(h_) {
    init();
  }

  void init() {
    if (n != 2 && n != 3) throw ConfigError("scale.n: must be 2 or 3");
    if (R < 64 || (R & (R - 1)) != 0)
      throw ConfigError("scale.R: must be a power of two >= 64");
    sR = std::lround(std::sqrt(double(R)));
    if (sR * sR != R)
      throw ConfigError("scale.R: must have an integer square root");
    if (!(eps > 0.0 && eps <= 0.25))
      throw ConfigError("scale.eps: must lie in (0, 0.25]");
    if (!(h > 0.0 && h <= 0.25))
      throw ConfigError("scale.h: must lie in (0, 1/4]");
    double cells = double(sR) / h;
    if (std::abs(cells - std::lround(cells)) > 1e-9)
      throw ConfigError("scale.h: sqrt(R)/h must be an integer");
    ds = 1.0 / double(4 * R);
    G = 8 * R;
    m = 4 * sR;
    ncaps = 2 * sR;
    P = 4 * R;
    L = std::lround(double(P) / h);
  }

  // Critical exponent p = 2(n+1)/(n-1): 6 when n=2, 4 when n=3.
  double p() const { return 2.0 * (n + 1) / (n - 1); }
  // Number of frequency axes.
  int d() const { return n - 1; }
  // Frequency node j on one axis.
  double xi(long j) const { return -1.0 + (double(j) + 0.5) * ds; }
  // Total frequency nodes (G^(n-1)) and grid cells (R^(n/2)).
  long nodes() const { return n == 2 ? G : G * G; }
  long cells_per_axis() const { return sR; }
  long samples_per_cell() const { return std::lround(double(sR) / h); }
  long samples_per_axis() const { return std::lround(double(R) / h); }
};

// Largest power of two <= c for c > 0, else 0.
inline long dyadic_level(long c) {
  if (c <= 0) return 0;
  return long(std::bit_floor(static_cast<unsigned long>(c)));
}

// Dyadic exponent floor(log2 v) for v > 0, computed exactly from the
// floating-point representation.
inline int dyadic_exponent(double v) {
  if (!(v > 0.0)) throw InvariantError("dyadic_exponent: value must be positive");
  return std::ilogb(v);
}

// Deterministic RNG.  All downstream sampling uses rejection so the stream
// of variates is identical on every conforming platform.
struct Rng {
  std::mt19937_64 g;
  explicit Rng(std::uint64_t seed) : g(seed) {}

  std::uint64_t next() { return g(); }

  // Uniform integer in [0, bound) by rejection.
  std::uint64_t bounded(std::uint64_t bound) {
    if (bound == 0) throw InvariantError("Rng::bounded: bound must be positive");
    std::uint64_t threshold = (~bound + 1) % bound; // 2^64 mod bound
    for (;;) {
      std::uint64_t r = next();
      if (r >= threshold) return r % bound;
    }
  }

  // Uniform double in [0, 1) with 53 random bits.
  double unit() { return double(next() >> 11) * 0x1.0p-53; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = std::size_t(bounded(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct values from [0, N), in sampling order.
  std::vector<long> sample_without_replacement(long N, long k) {
    if (k > N) throw InvariantError("Rng::sample: k exceeds population");
    // Floyd's algorithm keeps the draw count at k regardless of N.
    std::vector<long> out;
    out.reserve(std::size_t(k));
    std::vector<bool> seen; // used only for small N
    if (N <= 1 << 22) {
      seen.assign(std::size_t(N), false);
      for (long i = N - k; i < N; ++i) {
        long t = long(bounded(std::uint64_t(i) + 1));
        if (seen[std::size_t(t)]) t = i;
        seen[std::size_t(t)] = true;
        out.push_back(t);
      }
    } else {
      for (long i = N - k; i < N; ++i) {
        long t = long(bounded(std::uint64_t(i) + 1));
        bool dup = false;
        for (long s : out) dup = dup || (s == t);
        out.push_back(dup ? i : t);
      }
    }
    return out;
  }
};

// FNV-1a 64-bit hash, used to stamp configurations into output files.
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t hsh = 14695981039346656037ull;
  for (unsigned char c : s) {
    hsh ^= c;
    hsh *= 1099511628211ull;
  }
  return hsh;
}

// Deterministic "%.12g" formatting (used for CSV so replays are byte-equal).
inline std::string fmt_g(double v, int digits = 12) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

// Closed-form least-squares fit of log(value) against log(scale).
// Requires at least three points.  Returns {slope, stderr_of_slope}.
struct FitResult {
  double slope = 0.0;
  double stderr_slope = 0.0;
  double intercept = 0.0;
  int npoints = 0;
};

inline FitResult fit_exponent(const std::vector<std::pair<double, double>>& pts) {
  if (pts.size() < 3)
    throw InvariantError("fit_exponent: need at least 3 points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (auto& [s, v] : pts) {
    if (!(s > 0.0) || !(v > 0.0))
      throw InvariantError("fit_exponent: scales and values must be positive");
    double x = std::log(s), y = std::log(v);
    sx += x; sy += y; sxx += x * x; sxy += x * y;
  }
  double nn = double(pts.size());
  double den = nn * sxx - sx * sx;
  if (den <= 0.0) throw InvariantError("fit_exponent: degenerate abscissae");
  FitResult fr;
  fr.npoints = int(pts.size());
  fr.slope = (nn * sxy - sx * sy) / den;
  fr.intercept = (sy - fr.slope * sx) / nn;
  double ss = 0;
  for (auto& [s, v] : pts) {
    double x = std::log(s), y = std::log(v);
    double r = y - (fr.intercept + fr.slope * x);
    ss += r * r;
  }
  if (pts.size() > 2)
    fr.stderr_slope = std::sqrt(ss / (nn - 2.0) * nn / den);
  return fr;
}

} // namespace pex
