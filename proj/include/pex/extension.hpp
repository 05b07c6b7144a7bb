// SPDX-License-Identifier: MIT
//
// The extension-operator engine.
//
//   Ef(x) = integral over [-1,1]^(n-1) of f(xi) e(xi . x' + |xi|^2 x_n) dxi
//
// Two quadrature tiers share one chirp + FFT factorization:
//
//   lattice tier   (spacing ds = 1/(4R)): the discrete model every packet
//                  identity is exact for; used by all norm tables, packet
//                  fields and selection pipelines.
//   refined tier   (spacing ds/4, piecewise-constant midpoint subdivision):
//                  reference quadrature for pointwise evaluation
//                  (evaluate_direct, evaluate_fast).
//
// Row factorization (n = 2): with xi_j = -1 + (j+1/2) ds and x1 = x0 + i h,
//
//   sum_j f_j e(xi_j x1 + xi_j^2 x2)
//     = e(x1 (ds/2 - 1)) * sum_j [f_j e(xi_j^2 x2) e(j ds x0)] e(i j / L)
//
// so one unnormalized backward FFT of length L = P/h evaluates a whole row.
// n = 3 uses the same factorization per axis on x3-planes.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <thread>

#include "pex/fft.hpp"
#include "pex/profile.hpp"

namespace pex {

// ---------------------------------------------------------------------------
// per-cell norm tables
// ---------------------------------------------------------------------------

// Accumulated h^n * sum |Ef|^p per sqrt(R)-cell.  Index order (cx, cy[, cz]).
struct CellTable {
  int n = 2;
  long sR = 0;
  std::vector<double> v;

  CellTable() = default;
  CellTable(int n_, long sR_)
      : n(n_), sR(sR_),
        v(std::size_t(n_ == 2 ? sR_ * sR_ : sR_ * sR_ * sR_), 0.0) {}

  double& at(long cx, long cy, long cz = 0) {
    return v[std::size_t((cz * sR + cy) * sR + cx)];
  }
  double at(long cx, long cy, long cz = 0) const {
    return v[std::size_t((cz * sR + cy) * sR + cx)];
  }
  double total() const {
    double s = 0;
    for (double x : v) s += x;
    return s;
  }
};

// L^2 and L^p tables for one profile (p = critical exponent unless overridden).
struct NormTables {
  double p = 6.0;
  CellTable l2;
  CellTable lp;
};

// ---------------------------------------------------------------------------
// n = 2 row engine
// ---------------------------------------------------------------------------

namespace detail {

// Fill `out` (length >= L, zero-padded) with A_j = f_j e(xi_j^2 x2) e(j ds x0)
// given a precomputed chirp c_j = e(xi_j^2 x2).
inline void build_row_input(const Profile& f, const std::vector<cplx>& chirp,
                            const std::vector<cplx>& twist, FftBuf& out) {
  const long G = f.cfg.G;
  for (long j = 0; j < G; ++j)
    out[std::size_t(j)] = f.a[std::size_t(j)] * chirp[std::size_t(j)] * twist[std::size_t(j)];
  for (long j = G; j < long(out.size()); ++j) out[std::size_t(j)] = cplx{0, 0};
}

inline std::vector<cplx> twist_factors(const ScaleConfig& cfg, double x0) {
  std::vector<cplx> t(std::size_t(cfg.G));
  for (long j = 0; j < cfg.G; ++j) t[std::size_t(j)] = e(double(j) * cfg.ds * x0);
  return t;
}

inline std::vector<cplx> chirp_factors(const ScaleConfig& cfg, double x2) {
  std::vector<cplx> c(std::size_t(cfg.G));
  for (long j = 0; j < cfg.G; ++j) {
    double xi = cfg.xi(j);
    c[std::size_t(j)] = e(xi * xi * x2);
  }
  return c;
}

inline std::vector<cplx> phase0_factors(const ScaleConfig& cfg, double x0, long L) {
  std::vector<cplx> ph(std::size_t(L), cplx{0, 0});
  for (long i = 0; i < L; ++i)
    ph[std::size_t(i)] = e((x0 + double(i) * cfg.h) * (cfg.ds / 2.0 - 1.0));
  return ph;
}

} // namespace detail

// Evaluate one lattice row: Ef(x0 + i*h, x2) for i in [0, L), x2 = (i2+1/2) h.
// The |values| are phase0-free only up to a unimodular factor, so callers that
// need complex values get the exact ones here.
inline std::vector<cplx> eval_row_lattice(const Profile& f, long i2,
                                          double x0_opt = -1.0) {
  if (f.cfg.n != 2) throw InvariantError("eval_row_lattice: n must be 2");
  const ScaleConfig& cfg = f.cfg;
  double x0 = x0_opt < 0 ? cfg.h / 2.0 : x0_opt;
  double x2 = (double(i2) + 0.5) * cfg.h;
  FftBuf in(std::size_t(cfg.L)), out(std::size_t(cfg.L));
  auto chirp = detail::chirp_factors(cfg, x2);
  auto twist = detail::twist_factors(cfg, x0);
  detail::build_row_input(f, chirp, twist, in);
  fft_backward(in, out);
  auto ph = detail::phase0_factors(cfg, x0, cfg.L);
  std::vector<cplx> row(std::size_t(cfg.L));
  for (long i = 0; i < cfg.L; ++i)
    row[std::size_t(i)] = cfg.ds * ph[std::size_t(i)] * out[std::size_t(i)];
  return row;
}

// Stream lattice rows for several profiles at once, sharing the chirp per row.
// cb(profile_index, i2, values) receives |Ef| at the L row samples (modulus
// only; phase0 is unimodular and dropped).  Rows are delivered in increasing
// i2 order for each chunk; chunks are merged in index order, so the callback
// order is deterministic for any thread count.
inline void stream_rows_abs(const std::vector<const Profile*>& fs,
                            const std::vector<long>& i2_list, int threads,
                            const std::function<void(std::size_t, long, const std::vector<double>&)>& cb) {
  if (fs.empty() || i2_list.empty()) return;
  const ScaleConfig& cfg = fs[0]->cfg;
  if (cfg.n != 2) throw InvariantError("stream_rows_abs: n must be 2");
  for (auto* f : fs)
    if (f->cfg.G != cfg.G || f->cfg.L != cfg.L)
      throw InvariantError("stream_rows_abs: mismatched profile scales");
  const double x0 = cfg.h / 2.0;
  threads = std::max(1, threads);
  // Rows are produced window by window so the in-flight buffer stays bounded
  // (~64 MB) for any profile count and row length; callbacks fire on the
  // calling thread in (row, profile) order, deterministic for any thread
  // count.
  const long budget = (64L << 20) / (8L * long(fs.size()) * cfg.L);
  const long window = std::max<long>(1, std::min<long>(64, budget));
  const long nrows = long(i2_list.size());

  auto twist = detail::twist_factors(cfg, x0);
  std::vector<std::vector<std::vector<double>>> buf; // [row in window][profile]
  for (long w0 = 0; w0 < nrows; w0 += window) {
    const long w1 = std::min(nrows, w0 + window);
    buf.assign(std::size_t(w1 - w0), {});
    auto worker = [&](long k0, long k1) {
      FftBuf in{std::size_t(cfg.L)}, out{std::size_t(cfg.L)};
      for (long k = k0; k < k1; ++k) {
        long i2 = i2_list[std::size_t(k)];
        double x2 = (double(i2) + 0.5) * cfg.h;
        auto chirp = detail::chirp_factors(cfg, x2);
        auto& per = buf[std::size_t(k - w0)];
        per.resize(fs.size());
        for (std::size_t t = 0; t < fs.size(); ++t) {
          detail::build_row_input(*fs[t], chirp, twist, in);
          fft_backward(in, out);
          per[t].resize(std::size_t(cfg.L));
          for (long i = 0; i < cfg.L; ++i)
            per[t][std::size_t(i)] = cfg.ds * std::abs(out[std::size_t(i)]);
        }
      }
    };
    if (threads == 1) {
      worker(w0, w1);
    } else {
      std::vector<std::thread> pool;
      long per = (w1 - w0 + threads - 1) / threads;
      for (int t = 0; t < threads; ++t) {
        long k0 = w0 + t * per, k1 = std::min(w1, k0 + per);
        if (k0 < k1) pool.emplace_back(worker, k0, k1);
      }
      for (auto& th : pool) th.join();
    }
    for (long k = w0; k < w1; ++k)
      for (std::size_t t = 0; t < fs.size(); ++t)
        cb(t, i2_list[std::size_t(k)], buf[std::size_t(k - w0)][t]);
  }
}

// Full-grid (or cell-row-restricted) L^2/L^p tables for several profiles.
inline std::vector<NormTables> norm_tables_multi(
    const std::vector<const Profile*>& fs, double p,
    const std::optional<std::vector<long>>& cell_rows = std::nullopt,
    int threads = 1) {
  if (fs.empty()) return {};
  const ScaleConfig& cfg = fs[0]->cfg;
  if (cfg.n != 2) throw InvariantError("norm_tables_multi: n must be 2 (use cube_norm_tables3 for n=3)");
  const long spc = cfg.samples_per_cell();
  const long nx1 = cfg.samples_per_axis();
  std::vector<long> rows;
  if (cell_rows) {
    for (long cy : *cell_rows)
      for (long s = 0; s < spc; ++s) rows.push_back(cy * spc + s);
  } else {
    for (long i2 = 0; i2 < nx1; ++i2) rows.push_back(i2);
  }
  std::vector<NormTables> tabs(fs.size());
  for (auto& t : tabs) {
    t.p = p;
    t.l2 = CellTable(2, cfg.sR);
    t.lp = CellTable(2, cfg.sR);
  }
  const double h2 = cfg.h * cfg.h;
  stream_rows_abs(fs, rows, threads,
                  [&](std::size_t t, long i2, const std::vector<double>& v) {
                    long cy = i2 / spc;
                    for (long cx = 0; cx < cfg.sR; ++cx) {
                      double s2 = 0, sp = 0;
                      for (long s = 0; s < spc; ++s) {
                        double a = v[std::size_t(cx * spc + s)];
                        double a2 = a * a;
                        s2 += a2;
                        sp += (p == 2.0) ? a2 : std::pow(a, p);
                      }
                      tabs[t].l2.at(cx, cy) += h2 * s2;
                      tabs[t].lp.at(cx, cy) += h2 * sp;
                    }
                  });
  return tabs;
}

inline NormTables norm_tables(const Profile& f, double p, int threads = 1) {
  return norm_tables_multi({&f}, p, std::nullopt, threads)[0];
}

// ---------------------------------------------------------------------------
// pointwise evaluation
// ---------------------------------------------------------------------------

// Reference quadrature: midpoint rule on the 4x-refined grid (dq = ds/4),
// the profile held piecewise constant on its storage cells.
inline cplx evaluate_direct(const Profile& f, const std::array<double, 3>& x) {
  const ScaleConfig& cfg = f.cfg;
  const int refine = 4;
  const double dq = cfg.ds / refine;
  if (cfg.n == 2) {
    cplx s{0, 0};
    for (long j = 0; j < cfg.G; ++j) {
      const cplx fj = f.a[std::size_t(j)];
      if (fj == cplx{0, 0}) continue;
      for (int r = 0; r < refine; ++r) {
        double xi = -1.0 + (double(j * refine + r) + 0.5) * dq;
        s += fj * e(xi * x[0] + xi * xi * x[1]);
      }
    }
    return dq * s;
  }
  cplx s{0, 0};
  for (long j1 = 0; j1 < cfg.G; ++j1)
    for (long j2 = 0; j2 < cfg.G; ++j2) {
      const cplx fj = f.a[std::size_t(j1 * cfg.G + j2)];
      if (fj == cplx{0, 0}) continue;
      for (int r1 = 0; r1 < refine; ++r1)
        for (int r2 = 0; r2 < refine; ++r2) {
          double u = -1.0 + (double(j1 * refine + r1) + 0.5) * dq;
          double w = -1.0 + (double(j2 * refine + r2) + 0.5) * dq;
          s += fj * e(u * x[0] + w * x[1] + (u * u + w * w) * x[2]);
        }
    }
  return dq * dq * s;
}

// Fast evaluator on lattice sample points (same refined quadrature as
// evaluate_direct, factored through a chirp + FFT per row).  Points must lie
// on the sample lattice x = (i + 1/2) h; off-lattice coordinates throw.
inline std::vector<cplx> evaluate_fast(const Profile& f,
                                       const std::vector<std::array<double, 3>>& pts) {
  const ScaleConfig& cfg = f.cfg;
  if (cfg.n != 2)
    throw InvariantError("evaluate_fast: n=3 path not wired for arbitrary points; use plane_lattice3");
  const int refine = 4;
  const double dq = cfg.ds / refine;
  const long Lq = cfg.L * refine;
  const double x0 = cfg.h / 2.0;

  auto lattice_index = [&](double x, const char* which) {
    double t = (x - x0) / cfg.h;
    long i = std::lround(t);
    if (std::abs(t - double(i)) > 1e-9)
      throw ConfigError(std::string("evaluate_fast: ") + which + " not on the sample lattice");
    return i;
  };

  // Group points by row.
  std::map<long, std::vector<std::size_t>> by_row;
  for (std::size_t k = 0; k < pts.size(); ++k)
    by_row[lattice_index(pts[k][1], "x2")].push_back(k);

  std::vector<cplx> out(pts.size());
  FftBuf in{std::size_t(Lq)}, buf{std::size_t(Lq)};
  for (auto& [i2, ks] : by_row) {
    double x2 = (double(i2) + 0.5) * cfg.h;
    for (long l = 0; l < Lq; ++l) in[std::size_t(l)] = cplx{0, 0};
    for (long j = 0; j < cfg.G; ++j) {
      const cplx fj = f.a[std::size_t(j)];
      if (fj == cplx{0, 0}) continue;
      for (int r = 0; r < refine; ++r) {
        long l = j * refine + r;
        double xi = -1.0 + (double(l) + 0.5) * dq;
        in[std::size_t(l)] = fj * e(xi * xi * x2) * e(double(l) * dq * x0);
      }
    }
    fft_backward(in, buf);
    for (std::size_t k : ks) {
      long i = lattice_index(pts[k][0], "x1");
      long iw = ((i % Lq) + Lq) % Lq; // field is P-periodic in x1
      double x1 = x0 + double(i) * cfg.h;
      out[k] = dq * e(x1 * (dq / 2.0 - 1.0)) * buf[std::size_t(iw)];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// n = 3 plane engine (fields on cube unions only)
// ---------------------------------------------------------------------------

namespace detail {

// Separable two-stage plane evaluation for n = 3, truncated to the
// [0, R)^2 sample window (the field is P-periodic per axis; everything the
// norm tables and packet constants need lives in the first quarter-period).
// Rows of zero frequency mass skip their stage-1 transform, which makes
// sparse class subprofiles cheap.  Writes row-major plane[i1 * nx + i2].
inline void plane_restricted3(const Profile& f, const std::vector<cplx>& chirp3,
                              const std::vector<cplx>& twist,
                              const std::vector<cplx>& phase0, FftBuf& in,
                              FftBuf& out, std::vector<cplx>& mid,
                              std::vector<cplx>& plane) {
  const ScaleConfig& cfg = f.cfg;
  const long L = cfg.L, G = cfg.G, nx = cfg.samples_per_axis();
  mid.resize(std::size_t(G * nx));
  plane.assign(std::size_t(nx * nx), cplx{0, 0});

  // stage 1: per xi1 row, transform xi2 -> x2, keep x2 in [0, R)
  bool any = false;
  for (long j1 = 0; j1 < G; ++j1) {
    const cplx* row = f.a.data() + j1 * G;
    cplx* dst = mid.data() + j1 * nx;
    bool nz = false;
    for (long j2 = 0; j2 < G; ++j2)
      if (row[j2] != cplx{0, 0}) {
        nz = true;
        break;
      }
    if (!nz) {
      std::fill(dst, dst + nx, cplx{0, 0});
      continue;
    }
    any = true;
    for (long j2 = 0; j2 < G; ++j2)
      in[std::size_t(j2)] =
          row[j2] * chirp3[std::size_t(j2)] * twist[std::size_t(j2)];
    for (long j2 = G; j2 < L; ++j2) in[std::size_t(j2)] = cplx{0, 0};
    fft_backward(in, out);
    for (long i2 = 0; i2 < nx; ++i2)
      dst[i2] = phase0[std::size_t(i2)] * out[std::size_t(i2)];
  }
  if (!any) return;

  // stage 2: per kept x2 column, transform xi1 -> x1, keep x1 in [0, R)
  const double ds2 = cfg.ds * cfg.ds;
  for (long i2 = 0; i2 < nx; ++i2) {
    for (long j1 = 0; j1 < G; ++j1)
      in[std::size_t(j1)] = mid[std::size_t(j1 * nx + i2)] *
                            chirp3[std::size_t(j1)] * twist[std::size_t(j1)];
    for (long j1 = G; j1 < L; ++j1) in[std::size_t(j1)] = cplx{0, 0};
    fft_backward(in, out);
    for (long i1 = 0; i1 < nx; ++i1)
      plane[std::size_t(i1 * nx + i2)] =
          ds2 * phase0[std::size_t(i1)] * out[std::size_t(i1)];
  }
}

} // namespace detail

// Evaluate one x3-plane of the lattice field on the [0, R)^2 sample window.
// Row-major out[i1 * nx + i2] = Ef(x0 + i1 h, x0 + i2 h, x3), nx = R/h.
inline void eval_plane_lattice3(const Profile& f, long i3, std::vector<cplx>& plane) {
  const ScaleConfig& cfg = f.cfg;
  if (cfg.n != 3) throw InvariantError("eval_plane_lattice3: n must be 3");
  const double x0 = cfg.h / 2.0;
  const double x3 = (double(i3) + 0.5) * cfg.h;
  auto chirp3 = detail::chirp_factors(cfg, x3);
  auto twist = detail::twist_factors(cfg, x0);
  auto phase0 = detail::phase0_factors(cfg, x0, cfg.L);
  FftBuf in{std::size_t(cfg.L)}, out{std::size_t(cfg.L)};
  std::vector<cplx> mid;
  detail::plane_restricted3(f, chirp3, twist, phase0, in, out, mid, plane);
}

// n = 3 L^2/L^p tables restricted to the z-slabs of a cube collection.
// Planes outside the needed x3 range are never evaluated; table entries for
// unvisited slabs stay zero.
template <class CubeRange>
inline std::vector<NormTables> cube_norm_tables3(
    const std::vector<const Profile*>& fs, const CubeRange& cubes, double p) {
  if (fs.empty()) return {};
  const ScaleConfig& cfg = fs[0]->cfg;
  if (cfg.n != 3) throw InvariantError("cube_norm_tables3: n must be 3");
  std::vector<long> zcells;
  for (const auto& c : cubes) zcells.push_back(c[2]);
  std::sort(zcells.begin(), zcells.end());
  zcells.erase(std::unique(zcells.begin(), zcells.end()), zcells.end());
  std::vector<NormTables> tabs(fs.size());
  for (auto& t : tabs) {
    t.p = p;
    t.l2 = CellTable(3, cfg.sR);
    t.lp = CellTable(3, cfg.sR);
  }
  const long spc = cfg.samples_per_cell();
  const long nx = cfg.samples_per_axis();
  const double x0 = cfg.h / 2.0;
  const double h3 = cfg.h * cfg.h * cfg.h;
  auto twist = detail::twist_factors(cfg, x0);
  auto phase0 = detail::phase0_factors(cfg, x0, cfg.L);
  FftBuf in{std::size_t(cfg.L)}, out{std::size_t(cfg.L)};
  std::vector<cplx> mid, plane;
  for (long cz : zcells)
    for (long s = 0; s < spc; ++s) {
      long i3 = cz * spc + s;
      auto chirp3 = detail::chirp_factors(cfg, (double(i3) + 0.5) * cfg.h);
      for (std::size_t t = 0; t < fs.size(); ++t) {
        detail::plane_restricted3(*fs[t], chirp3, twist, phase0, in, out, mid,
                                  plane);
        for (long i1 = 0; i1 < nx; ++i1) {
          long c1 = i1 / spc;
          for (long i2 = 0; i2 < nx; ++i2) {
            double a = std::abs(plane[std::size_t(i1 * nx + i2)]);
            double a2 = a * a;
            tabs[t].l2.at(c1, i2 / spc, cz) += h3 * a2;
            tabs[t].lp.at(c1, i2 / spc, cz) += h3 * ((p == 2.0) ? a2 : std::pow(a, p));
          }
        }
      }
    }
  return tabs;
}

// ---------------------------------------------------------------------------
// region norms
// ---------------------------------------------------------------------------

// h^n sum_{samples in cubes} |Ef|^p read off cached tables (raw p-power
// mass; callers take the 1/p root).
template <class CubeRange>
inline double lp_norm_cells(const CellTable& tab, const CubeRange& cubes) {
  double s = 0;
  for (const auto& c : cubes) s += tab.at(c[0], c[1], c.size() > 2 ? c[2] : 0);
  return s;
}

// Mass of |Ef|^p over the periodically-wrapped window dist(x1, axis(x2)) <= W,
// x2 in [0, R); axis(x2) = -v - 2 xi_c x2.  Used for packet-norm constants.
inline double window_norm2(const Profile& f, double p, double xi_c, double v,
                           double W, int threads = 1) {
  const ScaleConfig& cfg = f.cfg;
  if (cfg.n != 2) throw InvariantError("window_norm2: n must be 2");
  const double x0 = cfg.h / 2.0;
  const long nx2 = cfg.samples_per_axis();
  std::vector<long> rows;
  rows.resize(std::size_t(nx2));
  for (long i = 0; i < nx2; ++i) rows[std::size_t(i)] = i;
  double acc = 0;
  const double Pd = double(cfg.P);
  stream_rows_abs({&f}, rows, threads,
                  [&](std::size_t, long i2, const std::vector<double>& val) {
                    double x2 = (double(i2) + 0.5) * cfg.h;
                    double axis = -v - 2.0 * xi_c * x2;
                    for (long i = 0; i < cfg.L; ++i) {
                      double x1 = x0 + double(i) * cfg.h;
                      double d = std::fmod(std::abs(x1 - axis), Pd);
                      d = std::min(d, Pd - d);
                      if (d <= W) acc += std::pow(val[std::size_t(i)], p);
                    }
                  });
  return std::pow(cfg.h * cfg.h * acc, 1.0 / p);
}

} // namespace pex
