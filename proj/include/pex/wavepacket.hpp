// SPDX-License-Identifier: MIT
//
// Wave-packet decomposition on the lattice model.
//
// Basis per cap theta (side R^{-1/2}), translate v on the sqrt(R) lattice:
//
//   e_{theta,v}(xi) = R^{(n-1)/4} e(v . xi) 1_theta(xi)
//
// which is exactly orthonormal for <f,g> = ds^(n-1) sum f conj(g).  Within a
// cap the m = 4 sqrt(R) translates with distinct residues mod P span the cap
// samples completely, so keeping all residues reproduces f exactly.  The
// representative of each residue class is the unique v in
// [v_center - P/2, v_center + P/2); this matters because e((v+P) xi_j)
// = -e(v xi_j) on the half-integer grid: mixing representatives of the same
// residue would break orthonormality.
//
// A packet is kept when its tube meets the window wf * [-R, 2R]^n, i.e.
// per axis v in [-b - 2 max(xi_c,0) R, -a - 2 min(xi_c,0) R] with
// [a, b] = wf * [-R, 2R] (plus a fixed 2 sqrt(R) pad).
#pragma once

#include <map>
#include <numeric>

#include "pex/extension.hpp"
#include "pex/geometry.hpp"

namespace pex {

struct WavePacket {
  Cap cap;
  std::array<long, 2> v{0, 0};
  cplx coef{0, 0};
  bool kept = false;
};

struct Decomposition {
  ScaleConfig cfg;
  double wf = 3.0;
  std::vector<WavePacket> packets;
  Profile residual;

  double weight(std::size_t i) const {
    return std::abs(packets[i].coef) *
           std::pow(double(cfg.R), -0.25 * (cfg.n - 1));
  }
  Tube tube(std::size_t i) const { return Tube{packets[i].cap, packets[i].v}; }
};

namespace detail {

struct AxisWindow {
  double vmin, vmax;
  long t0; // representatives are sR * (t0 .. t0 + m - 1)
};

inline AxisWindow axis_window(const ScaleConfig& cfg, double xi_c, double wf) {
  const double R = double(cfg.R);
  const double a = -wf * R, b = 2.0 * wf * R;
  const double pad = 2.0 * double(cfg.sR);
  AxisWindow w;
  w.vmin = -b - 2.0 * std::max(xi_c, 0.0) * R - pad;
  w.vmax = -a - 2.0 * std::min(xi_c, 0.0) * R + pad;
  double vc = 0.5 * (w.vmin + w.vmax);
  w.t0 = long(std::ceil((vc - double(cfg.P) / 2.0) / double(cfg.sR)));
  return w;
}

} // namespace detail

inline std::vector<Cap> cap_partition(const ScaleConfig& cfg) {
  std::vector<Cap> caps;
  if (cfg.n == 2) {
    for (long c = 0; c < cfg.ncaps; ++c) caps.push_back(Cap{{c, 0}});
  } else {
    for (long c1 = 0; c1 < cfg.ncaps; ++c1)
      for (long c2 = 0; c2 < cfg.ncaps; ++c2) caps.push_back(Cap{{c1, c2}});
  }
  return caps;
}

inline Decomposition decompose(const Profile& f, double wf = 3.0) {
  const ScaleConfig& cfg = f.cfg;
  if (!(wf > 0)) throw ConfigError("decompose: wf must be positive");
  Decomposition dec{cfg, wf, {}, Profile(cfg, "residual")};
  const double amp = std::pow(double(cfg.R), 0.25 * (cfg.n - 1));
  const double meas = cfg.n == 2 ? cfg.ds : cfg.ds * cfg.ds;

  if (cfg.n == 2) {
    dec.packets.reserve(std::size_t(cfg.ncaps * cfg.m));
    for (long c = 0; c < cfg.ncaps; ++c) {
      auto win = detail::axis_window(cfg, cap_center(cfg, c), wf);
      const long base = c * cfg.m;
      for (long t = win.t0; t < win.t0 + cfg.m; ++t) {
        double v = double(cfg.sR) * double(t);
        cplx s{0, 0};
        for (long k = 0; k < cfg.m; ++k)
          s += f.a[std::size_t(base + k)] * e(-v * cfg.xi(base + k));
        WavePacket p;
        p.cap = Cap{{c, 0}};
        p.v = {long(v), 0};
        p.coef = meas * amp * s;
        p.kept = (v >= win.vmin && v <= win.vmax);
        dec.packets.push_back(p);
      }
    }
  } else {
    dec.packets.reserve(std::size_t(cfg.ncaps * cfg.ncaps * cfg.m * cfg.m));
    std::vector<cplx> stage(std::size_t(cfg.m * cfg.m));
    for (long c1 = 0; c1 < cfg.ncaps; ++c1)
      for (long c2 = 0; c2 < cfg.ncaps; ++c2) {
        auto w1 = detail::axis_window(cfg, cap_center(cfg, c1), wf);
        auto w2 = detail::axis_window(cfg, cap_center(cfg, c2), wf);
        const long b1 = c1 * cfg.m, b2 = c2 * cfg.m;
        // stage[k1, t2] = sum_k2 f(k1,k2) e(-v2 xi_{k2})
        for (long k1 = 0; k1 < cfg.m; ++k1)
          for (long t2 = 0; t2 < cfg.m; ++t2) {
            double v2 = double(cfg.sR) * double(w2.t0 + t2);
            cplx s{0, 0};
            for (long k2 = 0; k2 < cfg.m; ++k2)
              s += f.a[std::size_t((b1 + k1) * cfg.G + (b2 + k2))] *
                   e(-v2 * cfg.xi(b2 + k2));
            stage[std::size_t(k1 * cfg.m + t2)] = s;
          }
        for (long t1 = 0; t1 < cfg.m; ++t1) {
          double v1 = double(cfg.sR) * double(w1.t0 + t1);
          bool k1in = (v1 >= w1.vmin && v1 <= w1.vmax);
          for (long t2 = 0; t2 < cfg.m; ++t2) {
            double v2 = double(cfg.sR) * double(w2.t0 + t2);
            cplx s{0, 0};
            for (long k1 = 0; k1 < cfg.m; ++k1)
              s += stage[std::size_t(k1 * cfg.m + t2)] * e(-v1 * cfg.xi(b1 + k1));
            WavePacket p;
            p.cap = Cap{{c1, c2}};
            p.v = {long(v1), long(v2)};
            p.coef = meas * amp * s;
            p.kept = k1in && (v2 >= w2.vmin && v2 <= w2.vmax);
            dec.packets.push_back(p);
          }
        }
      }
  }

  // Residual: f minus the kept packets (exactly zero when all residues kept).
  Profile recon = Profile(cfg, "reconstruction");
  for (std::size_t i = 0; i < dec.packets.size(); ++i) {
    const WavePacket& p = dec.packets[i];
    if (!p.kept || p.coef == cplx{0, 0}) continue;
    if (cfg.n == 2) {
      const long base = p.cap.idx[0] * cfg.m;
      for (long k = 0; k < cfg.m; ++k)
        recon.a[std::size_t(base + k)] +=
            p.coef * amp * e(double(p.v[0]) * cfg.xi(base + k));
    } else {
      const long bb1 = p.cap.idx[0] * cfg.m, bb2 = p.cap.idx[1] * cfg.m;
      for (long k1 = 0; k1 < cfg.m; ++k1)
        for (long k2 = 0; k2 < cfg.m; ++k2)
          recon.a[std::size_t((bb1 + k1) * cfg.G + (bb2 + k2))] +=
              p.coef * amp *
              e(double(p.v[0]) * cfg.xi(bb1 + k1) + double(p.v[1]) * cfg.xi(bb2 + k2));
    }
  }
  for (long k = 0; k < f.size(); ++k)
    dec.residual.a[std::size_t(k)] = f.a[std::size_t(k)] - recon.a[std::size_t(k)];
  return dec;
}

// Profile of a subset of packets (sum of coef * e_{theta,v}).
inline Profile packet_subprofile(const Decomposition& dec,
                                 const std::vector<std::size_t>& idx) {
  const ScaleConfig& cfg = dec.cfg;
  const double amp = std::pow(double(cfg.R), 0.25 * (cfg.n - 1));
  Profile g(cfg, "packet-subprofile");
  for (std::size_t i : idx) {
    const WavePacket& p = dec.packets[i];
    if (cfg.n == 2) {
      const long base = p.cap.idx[0] * cfg.m;
      for (long k = 0; k < cfg.m; ++k)
        g.a[std::size_t(base + k)] +=
            p.coef * amp * e(double(p.v[0]) * cfg.xi(base + k));
    } else {
      const long b1 = p.cap.idx[0] * cfg.m, b2 = p.cap.idx[1] * cfg.m;
      for (long k1 = 0; k1 < cfg.m; ++k1)
        for (long k2 = 0; k2 < cfg.m; ++k2)
          g.a[std::size_t((b1 + k1) * cfg.G + (b2 + k2))] +=
              p.coef * amp *
              e(double(p.v[0]) * cfg.xi(b1 + k1) + double(p.v[1]) * cfg.xi(b2 + k2));
    }
  }
  return g;
}

// Sum of all kept packets; f = reconstruct(dec) + dec.residual exactly.
inline Profile reconstruct(const Decomposition& dec) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < dec.packets.size(); ++i)
    if (dec.packets[i].kept && dec.packets[i].coef != cplx{0, 0}) idx.push_back(i);
  return packet_subprofile(dec, idx);
}

// Profile of a single normalized packet (coef = 1).
inline Profile mother_packet_profile(const ScaleConfig& cfg, const Cap& cap,
                                     const std::array<long, 2>& v) {
  const double amp = std::pow(double(cfg.R), 0.25 * (cfg.n - 1));
  Profile g(cfg, "packet");
  if (cfg.n == 2) {
    const long base = cap.idx[0] * cfg.m;
    for (long k = 0; k < cfg.m; ++k)
      g.a[std::size_t(base + k)] = amp * e(double(v[0]) * cfg.xi(base + k));
  } else {
    const long b1 = cap.idx[0] * cfg.m, b2 = cap.idx[1] * cfg.m;
    for (long k1 = 0; k1 < cfg.m; ++k1)
      for (long k2 = 0; k2 < cfg.m; ++k2)
        g.a[std::size_t((b1 + k1) * cfg.G + (b2 + k2))] =
            amp * e(double(v[0]) * cfg.xi(b1 + k1) + double(v[1]) * cfg.xi(b2 + k2));
  }
  return g;
}

// ---------------------------------------------------------------------------
// weight classes
// ---------------------------------------------------------------------------

// Dyadic weight classes of the kept packets.  Class ids are consecutive,
// ordered by increasing weight; id J-1 is the top class.  Packets below
// wmax * R^{-floor_exp} are dropped (id -1); their l2 mass is audited.
struct WeightClasses {
  std::vector<int> cls; // per-packet id, -1 = dropped or not kept
  int count = 0;        // J
  double dropped_mass = 0.0;
  double wmin = 0.0, wmax = 0.0;
};

inline WeightClasses weight_classes(const Decomposition& dec,
                                    double floor_exp = -1.0) {
  const ScaleConfig& cfg = dec.cfg;
  if (floor_exp < 0) floor_exp = 20.0 * cfg.n;
  WeightClasses wc;
  wc.cls.assign(dec.packets.size(), -1);
  double wmax = 0;
  for (std::size_t i = 0; i < dec.packets.size(); ++i)
    if (dec.packets[i].kept) wmax = std::max(wmax, dec.weight(i));
  if (wmax == 0) return wc;
  const double floor = wmax * std::pow(double(cfg.R), -floor_exp);
  double wmin = wmax;
  double dropped2 = 0;
  for (std::size_t i = 0; i < dec.packets.size(); ++i) {
    if (!dec.packets[i].kept) continue;
    double w = dec.weight(i);
    if (w > 0 && w >= floor)
      wmin = std::min(wmin, w);
    else
      dropped2 += std::norm(dec.packets[i].coef);
  }
  wc.dropped_mass = std::sqrt(dropped2);
  wc.wmin = wmin;
  wc.wmax = wmax;
  std::map<int, int> remap;
  std::vector<int> raw(dec.packets.size(), -1);
  for (std::size_t i = 0; i < dec.packets.size(); ++i) {
    if (!dec.packets[i].kept) continue;
    double w = dec.weight(i);
    if (!(w > 0 && w >= floor)) continue;
    int k = int(std::floor(std::log2(w / wmin) + 1e-12));
    raw[i] = k;
    remap[k] = 0;
  }
  int next = 0;
  for (auto& [k, id] : remap) id = next++;
  for (std::size_t i = 0; i < dec.packets.size(); ++i)
    if (raw[i] >= 0) wc.cls[i] = remap[raw[i]];
  wc.count = next;
  return wc;
}

// Indices of packets in one class.
inline std::vector<std::size_t> class_members(const WeightClasses& wc, int j) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < wc.cls.size(); ++i)
    if (wc.cls[i] == j) out.push_back(i);
  return out;
}

// Tubes of one class.
inline std::vector<Tube> class_tubes_of(const Decomposition& dec,
                                        const WeightClasses& wc, int j) {
  std::vector<Tube> out;
  for (std::size_t i = 0; i < wc.cls.size(); ++i)
    if (wc.cls[i] == j) out.push_back(dec.tube(i));
  return out;
}

} // namespace pex
