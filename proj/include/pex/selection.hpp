// SPDX-License-Identifier: MIT
//
// Dyadic pigeonholing pipelines over cube collections.
//
// All stages operate on precomputed per-cube norm tables so the pipelines are
// deterministic integer/compare logic, independent of how fields were
// evaluated.  Every tie is broken by a total order (lowest class id, lowest
// level, lexicographically smallest tuple, first block), so results are
// reproducible across platforms and thread counts.
#pragma once

#include <map>

#include "pex/geometry.hpp"

namespace pex {

// Largest dyadic bucket [2^k, 2^{k+1}) of the positive entries.
// Ties between buckets go to the lowest exponent.  mask[i] marks membership;
// nonpositive entries never belong to any bucket.
struct DyadicBucket {
  std::vector<char> mask;
  long nbuckets = 0;
  int exponent = 0; // k of the winning bucket
};

inline DyadicBucket dyadic_bucket_largest(const std::vector<double>& values) {
  DyadicBucket out;
  out.mask.assign(values.size(), 0);
  std::map<int, long> cnt;
  for (double v : values)
    if (v > 0) ++cnt[dyadic_exponent(v)];
  if (cnt.empty()) return out;
  int best = 0;
  long bestc = -1;
  for (auto& [k, c] : cnt)
    if (c > bestc) { // ascending keys: first max is the lowest exponent
      best = k;
      bestc = c;
    }
  for (std::size_t i = 0; i < values.size(); ++i)
    if (values[i] > 0 && dyadic_exponent(values[i]) == best) out.mask[i] = 1;
  out.nbuckets = long(cnt.size());
  out.exponent = best;
  return out;
}

// Restrict a cube collection to the cubes whose value lies in the largest
// dyadic bucket ("essentially constant" restriction).
struct ConstancyRestriction {
  std::vector<std::size_t> kept; // indices into the original collection
  long nbuckets = 0;
  int exponent = 0;
};

inline ConstancyRestriction
essentially_constant_restrict(const std::vector<double>& values) {
  DyadicBucket b = dyadic_bucket_largest(values);
  ConstancyRestriction r;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (b.mask[i]) r.kept.push_back(i);
  r.nbuckets = b.nbuckets;
  r.exponent = b.exponent;
  return r;
}

// ---------------------------------------------------------------------------
// multilinear selection
// ---------------------------------------------------------------------------

struct MultilinearSelection {
  std::vector<std::size_t> kept;      // cubes surviving the smallness prune
  std::vector<std::size_t> discarded; //
  std::vector<int> tuple;             // chosen class per family
  std::vector<std::size_t> Qstar;     // kept cubes with the majority tuple
  std::vector<std::size_t> Qprime;    // Qstar cubes with the majority levels
  std::vector<long> levels;           // chosen dyadic level per family
  long ntuples = 0;                   // distinct tuples observed on kept
  long nlevels = 0;                   // distinct level tuples observed on Qstar
  std::vector<std::vector<long>> counts; // [family][Qstar cube] tube incidences
  bool audit_pigeonhole = false;      // |Q'| ntuples nlevels >= |kept|
};

// ef_norms[i][q]    = ||E f_i||_{L^p(q)} over cube q
// class_norms[i][j][q] = same for the class-j part of f_i
// class_tubes[i][j] = tubes of class j of family i
// l2s[i]            = ||f_i||_2
//
// Pipeline: prune cubes where some family falls below R^{-10 n} ||f_i||_2,
// take the per-cube argmax class tuple, keep the majority tuple (Q*), compute
// fat-tube incidences of the chosen classes, keep the majority dyadic level
// tuple (Q').  Pigeonholing can lose at most the number of branches, which
// the audit checks exactly.
inline MultilinearSelection select_multilinear(
    const ScaleConfig& cfg, const std::vector<std::vector<double>>& ef_norms,
    const std::vector<std::vector<std::vector<double>>>& class_norms,
    const std::vector<std::vector<std::vector<Tube>>>& class_tubes,
    const CubeCollection& cubes, const std::vector<double>& l2s) {
  const std::size_t nfam = ef_norms.size();
  const std::size_t N = cubes.size();
  if (class_norms.size() != nfam || class_tubes.size() != nfam ||
      l2s.size() != nfam)
    throw ConfigError("select_multilinear: family count mismatch");
  for (std::size_t i = 0; i < nfam; ++i)
    if (ef_norms[i].size() != N)
      throw ConfigError("select_multilinear: table size mismatch");

  MultilinearSelection sel;
  const double Rd = double(cfg.R);
  std::vector<double> thr(nfam);
  for (std::size_t i = 0; i < nfam; ++i)
    thr[i] = std::pow(Rd, -10.0 * cfg.n) * l2s[i];
  for (std::size_t q = 0; q < N; ++q) {
    bool ok = true;
    for (std::size_t i = 0; i < nfam; ++i)
      if (!(ef_norms[i][q] >= thr[i])) ok = false;
    (ok ? sel.kept : sel.discarded).push_back(q);
  }

  // per-cube class argmax (ties -> lowest class id)
  std::vector<std::vector<int>> tup(nfam, std::vector<int>(N, 0));
  for (std::size_t i = 0; i < nfam; ++i) {
    const auto& ct = class_norms[i];
    for (std::size_t q = 0; q < N; ++q) {
      int arg = 0;
      double best = ct.empty() ? 0.0 : ct[0][q];
      for (std::size_t j = 1; j < ct.size(); ++j)
        if (ct[j][q] > best) {
          best = ct[j][q];
          arg = int(j);
        }
      tup[i][q] = arg;
    }
  }

  // majority tuple on kept cubes (ties -> lexicographically smallest)
  std::map<std::vector<int>, long> tcount;
  for (std::size_t q : sel.kept) {
    std::vector<int> t(nfam);
    for (std::size_t i = 0; i < nfam; ++i) t[i] = tup[i][q];
    ++tcount[t];
  }
  if (tcount.empty()) { // nothing survived the prune: 0 >= 0 holds
    sel.tuple.assign(nfam, 0);
    sel.audit_pigeonhole = true;
    return sel;
  }
  long bestc = -1;
  for (auto& [t, c] : tcount)
    if (c > bestc) { // map ascending: first max is lex-smallest
      sel.tuple = t;
      bestc = c;
    }
  sel.ntuples = long(tcount.size());
  for (std::size_t q : sel.kept) {
    bool same = true;
    for (std::size_t i = 0; i < nfam; ++i)
      if (tup[i][q] != sel.tuple[i]) same = false;
    if (same) sel.Qstar.push_back(q);
  }

  // incidence levels of the chosen classes over Qstar
  CubeCollection qcubes;
  for (std::size_t q : sel.Qstar) qcubes.push_back(cubes[q]);
  std::vector<std::vector<long>> lev(nfam);
  sel.counts.assign(nfam, {});
  for (std::size_t i = 0; i < nfam; ++i) {
    sel.counts[i] =
        incidence_counts(cfg, class_tubes[i][std::size_t(sel.tuple[i])], qcubes);
    lev[i].resize(qcubes.size());
    for (std::size_t k = 0; k < qcubes.size(); ++k)
      lev[i][k] = dyadic_level(sel.counts[i][k]);
  }
  std::map<std::vector<long>, long> lcount;
  for (std::size_t k = 0; k < qcubes.size(); ++k) {
    std::vector<long> t(nfam);
    for (std::size_t i = 0; i < nfam; ++i) t[i] = lev[i][k];
    ++lcount[t];
  }
  if (lcount.empty()) {
    sel.levels.assign(nfam, 0);
    sel.audit_pigeonhole = sel.kept.empty();
    return sel;
  }
  bestc = -1;
  for (auto& [t, c] : lcount)
    if (c > bestc) {
      sel.levels = t;
      bestc = c;
    }
  sel.nlevels = long(lcount.size());
  for (std::size_t k = 0; k < qcubes.size(); ++k) {
    bool same = true;
    for (std::size_t i = 0; i < nfam; ++i)
      if (lev[i][k] != sel.levels[i]) same = false;
    if (same) sel.Qprime.push_back(sel.Qstar[k]);
  }
  sel.audit_pigeonhole = long(sel.Qprime.size()) * sel.ntuples * sel.nlevels >=
                         long(sel.kept.size());
  if (!sel.audit_pigeonhole)
    throw InvariantError("select_multilinear: pigeonhole audit failed");
  return sel;
}

// Triangle-inequality audit relating a cube norm to its class decomposition:
// on every kept cube, ||E f_i||_p(q) <= (J_i + 1) max_j ||class_j||_p(q)
//                                        + R^{-5 n} ||f_i||_2.
// Returns the worst ratio lhs / rhs (<= 1 iff the audit holds).
struct TriangleAudit {
  bool ok = true;
  double worst = 0.0;
};

inline TriangleAudit class_triangle_audit(
    const ScaleConfig& cfg, const std::vector<std::vector<double>>& ef_norms,
    const std::vector<std::vector<std::vector<double>>>& class_norms,
    const std::vector<std::size_t>& kept, const std::vector<double>& l2s) {
  TriangleAudit a;
  const double Rd = double(cfg.R);
  for (std::size_t i = 0; i < ef_norms.size(); ++i) {
    const double tail = std::pow(Rd, -5.0 * cfg.n) * l2s[i];
    const double J = double(class_norms[i].size());
    for (std::size_t q : kept) {
      double mx = 0;
      for (const auto& tab : class_norms[i]) mx = std::max(mx, tab[q]);
      double rhs = (J + 1.0) * mx + tail;
      double r = ef_norms[i][q] / rhs;
      a.worst = std::max(a.worst, r);
      if (!(ef_norms[i][q] <= rhs)) a.ok = false;
    }
  }
  return a;
}

// ---------------------------------------------------------------------------
// linear selection
// ---------------------------------------------------------------------------

struct LinearSelection {
  std::vector<std::size_t> Qstar; // final cubes (inside the chosen block)
  std::vector<std::size_t> Qprime; // majority-level cubes before the block cut
  long M = 0;                     // chosen dyadic incidence level
  int cls = -1;                   // chosen weight class
  long B1 = 0;                    // distinct classes observed
  long B2 = 0;                    // distinct levels observed
  long sigma = 0;                 // min nonempty block size
  std::size_t block = 0;          // chosen block index
  bool audit_pigeonhole = false;  // |Q*| B1 B2 >= sigma
  bool audit_incidence = false;   // M |Q*| <= bound * |tubes|
};

// class_norms[j][q] = ||class_j part||_{L^p(q)}; class_tubes[j] its tubes;
// blocks partitions the cube indices.  Pipeline: per-cube class argmax ->
// majority class -> fat-tube incidence levels -> majority level Q' -> block
// maximizing the fraction |Q' ∩ B| / |Q ∩ B| (compared exactly by
// cross-multiplication; ties -> first block) -> Q* = Q' ∩ B.
inline LinearSelection select_linear(
    const ScaleConfig& cfg, const std::vector<std::vector<double>>& class_norms,
    const std::vector<std::vector<Tube>>& class_tubes,
    const CubeCollection& cubes, const HorizontalPartition& part,
    long n_tubes_all, long incidence_bound = -1) {
  const std::size_t N = cubes.size();
  const std::size_t J = class_norms.size();
  if (J == 0 || N == 0) throw ConfigError("select_linear: empty input");
  if (class_tubes.size() != J)
    throw ConfigError("select_linear: class count mismatch");
  if (incidence_bound < 0) incidence_bound = default_block_incidence_bound(cfg);

  LinearSelection sel;
  // per-cube argmax class (ties -> lowest id), then majority class
  std::vector<int> cls(N, 0);
  std::map<int, long> ccount;
  for (std::size_t q = 0; q < N; ++q) {
    int arg = 0;
    double best = class_norms[0][q];
    for (std::size_t j = 1; j < J; ++j)
      if (class_norms[j][q] > best) {
        best = class_norms[j][q];
        arg = int(j);
      }
    cls[q] = arg;
    ++ccount[arg];
  }
  long bestc = -1;
  for (auto& [j, c] : ccount)
    if (c > bestc) {
      sel.cls = j;
      bestc = c;
    }
  sel.B1 = long(ccount.size());
  std::vector<std::size_t> Qa;
  for (std::size_t q = 0; q < N; ++q)
    if (cls[q] == sel.cls) Qa.push_back(q);

  // incidence levels of the chosen class over Qa, then majority level
  CubeCollection qcubes;
  for (std::size_t q : Qa) qcubes.push_back(cubes[q]);
  std::vector<long> cnts =
      incidence_counts(cfg, class_tubes[std::size_t(sel.cls)], qcubes);
  std::map<long, long> lcount;
  std::vector<long> levs(Qa.size());
  for (std::size_t k = 0; k < Qa.size(); ++k) {
    levs[k] = dyadic_level(cnts[k]);
    ++lcount[levs[k]];
  }
  bestc = -1;
  for (auto& [l, c] : lcount)
    if (c > bestc) {
      sel.M = l;
      bestc = c;
    }
  sel.B2 = long(lcount.size());
  std::vector<char> inqp(N, 0);
  for (std::size_t k = 0; k < Qa.size(); ++k)
    if (levs[k] == sel.M) {
      sel.Qprime.push_back(Qa[k]);
      inqp[Qa[k]] = 1;
    }

  // block maximizing |Q' ∩ B| / |Q ∩ B| (exact rational compare)
  long best_num = -1, best_den = 1;
  bool found = false;
  for (std::size_t b = 0; b < part.blocks.size(); ++b) {
    const auto& blk = part.blocks[b];
    if (blk.empty()) continue;
    long inter = 0;
    for (std::size_t q : blk) inter += inqp[q];
    if (inter * best_den > best_num * long(blk.size())) {
      best_num = inter;
      best_den = long(blk.size());
      sel.block = b;
      found = true;
    }
  }
  if (!found) throw InvariantError("select_linear: no nonempty block");
  for (std::size_t q : part.blocks[sel.block])
    if (inqp[q]) sel.Qstar.push_back(q);
  sel.sigma = part.sigma;

  sel.audit_pigeonhole = long(sel.Qstar.size()) * sel.B1 * sel.B2 >= sel.sigma;
  sel.audit_incidence = sel.M * long(sel.Qstar.size()) <=
                        incidence_bound * n_tubes_all;
  if (!sel.audit_pigeonhole)
    throw InvariantError("select_linear: pigeonhole audit failed");
  if (!sel.audit_incidence)
    throw InvariantError("select_linear: incidence audit failed");
  return sel;
}

} // namespace pex
