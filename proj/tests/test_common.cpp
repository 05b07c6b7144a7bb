// SPDX-License-Identifier: MIT
//
// Scale derivation, dyadic helpers, RNG, hashing, and exponent fitting.

#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "pex/common.hpp"

using namespace pex;

TEST_CASE("scale config derives the lattice quantities", "[common]") {
  ScaleConfig cfg(2, 64);
  CHECK(cfg.n == 2);
  CHECK(cfg.R == 64);
  CHECK(cfg.sR == 8);
  CHECK(cfg.G == 512);
  CHECK(cfg.m == 32);
  CHECK(cfg.ncaps == 16);
  CHECK(cfg.P == 256);
  CHECK(cfg.L == 1024);
  CHECK(cfg.ds == Catch::Approx(1.0 / 256.0).epsilon(1e-15));
  CHECK(cfg.h == Catch::Approx(0.25));
  CHECK(cfg.eps == Catch::Approx(0.1));
  CHECK(cfg.p() == Catch::Approx(6.0));
  CHECK(cfg.d() == 1);
  CHECK(cfg.nodes() == 512);
  CHECK(cfg.cells_per_axis() == 8);
  CHECK(cfg.samples_per_cell() == 32);
  CHECK(cfg.samples_per_axis() == 256);

  // caps tile the frequency axis exactly
  CHECK(cfg.ncaps * cfg.m == cfg.G);
  CHECK(cfg.ncaps * cfg.m * cfg.ds == Catch::Approx(2.0)); // covers [-1, 1]

  ScaleConfig cfg3(3, 256, 0.2, 0.125);
  CHECK(cfg3.p() == Catch::Approx(4.0));
  CHECK(cfg3.d() == 2);
  CHECK(cfg3.nodes() == 2048L * 2048L);
  CHECK(cfg3.sR == 16);
  CHECK(cfg3.m == 64);
  CHECK(cfg3.samples_per_cell() == 128);
}

TEST_CASE("frequency nodes are cell midpoints of [-1, 1)", "[common]") {
  ScaleConfig cfg(2, 64);
  CHECK(cfg.xi(0) == Catch::Approx(-1.0 + 0.5 * cfg.ds));
  CHECK(cfg.xi(cfg.G - 1) == Catch::Approx(1.0 - 0.5 * cfg.ds));
  CHECK(cfg.xi(cfg.G / 2) == Catch::Approx(0.5 * cfg.ds));
}

TEST_CASE("scale config rejects out-of-domain parameters", "[common]") {
  CHECK_THROWS_AS(ScaleConfig(4, 64), ConfigError);
  CHECK_THROWS_AS(ScaleConfig(2, 100), ConfigError);  // not a power of two
  CHECK_THROWS_AS(ScaleConfig(2, 32), ConfigError);   // below the minimum
  CHECK_THROWS_AS(ScaleConfig(2, 128), ConfigError);  // sqrt not integer
  CHECK_THROWS_AS(ScaleConfig(2, 64, 0.0), ConfigError);
  CHECK_THROWS_AS(ScaleConfig(2, 64, 0.3), ConfigError);
  CHECK_THROWS_AS(ScaleConfig(2, 64, 0.1, 0.3), ConfigError);   // h > 1/4
  CHECK_THROWS_AS(ScaleConfig(2, 64, 0.1, 0.15), ConfigError);  // sR/h not integer
  CHECK_NOTHROW(ScaleConfig(2, 64, 0.25, 0.2));  // 8 / 0.2 = 40 is fine
  CHECK_THROWS_WITH(ScaleConfig(2, 100),
                    Catch::Matchers::ContainsSubstring("scale.R"));
}

TEST_CASE("unit phase factor", "[common]") {
  CHECK(std::abs(e(0.0) - cplx{1, 0}) < 1e-15);
  CHECK(std::abs(e(0.25) - cplx{0, 1}) < 1e-15);
  CHECK(std::abs(e(0.5) - cplx{-1, 0}) < 1e-15);
  CHECK(std::abs(e(0.125) * e(-0.125) - cplx{1, 0}) < 1e-15);
}

TEST_CASE("dyadic level is the floor power of two", "[common]") {
  CHECK(dyadic_level(0) == 0);
  CHECK(dyadic_level(-5) == 0);
  CHECK(dyadic_level(1) == 1);
  CHECK(dyadic_level(2) == 2);
  CHECK(dyadic_level(3) == 2);
  CHECK(dyadic_level(4) == 4);
  CHECK(dyadic_level(7) == 4);
  CHECK(dyadic_level(8) == 8);
  CHECK(dyadic_level(1023) == 512);
  CHECK(dyadic_level(1024) == 1024);
}

TEST_CASE("dyadic exponent matches ilogb and rejects nonpositive", "[common]") {
  CHECK(dyadic_exponent(1.0) == 0);
  CHECK(dyadic_exponent(1.5) == 0);
  CHECK(dyadic_exponent(2.0) == 1);
  CHECK(dyadic_exponent(3.99) == 1);
  CHECK(dyadic_exponent(4.0) == 2);
  CHECK(dyadic_exponent(0.5) == -1);
  CHECK(dyadic_exponent(0.7) == -1);
  CHECK_THROWS_AS(dyadic_exponent(0.0), InvariantError);
  CHECK_THROWS_AS(dyadic_exponent(-1.0), InvariantError);
}

TEST_CASE("rng replays, bounds, and samples without replacement", "[common]") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());

  Rng r(7);
  for (int i = 0; i < 1000; ++i) {
    CHECK(r.bounded(17) < 17);
    double u = r.unit();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }

  Rng s(9);
  auto picks = s.sample_without_replacement(1000, 200);
  REQUIRE(picks.size() == 200);
  std::set<long> seen(picks.begin(), picks.end());
  CHECK(seen.size() == 200);  // distinct
  CHECK(*seen.begin() >= 0);
  CHECK(*seen.rbegin() < 1000);
  CHECK_THROWS_AS(s.sample_without_replacement(5, 6), InvariantError);

  // k == N returns a permutation of the full population
  Rng t(3);
  auto all = t.sample_without_replacement(50, 50);
  std::set<long> aset(all.begin(), all.end());
  CHECK(aset.size() == 50);

  // shuffle permutes
  std::vector<int> v{1, 2, 3, 4, 5, 6, 7, 8};
  Rng u(11);
  auto w = v;
  u.shuffle(w);
  std::multiset<int> ms(w.begin(), w.end()), mv(v.begin(), v.end());
  CHECK(ms == mv);
}

TEST_CASE("fnv1a64 reproduces the reference vectors", "[common]") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ull);
  CHECK(fnv1a64("x") != fnv1a64("y"));
}

TEST_CASE("fmt_g prints deterministic %.12g", "[common]") {
  CHECK(fmt_g(0.25) == "0.25");
  CHECK(fmt_g(1.0) == "1");
  CHECK(fmt_g(1.0 / 3.0) == "0.333333333333");
  CHECK(fmt_g(1e-5) == "1e-05");
  CHECK(fmt_g(0.0) == "0");
}

TEST_CASE("fit_exponent recovers exact power laws", "[common]") {
  std::vector<std::pair<double, double>> pts;
  for (double x : {2.0, 4.0, 8.0, 16.0}) pts.push_back({x, 3.0 * x * x});
  FitResult fr = fit_exponent(pts);
  CHECK(fr.slope == Catch::Approx(2.0).margin(1e-12));
  CHECK(fr.intercept == Catch::Approx(std::log(3.0)).margin(1e-12));
  CHECK(fr.stderr_slope == Catch::Approx(0.0).margin(1e-10));
  CHECK(fr.npoints == 4);

  // constant data fits slope zero
  std::vector<std::pair<double, double>> flat{{1, 5}, {2, 5}, {4, 5}};
  CHECK(fit_exponent(flat).slope == Catch::Approx(0.0).margin(1e-12));

  // mild multiplicative noise stays near the true exponent
  Rng rng(5);
  std::vector<std::pair<double, double>> noisy;
  for (double x : {2.0, 4.0, 8.0, 16.0, 32.0, 64.0})
    noisy.push_back({x, std::pow(x, -0.5) * (1.0 + 0.02 * (rng.unit() - 0.5))});
  FitResult nf = fit_exponent(noisy);
  CHECK(std::abs(nf.slope + 0.5) < 0.05);
  CHECK(nf.stderr_slope < 0.05);
}

TEST_CASE("fit_exponent rejects degenerate input", "[common]") {
  CHECK_THROWS_AS(fit_exponent({{1, 1}, {2, 2}}), InvariantError);
  CHECK_THROWS_AS(fit_exponent({{1, 1}, {2, -2}, {3, 3}}), InvariantError);
  CHECK_THROWS_AS(fit_exponent({{2, 1}, {2, 2}, {2, 3}}), InvariantError);
}
