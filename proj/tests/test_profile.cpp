// SPDX-License-Identifier: MIT
//
// Frequency profiles: norms, generators, modulations, serialization.

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <iterator>

#include "pex/profile.hpp"

using namespace pex;

TEST_CASE("constant profile has the exact box mass", "[profile]") {
  ScaleConfig cfg(2, 64);
  Profile f = profile_constant(cfg);
  // integral of 1 over [-1,1] is 2, so the L^2 norm is sqrt(2)
  CHECK(l2_norm(f) == Catch::Approx(std::sqrt(2.0)).epsilon(1e-12));

  Profile half = profile_constant(cfg, FreqBox{{0.0, -1.0}, {1.0, 1.0}});
  CHECK(l2_norm(half) == Catch::Approx(1.0).epsilon(1e-12));

  ScaleConfig cfg3(3, 64);
  Profile g = profile_constant(cfg3);
  CHECK(l2_norm(g) == Catch::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("bump profile is positive inside and vanishes outside its box",
          "[profile]") {
  ScaleConfig cfg(2, 64);
  FreqBox box{{-0.5, -1.0}, {0.5, 1.0}};
  Profile f = profile_bump(cfg, box);
  double peak = 0.0;
  for (long k = 0; k < f.size(); ++k) {
    double xi = f.xi_of(k)[0];
    double a = std::abs(f.a[std::size_t(k)]);
    if (xi <= -0.5 || xi >= 0.5) {
      CHECK(a == 0.0);
    } else {
      CHECK(a > 0.0);
      CHECK(a <= 1.0);
    }
    peak = std::max(peak, a);
  }
  CHECK(peak > 0.99);  // nodes straddle the center, value exp(1 - 1/(1-s^2)) ~ 1
  CHECK(l2_norm(f) > 0.0);
}

TEST_CASE("random phase bump keeps the bump modulus", "[profile]") {
  ScaleConfig cfg(2, 64);
  Profile b = profile_bump(cfg);
  Profile r = profile_random_phase_bump(cfg, FreqBox{}, 7);
  REQUIRE(r.size() == b.size());
  for (long k = 0; k < b.size(); ++k)
    CHECK(std::abs(r.a[std::size_t(k)]) ==
          Catch::Approx(std::abs(b.a[std::size_t(k)])).margin(1e-14));
  CHECK(l2_norm(r) == Catch::Approx(l2_norm(b)).epsilon(1e-12));
  // deterministic in the seed
  Profile r2 = profile_random_phase_bump(cfg, FreqBox{}, 7);
  for (long k = 0; k < r.size(); ++k)
    CHECK(r.a[std::size_t(k)] == r2.a[std::size_t(k)]);
}

TEST_CASE("inner product matches the norm and separates disjoint supports",
          "[profile]") {
  ScaleConfig cfg(2, 64);
  Profile f = profile_bump(cfg);
  cplx ip = inner(f, f);
  CHECK(ip.real() == Catch::Approx(l2_norm(f) * l2_norm(f)).epsilon(1e-12));
  CHECK(std::abs(ip.imag()) < 1e-15);

  Profile a = profile_bump(cfg, FreqBox{{-1.0, -1.0}, {-0.25, 1.0}});
  Profile b = profile_bump(cfg, FreqBox{{0.25, -1.0}, {1.0, 1.0}});
  CHECK(std::abs(inner(a, b)) == 0.0);
}

TEST_CASE("modulations are unimodular and invertible", "[profile]") {
  ScaleConfig cfg(2, 64);
  Profile f = profile_random_phase_bump(cfg, FreqBox{}, 3);
  Profile g = modulate_focus(f, 17.5);
  REQUIRE(g.size() == f.size());
  for (long k = 0; k < f.size(); ++k)
    CHECK(std::abs(g.a[std::size_t(k)]) ==
          Catch::Approx(std::abs(f.a[std::size_t(k)])).margin(1e-14));
  Profile back = modulate_focus(g, -17.5);
  for (long k = 0; k < f.size(); ++k)
    CHECK(std::abs(back.a[std::size_t(k)] - f.a[std::size_t(k)]) < 1e-13);

  Profile t = modulate_translate(f, {-32.0, 0.0});
  CHECK(l2_norm(t) == Catch::Approx(l2_norm(f)).epsilon(1e-12));
  Profile tb = modulate_translate(t, {32.0, 0.0});
  for (long k = 0; k < f.size(); ++k)
    CHECK(std::abs(tb.a[std::size_t(k)] - f.a[std::size_t(k)]) < 1e-13);
}

TEST_CASE("n=3 node indexing round-trips", "[profile]") {
  ScaleConfig cfg(3, 64);
  Profile f(cfg);
  long k = 37 * cfg.G + 411;
  auto xi = f.xi_of(k);
  CHECK(xi[0] == Catch::Approx(cfg.xi(37)));
  CHECK(xi[1] == Catch::Approx(cfg.xi(411)));
  CHECK(f.xi_norm2_of(k) ==
        Catch::Approx(xi[0] * xi[0] + xi[1] * xi[1]).epsilon(1e-14));
}

TEST_CASE("profiles serialize and reload exactly", "[profile]") {
  ScaleConfig cfg(2, 64, 0.2, 0.125);
  Profile f = profile_random_phase_bump(cfg, FreqBox{{-0.75, -1.0}, {0.5, 1.0}}, 99);
  std::string path = "test_profile_roundtrip.bin";
  save_profile(f, path);
  Profile g = load_profile(path);
  std::remove(path.c_str());
  CHECK(g.cfg.n == f.cfg.n);
  CHECK(g.cfg.R == f.cfg.R);
  CHECK(g.cfg.eps == f.cfg.eps);
  CHECK(g.cfg.h == f.cfg.h);
  CHECK(g.tag == f.tag);
  REQUIRE(g.size() == f.size());
  for (long k = 0; k < f.size(); ++k)
    CHECK(g.a[std::size_t(k)] == f.a[std::size_t(k)]);  // bit-exact
}

TEST_CASE("load_profile rejects a truncated file", "[profile]") {
  ScaleConfig cfg(2, 64);
  Profile f = profile_bump(cfg);
  std::string path = "test_profile_truncated.bin";
  save_profile(f, path);
  {
    std::ifstream is(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(is)),
                      std::istreambuf_iterator<char>());
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os.write(bytes.data(), long(bytes.size() / 2));
  }
  CHECK_THROWS_AS(load_profile(path), ConfigError);
  std::remove(path.c_str());
}
