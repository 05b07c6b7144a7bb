// SPDX-License-Identifier: MIT
//
// Cube/cap/tube geometry: indexing, directions, transversality, incidence
// (fast grid filter vs brute reference), and horizontal partitions.

#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "pex/ensembles.hpp"
#include "pex/geometry.hpp"

using namespace pex;

TEST_CASE("flat cell index inverts the grid enumeration", "[geometry]") {
  for (int n : {2, 3}) {
    ScaleConfig cfg(n, 64);
    CubeCollection grid = full_cell_grid(cfg);
    REQUIRE(long(grid.size()) == (n == 2 ? 64 : 512));
    for (long i = 0; i < long(grid.size()); ++i)
      CHECK(cell_flat_index(cfg, grid[std::size_t(i)]) == i);
    std::set<DyadicCube> uniq(grid.begin(), grid.end());
    CHECK(uniq.size() == grid.size());
  }
}

TEST_CASE("cap centers tile (-1, 1)", "[geometry]") {
  ScaleConfig cfg(2, 64);
  CHECK(cap_center(cfg, 0) == Catch::Approx(-1.0 + 0.5 / 8.0));
  CHECK(cap_center(cfg, cfg.ncaps - 1) == Catch::Approx(1.0 - 0.5 / 8.0));
  CHECK(cap_center(cfg, 8) - cap_center(cfg, 7) ==
        Catch::Approx(1.0 / double(cfg.sR)));
  CHECK_THROWS_AS(cap_center(cfg, -1), ConfigError);
  CHECK_THROWS_AS(cap_center(cfg, cfg.ncaps), ConfigError);
}

TEST_CASE("cap directions are unit light-ray tangents", "[geometry]") {
  ScaleConfig cfg(2, 64);
  auto d = direction_of_cap(cfg, {0.5, 0.0});
  CHECK(d[0] == Catch::Approx(-1.0 / std::sqrt(2.0)));
  CHECK(d[1] == Catch::Approx(1.0 / std::sqrt(2.0)));
  CHECK(d[2] == 0.0);
  CHECK_THROWS_AS(direction_of_cap(cfg, {1.5, 0.0}), ConfigError);

  ScaleConfig cfg3(3, 64);
  auto d3 = direction_of_cap(cfg3, {0.5, -0.5});
  double nrm = std::sqrt(d3[0] * d3[0] + d3[1] * d3[1] + d3[2] * d3[2]);
  CHECK(nrm == Catch::Approx(1.0).epsilon(1e-14));
  CHECK(d3[0] == Catch::Approx(-1.0 / std::sqrt(3.0)));
}

TEST_CASE("transversality volume at reference frequency triples", "[geometry]") {
  ScaleConfig cfg(2, 64);
  // (-1/2) and (1/2): directions (1,1)/sqrt(2) and (-1,1)/sqrt(2), |det| = 1
  CHECK(transversality_volume(cfg, {{-0.5, 0.0}, {0.5, 0.0}}) ==
        Catch::Approx(1.0).epsilon(1e-14));
  // parallel caps are degenerate
  CHECK(transversality_volume(cfg, {{0.25, 0.0}, {0.25, 0.0}}) ==
        Catch::Approx(0.0).margin(1e-14));
  CHECK_THROWS_AS(transversality_volume(cfg, {{0.0, 0.0}}), ConfigError);

  ScaleConfig cfg3(3, 64);
  CHECK(transversality_volume(cfg3, {{-0.5, -0.5}, {0.5, -0.5}, {0.0, 0.5}}) ==
        Catch::Approx(0.9428090415820634).epsilon(1e-14));  // = 2 sqrt(2) / 3
  CHECK(kTransversalityThreshold == 0.01);
}

TEST_CASE("cube-axis distance matches a sampled minimum", "[geometry]") {
  for (int n : {2, 3}) {
    ScaleConfig cfg(n, 64);
    Rng rng(n == 2 ? 17 : 18);
    for (int trial = 0; trial < 20; ++trial) {
      Tube t;
      t.cap = Cap{{long(rng.bounded(std::uint64_t(cfg.ncaps))),
                   n == 3 ? long(rng.bounded(std::uint64_t(cfg.ncaps))) : 0}};
      t.v = {cfg.sR * (long(rng.bounded(std::uint64_t(3 * cfg.sR + 1))) - cfg.sR),
             n == 3 ? cfg.sR * (long(rng.bounded(std::uint64_t(3 * cfg.sR + 1))) -
                                cfg.sR)
                    : 0};
      DyadicCube q{{long(rng.bounded(std::uint64_t(cfg.sR))),
                    long(rng.bounded(std::uint64_t(cfg.sR))),
                    n == 3 ? long(rng.bounded(std::uint64_t(cfg.sR))) : 0}};
      double exact = cube_axis_distance(cfg, t, q);

      auto xc = cap_center_vec(cfg, t.cap);
      double ax = -double(t.v[0]), ay = n == 3 ? -double(t.v[1]) : 0.0;
      double dx = -2.0 * xc[0] * double(cfg.R);
      double dy = n == 3 ? -2.0 * xc[1] * double(cfg.R) : 0.0;
      double dz = double(cfg.R);
      double cx = (double(q.idx[0]) + 0.5) * double(cfg.sR);
      double cy = (double(q.idx[1]) + 0.5) * double(cfg.sR);
      double cz = (double(q.idx[2]) + 0.5) * double(cfg.sR);
      double best = 1e300;
      const int K = 20000;
      for (int k = 0; k <= K; ++k) {
        double s = double(k) / K;
        double px = ax + s * dx, py = ay + s * dy, pz = s * dz;
        double e1, e2, e3;
        if (n == 2) {
          e1 = cx - px;
          e2 = cy - pz;
          e3 = 0.0;
        } else {
          e1 = cx - px;
          e2 = cy - py;
          e3 = cz - pz;
        }
        best = std::min(best, std::sqrt(e1 * e1 + e2 * e2 + e3 * e3));
      }
      CHECK(exact <= best + 1e-9);
      CHECK(best - exact <= 1e-3 * std::max(1.0, exact));
    }
  }
}

TEST_CASE("fat tube radius and membership are consistent", "[geometry]") {
  ScaleConfig cfg(2, 64);
  CHECK(fat_tube_radius(cfg) ==
        Catch::Approx(std::pow(64.0, 0.6) + 0.5 * std::sqrt(2.0) * 8.0));
  Tube t{Cap{{0, 0}}, {0, 0}};
  DyadicCube q{{0, 0, 0}};
  CHECK(fat_tube_meets_cube(cfg, t, q) ==
        (cube_axis_distance(cfg, t, q) <= fat_tube_radius(cfg)));
}

TEST_CASE("grid incidence equals the brute double loop", "[geometry]") {
  for (int n : {2, 3}) {
    ScaleConfig cfg(n, n == 2 ? 256 : 64);
    auto boxes = standard_transversal_boxes(cfg);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      Rng rng(seed);
      std::vector<Tube> tubes = random_tube_family(cfg, boxes[0], 150, rng);
      CubeCollection cubes = random_cube_collection(cfg, 80, rng);
      auto fast = incidence_counts(cfg, tubes, cubes);
      auto brute = incidence_counts_brute(cfg, tubes, cubes);
      REQUIRE(fast.size() == brute.size());
      for (std::size_t i = 0; i < fast.size(); ++i) CHECK(fast[i] == brute[i]);
    }
  }
}

TEST_CASE("incidence handles empty inputs", "[geometry]") {
  ScaleConfig cfg(2, 64);
  CubeCollection cubes = full_cell_grid(cfg);
  auto c = incidence_counts(cfg, {}, cubes);
  for (long v : c) CHECK(v == 0);
  CHECK(incidence_counts(cfg, {}, {}).empty());
}

TEST_CASE("horizontal blocks partition by slab", "[geometry]") {
  ScaleConfig cfg(2, 64);
  CubeCollection grid = full_cell_grid(cfg);  // 8 rows of 8
  HorizontalPartition p1 = almost_horizontal_partition(cfg, grid);
  CHECK(p1.blocks.size() == 8);
  CHECK(p1.sigma == 8);
  std::size_t total = 0;
  for (const auto& b : p1.blocks) total += b.size();
  CHECK(total == grid.size());

  HorizontalPartition p2 = horizontal_blocks(cfg, grid, 2);
  CHECK(p2.blocks.size() == 4);
  CHECK(p2.sigma == 16);

  HorizontalPartition p3 = horizontal_blocks(cfg, grid, 3);  // 3+3+2 rows
  CHECK(p3.blocks.size() == 3);
  CHECK(p3.sigma == 16);

  CHECK_THROWS_AS(horizontal_blocks(cfg, grid, 0), ConfigError);

  // blocks index back into the collection consistently
  for (std::size_t b = 0; b < p1.blocks.size(); ++b)
    for (std::size_t qi : p1.blocks[b])
      CHECK(grid[qi].idx[1] == long(b));
}

TEST_CASE("n=3 partitions block along the last axis", "[geometry]") {
  ScaleConfig cfg(3, 64);
  CubeCollection cubes;
  for (long cz : {0L, 0L, 3L, 7L})
    cubes.push_back(DyadicCube{{long(cubes.size()), 0, cz}});
  HorizontalPartition p = almost_horizontal_partition(cfg, cubes);
  CHECK(p.blocks.size() == 3);
  CHECK(p.sigma == 1);
}

TEST_CASE("block incidence bound and audit", "[geometry]") {
  ScaleConfig cfg2(2, 64);
  CHECK(default_block_incidence_bound(cfg2) == 36);
  ScaleConfig cfg3(3, 64);
  CHECK(default_block_incidence_bound(cfg3) == 216);

  // a single horizontal slab meets any fat tube in a bounded run of cells
  ScaleConfig cfg(2, 256);
  CubeCollection grid = full_cell_grid(cfg);
  HorizontalPartition part = almost_horizontal_partition(cfg, grid);
  Rng rng(5);
  auto boxes = standard_transversal_boxes(cfg);
  std::vector<Tube> tubes = random_tube_family(cfg, boxes[1], 100, rng);
  for (const auto& blk : part.blocks) {
    long mx = block_incidence_max(cfg, grid, blk, tubes);
    CHECK(mx <= default_block_incidence_bound(cfg));
  }
}

TEST_CASE("random cube collections are distinct, sorted, in range",
          "[geometry]") {
  ScaleConfig cfg(2, 256);
  Rng rng(9);
  CubeCollection cubes = random_cube_collection(cfg, 100, rng);
  REQUIRE(cubes.size() == 100);
  std::set<long> ids;
  for (const DyadicCube& q : cubes) {
    CHECK(q.idx[0] >= 0);
    CHECK(q.idx[0] < cfg.sR);
    CHECK(q.idx[1] >= 0);
    CHECK(q.idx[1] < cfg.sR);
    CHECK(q.idx[2] == 0);
    ids.insert(cell_flat_index(cfg, q));
  }
  CHECK(ids.size() == 100);
  CHECK(std::is_sorted(cubes.begin(), cubes.end(),
                       [&](const DyadicCube& a, const DyadicCube& b) {
                         return cell_flat_index(cfg, a) < cell_flat_index(cfg, b);
                       }));
  Rng r2(9);
  CubeCollection again = random_cube_collection(cfg, 100, r2);
  CHECK(again == cubes);
  Rng r3(1);
  CHECK_THROWS_AS(random_cube_collection(cfg, 0, r3), ConfigError);
  CHECK_THROWS_AS(random_cube_collection(cfg, cfg.sR * cfg.sR + 1, r3),
                  ConfigError);
}

TEST_CASE("random tube families stay inside their frequency box", "[geometry]") {
  ScaleConfig cfg(2, 256);
  FreqBox box{{0.25, -1.0}, {1.0, 1.0}};
  Rng rng(3);
  auto tubes = random_tube_family(cfg, box, 200, rng);
  REQUIRE(tubes.size() == 200);
  for (const Tube& t : tubes) {
    double xc = cap_center(cfg, t.cap.idx[0]);
    CHECK(xc > 0.25);
    CHECK(xc < 1.0);
    CHECK(t.v[0] % cfg.sR == 0);
    CHECK(t.v[0] >= -cfg.sR * cfg.sR);
    CHECK(t.v[0] <= 2 * cfg.sR * cfg.sR);
    CHECK(t.v[1] == 0);
  }
  CHECK_THROWS_AS(random_tube_family(cfg, box, 0, rng), ConfigError);
  CHECK_THROWS_AS(random_tube_family(cfg, box, 1L << 40, rng), ConfigError);
}
