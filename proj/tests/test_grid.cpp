// Copyright Contributors to the GaussAD Project
// SPDX-License-Identifier: Apache-2.0

#include "gad/grid.h"

#include "oracles.h"

#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

using namespace gad;

namespace {

GridSpec cube(int n, double vs, Vec3 origin = Vec3::Zero()) {
    GridSpec s;
    s.origin = origin;
    s.dims = {n, n, n};
    s.voxel_size = vs;
    return s;
}

} // namespace

TEST_CASE("voxel_center") {
    const auto s = cube(4, 0.5);
    CHECK(voxel_center(s, {0, 0, 0}).isApprox(Vec3(0.25, 0.25, 0.25)));
    CHECK(voxel_center(s, {1, 0, 0}).isApprox(Vec3(0.75, 0.25, 0.25)));
    // origin (-3.2, -3.2, -1) at 0.4 m: voxel (2, 7, 1) -> (-3.2 + 1.0, -3.2 + 3.0, -1 + 0.6)
    const auto n = cube(8, 0.4, Vec3(-3.2, -3.2, -1.0));
    const Vec3 c = voxel_center(n, {2, 7, 1});
    CHECK(c.x() == doctest::Approx(-2.2));
    CHECK(c.y() == doctest::Approx(-0.2));
    CHECK(c.z() == doctest::Approx(-0.4));
    CHECK_THROWS_AS(voxel_center(s, {4, 0, 0}), std::out_of_range);
    CHECK_THROWS_AS(voxel_center(s, {0, -1, 0}), std::out_of_range);
}

TEST_CASE("flat index bijection") {
    GridSpec s;
    s.dims = {5, 3, 4};
    for (std::size_t v = 0; v < s.num_voxels(); ++v) {
        const Index3 ijk = s.unflatten(v);
        CHECK(s.contains(ijk));
        CHECK(s.flat_index(ijk) == v);
        CHECK(v == static_cast<std::size_t>(ijk[0] + 5 * (ijk[1] + 3 * ijk[2])));
    }
}

TEST_CASE("grid spec validation") {
    GridSpec s;
    s.dims = {0, 1, 1};
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s.dims = {2048, 1024, 1024};
    CHECK_NOTHROW(s.validate());
    s.dims = {2048, 1024, 1025};
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s.dims = {1, 1, 1};
    s.voxel_size = -1;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("occupancy grid validation") {
    OccupancyGrid g(cube(2, 1.0), 3);
    CHECK(g.count_occupied() == 0);
    g.labels[3] = 2;
    CHECK_NOTHROW(g.validate());
    g.labels[3] = 3;
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
}

TEST_CASE("spatial index basics") {
    const auto spec = cube(16, 0.5);
    GaussianScene empty;
    SpatialIndex idx(empty, spec, 3.0);
    CHECK(idx.num_cells() == 0);
    CHECK(idx.candidates({3, 3, 3}).empty());
    CHECK(idx.cell_size() == 2.0);

    // Radius 3 * 0.1 = 0.3 m around (3.9, 2.1, 4.1): x spans [3.6, 4.2] -> cells 1,2;
    // y [1.8, 2.4] -> cells 0,1; z [3.8, 4.4] -> cells 1,2. 8 cells total.
    GaussianScene one;
    one.class_names = {"a"};
    one.gaussians.emplace_back(Vec3(3.9, 2.1, 4.1), Vec3::Constant(std::log(0.1)),
                               Quat::Identity(), VecX::Zero(1));
    SpatialIndex idx1(one, spec, 3.0);
    auto cells = idx1.cells_of(0);
    std::set<Index3> got(cells.begin(), cells.end());
    std::set<Index3> want;
    for (int x : {1, 2}) {
        for (int y : {0, 1}) {
            for (int z : {1, 2}) {
                want.insert({x, y, z});
            }
        }
    }
    CHECK(got == want);
    CHECK(idx1.num_cells() == 8);

    // Fully interior: (1.0, 1.0, 1.0) +- 0.3 stays in cell (0,0,0).
    GaussianScene inner = one;
    inner.gaussians[0] = inner.gaussians[0].with_mean(Vec3(1.0, 1.0, 1.0));
    SpatialIndex idx2(inner, spec, 3.0);
    CHECK(idx2.cells_of(0).size() == 1);
    CHECK(idx2.candidates({2, 2, 2}).size() == 1);
    CHECK(idx2.candidates({15, 15, 15}).empty());
    CHECK_THROWS_AS(idx2.candidates({16, 0, 0}), std::out_of_range);
}

TEST_CASE("spatial index has no false negatives") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 12; ++trial) {
        const auto spec = cube(12, 0.4, Vec3(-1.0, -2.0, 0.5));
        testing::RandomSceneOptions opt;
        opt.max_log_scale = std::log(1.2);
        const int n = 16 + 16 * (trial % 8);  // up to 128
        const auto scene = testing::random_scene(rng, spec, n, opt);
        const double kappa = 3.0;
        SpatialIndex idx(scene, spec, kappa, trial % 2 ? 0.7 : 0.0);
        std::size_t missed = 0;
        for (std::size_t v = 0; v < spec.num_voxels(); ++v) {
            const Index3 ijk = spec.unflatten(v);
            const auto cand = idx.candidates(ijk);
            CHECK(std::is_sorted(cand.begin(), cand.end()));
            CHECK(std::adjacent_find(cand.begin(), cand.end()) == cand.end());
            const Vec3 x = voxel_center(spec, ijk);
            for (std::size_t i = 0; i < scene.size(); ++i) {
                if (testing::mahalanobis_oracle(scene.gaussians[i], x) <= kappa &&
                    !std::binary_search(cand.begin(), cand.end(), static_cast<std::uint32_t>(i))) {
                    ++missed;
                }
            }
        }
        CHECK(missed == 0);
    }
}

TEST_CASE("spatial index is order insensitive") {
    std::mt19937_64 rng(5);
    const auto spec = cube(10, 0.5);
    const auto scene = testing::random_scene(rng, spec, 40);
    std::vector<std::size_t> perm(scene.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    GaussianScene shuffled = scene;
    for (std::size_t i = 0; i < perm.size(); ++i) {
        shuffled.gaussians[i] = scene.gaussians[perm[i]];
    }
    SpatialIndex a(scene, spec, 3.0);
    SpatialIndex b(shuffled, spec, 3.0);
    for (std::size_t v = 0; v < spec.num_voxels(); ++v) {
        const auto ca = a.candidates(spec.unflatten(v));
        const auto cb = b.candidates(spec.unflatten(v));
        std::set<std::size_t> sa(ca.begin(), ca.end());
        std::set<std::size_t> sb;
        for (auto j : cb) {
            sb.insert(perm[j]);
        }
        CHECK(sa == sb);
    }
}
