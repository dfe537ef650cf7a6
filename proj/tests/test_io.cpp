// Copyright Contributors to the GaussAD Project
// SPDX-License-Identifier: Apache-2.0

#include "gad/io.h"

#include "gad/error.h"

#include "oracles.h"

#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <random>

using namespace gad;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("gad_io_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

std::string error_of(const auto& fn) {
    try {
        fn();
    } catch (const FormatError& e) {
        return e.what();
    }
    return "(no error)";
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

} // namespace

TEST_CASE("scene json round trip") {
    std::mt19937_64 rng(42);
    GridSpec spec;
    spec.dims = {10, 10, 10};
    spec.voxel_size = 0.37;
    for (int t = 0; t < 10; ++t) {
        auto s = testing::random_scene(rng, spec, 1 + 7 * t);
        s.frame_pose = make_pose(0.1 * t, -1.0 / 3.0, 2.0 * t);
        s.timestamp_index = t;
        const auto text = scene_to_json(s);
        const auto back = scene_from_json(text);
        CHECK(back == s);
        CHECK(scene_to_json(back) == text);
    }
    const auto dir = temp_dir("scene");
    const auto s = testing::random_scene(rng, spec, 5);
    save_scene(dir / "s.json", s);
    CHECK(load_scene(dir / "s.json") == s);
    GaussianScene empty;
    empty.class_names = {"only"};
    CHECK(scene_from_json(scene_to_json(empty)) == empty);
}

TEST_CASE("scene json errors") {
    std::mt19937_64 rng(1);
    GridSpec spec;
    spec.dims = {4, 4, 4};
    const auto s = testing::random_scene(rng, spec, 3);
    std::string text = scene_to_json(s);

    std::string v99 = text;
    v99.replace(v99.find("\"version\": 1"), 12, "\"version\": 99");
    CHECK(contains(error_of([&] { scene_from_json(v99); }), "unsupported version"));

    // Drop one logit from gaussian 2.
    auto doc = text;
    std::size_t pos = 0;
    for (int i = 0; i < 3; ++i) pos = doc.find("\"logits\"", pos + 1);
    const auto open = doc.find('[', pos);
    const auto comma = doc.find(',', open);
    doc.erase(open + 1, comma - open);
    CHECK(contains(error_of([&] { scene_from_json(doc); }), "gaussians[2].logits"));

    CHECK(contains(error_of([&] { scene_from_json("{not json"); }), "malformed"));
    CHECK(contains(error_of([&] { scene_from_json(R"({"format":"gauss-scene","version":1})"); }),
                   "class_names"));
    std::string extra = text;
    extra.insert(1, "\"bogus\": 3,");
    CHECK(contains(error_of([&] { scene_from_json(extra); }), "bogus"));
}

TEST_CASE("grid binary round trip and fixture") {
    GridSpec spec;
    spec.origin = Vec3(-1.5, 2.25, 0.1);
    spec.dims = {7, 3, 2};
    spec.voxel_size = 0.4;
    OccupancyGrid g(spec, 4);
    for (std::size_t v = 0; v < g.labels.size(); v += 3) g.labels[v] = v % 4;
    const auto bytes = grid_to_bytes(g);
    CHECK(bytes.size() == 56 + 42);
    const auto back = grid_from_bytes(bytes);
    CHECK(back == g);
    CHECK(grid_to_bytes(back) == bytes);

    // Hand-built 2x1x1 file: origin 0, voxel 1.0, 3 classes, labels [2, EMPTY].
    std::vector<std::uint8_t> f{'O', 'C', 'C', 'G', 1, 0, 0, 0};
    for (int i = 0; i < 24; ++i) f.push_back(0);                  // origin
    for (std::uint8_t d : {2, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0}) f.push_back(d);
    for (std::uint8_t b : {0, 0, 0, 0, 0, 0, 0xF0, 0x3F}) f.push_back(b);  // 1.0
    for (std::uint8_t b : {3, 0, 0, 0, 2, 0xFF}) f.push_back(b);
    const auto h = grid_from_bytes(f);
    CHECK(h.spec.dims == Index3{2, 1, 1});
    CHECK(h.spec.voxel_size == 1.0);
    CHECK(h.num_classes == 3);
    CHECK(h.labels == std::vector<std::uint8_t>{2, kEmpty});

    auto bad = f;
    bad[0] = 'X';
    CHECK(contains(error_of([&] { grid_from_bytes(bad); }), "magic"));
    auto trunc = f;
    trunc.pop_back();
    CHECK(contains(error_of([&] { grid_from_bytes(trunc); }), "byte offset 56"));
    auto early = std::vector<std::uint8_t>(f.begin(), f.begin() + 30);
    CHECK(contains(error_of([&] { grid_from_bytes(early); }), "byte offset 24"));
    auto v2 = f;
    v2[4] = 2;
    CHECK(contains(error_of([&] { grid_from_bytes(v2); }), "unsupported version"));
    auto lab = f;
    lab[56] = 3;
    CHECK(contains(error_of([&] { grid_from_bytes(lab); }), "label 3"));

    const auto dir = temp_dir("grid");
    save_grid(dir / "g.occ", g);
    CHECK(load_grid(dir / "g.occ") == g);
}

TEST_CASE("flows binary round trip") {
    FlowField f = FlowField::zeros(3, 4);
    f.steps[1][2] = Vec3(0.5, -1.25, 3.0);
    f.steps[2][0] = Vec3(0.1, 0.2, 0.3);  // not representable in f32
    const auto bytes = flows_to_bytes(f);
    CHECK(bytes.size() == 16 + 3 * 4 * 12);
    const auto back = flows_from_bytes(bytes);
    CHECK(back.steps[1][2] == f.steps[1][2]);
    CHECK(back.steps[2][0].x() == static_cast<double>(0.1f));
    CHECK(flows_to_bytes(back) == bytes);
    CHECK(flows_from_bytes(bytes, 4) == back);
    CHECK(contains(error_of([&] { flows_from_bytes(bytes, 5); }), "N = 4"));
    auto trunc = bytes;
    trunc.resize(bytes.size() - 1);
    CHECK(contains(error_of([&] { flows_from_bytes(trunc); }), "truncated"));
}

TEST_CASE("trajectory csv") {
    Trajectory t;
    t.waypoints = {{1.0 / 3.0, -2.5, 0.1}, {2.0, 1e-17, -3.0}};
    const auto csv = trajectory_to_csv(t);
    CHECK(csv.rfind("step,x,y,psi\n", 0) == 0);
    CHECK(trajectory_from_csv(csv) == t);
    CHECK(contains(error_of([] { trajectory_from_csv("step,x,psi\n1,0,0\n"); }), "'y'"));
    CHECK(contains(error_of([] { trajectory_from_csv("step,x,y,psi\n1,0,abc,0\n"); }), "column 'y'"));
    CHECK(contains(error_of([] { trajectory_from_csv("step,x,y,psi\n2,0,0,0\n"); }), "sequence"));
    // Column order is taken from the header.
    const auto r = trajectory_from_csv("psi,y,x,step\n0.5,2,1,1\n");
    CHECK(r.waypoints[0] == Waypoint{1.0, 2.0, 0.5});
}

TEST_CASE("scenario and planner configs") {
    const std::string text = R"({
      "seed": 3, "steps": 4,
      "grid": {"origin": [-4, -8, -0.5], "dims": [48, 32, 6], "voxel_size": 0.5},
      "layout": {"corridor_width": 8},
      "agents": [{"class_id": 2, "pose": [10, 2, 3.141592653589793], "speed": 2}]
    })";
    const auto c = scenario_config_from_json(text);
    CHECK(c.seed == 3);
    CHECK(c.steps == 4);
    CHECK(c.agents.size() == 1);
    CHECK(c.layout.corridor_width == 8.0);
    const auto again = scenario_config_from_json(scenario_config_to_json(c));
    CHECK(scenario_config_to_json(again) == scenario_config_to_json(c));
    CHECK(contains(error_of([&] { scenario_config_from_json(R"({"grid": {"origin":[0,0,0],"dims":[2,2,2],"voxel_size":1}, "stepz": 3})"); }), "stepz"));
    CHECK(contains(error_of([&] { scenario_config_from_json(R"({"grid": {"origin":[0,0,0],"dims":[2,2,2],"voxel_size":-1}})"); }), "grid"));

    const auto p = planner_config_from_json(R"({"speeds":[4,5],"curvatures":[0],
        "grid":{"origin":[-4,-8,0],"dims":[8,8,4],"voxel_size":0.5},"num_classes":3,
        "obstacles":{"non_obstacle_ids":[0]}})");
    CHECK(p.speeds.size() == 2);
    CHECK(p.obstacles.non_obstacle_ids == std::vector<int>{0});
    CHECK(contains(error_of([] { planner_config_from_json(R"({"num_classes":3})"); }), "grid"));
}

TEST_CASE("scenario bundle round trip") {
    ScenarioConfig c;
    c.grid.origin = Vec3(-4, -8, -0.5);
    c.grid.dims = {24, 32, 6};
    c.grid.voxel_size = 0.5;
    c.steps = 2;
    c.layout.corridor_width = 8.0;
    c.random_agents = 2;
    const auto s = generate(c);
    const auto dir = temp_dir("scenario");
    save_scenario(dir, s);
    const auto back = load_scenario(dir);
    CHECK(back.gt_grids == s.gt_grids);
    CHECK(back.anchor_grids == s.anchor_grids);
    CHECK(back.gt_boxes == s.gt_boxes);
    CHECK(back.gt_map == s.gt_map);
    CHECK(back.gt_ego == s.gt_ego);
    CHECK(back.config.agents.size() == 2);
    CHECK(back.config.random_agents == 0);
}
