// Copyright Contributors to the GaussAD Project
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Thresholds are pinned below.

#include "gad/core.h"
#include "gad/fit.h"
#include "gad/flow.h"
#include "gad/io.h"
#include "gad/losses.h"
#include "gad/metrics.h"
#include "gad/plan.h"
#include "gad/splat.h"
#include "gad/synth.h"

#include "oracles.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#ifndef GAD_SOURCE_DIR
#error "GAD_SOURCE_DIR must point at the repository root"
#endif
#ifndef GAD_CLI
#error "GAD_CLI must point at the gaussad binary"
#endif

using namespace gad;
namespace fs = std::filesystem;

namespace {

// ---- pinned thresholds -----------------------------------------------------

constexpr int kGradScenes = 100;
constexpr double kGradRelTol = 1e-4;
constexpr double kGradSeconds = 30.0;

constexpr int kSplatScenes = 50;
constexpr double kFieldTol = 1e-9;
constexpr double kSplatSeconds = 60.0;

constexpr int kPoses = 1000;
constexpr double kPoseTol = 1e-9;

constexpr double kFitMiou = 0.8;
constexpr double kFitSeconds = 60.0;

constexpr double kForecastMiou = 0.9;

constexpr double kPruneFraction = 0.4;
constexpr double kPruneRelDrop = 0.10;

constexpr double kMiouHandTol = 1e-15;  // 5/12 as (1/2 + 1/3) / 2 carries one extra rounding
constexpr double kL2Tol = 1e-12;

constexpr double kLinearityRelTol = 1e-12;

const std::vector<int> kHorizons{2, 4, 6};  // 1 s, 2 s, 3 s at dt = 0.5

// ---- helpers ---------------------------------------------------------------

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + std::string("FAILED ") + what;
        }
    }
    void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

fs::path config_path(const std::string& name) {
    return fs::path(GAD_SOURCE_DIR) / "configs" / name;
}

struct Fitted {
    Scenario sc;
    FitConfig cfg;
    FitResult fit;
    double fit_seconds = 0.0;
};

Fitted fit_scenario(const std::string& config, std::size_t n) {
    Fitted f;
    f.sc = generate(scenario_config_from_json(read_text(config_path(config))));
    f.cfg.num_gaussians = n;
    f.cfg.max_iters = 500;
    f.cfg.classes = f.sc.config.classes();
    f.cfg.num_workers = 1;
    const auto t0 = Clock::now();
    f.fit = fit_gaussians(f.sc.gt_grids[0], f.cfg);
    f.fit_seconds = seconds_since(t0);
    return f;
}

// The three acceptance scenarios, fitted once and shared.
struct Fixtures {
    std::optional<Fitted> single_box, moving_agent, corridor;

    const Fitted& get_single_box() {
        if (!single_box) single_box = fit_scenario("single_box.json", 64);
        return *single_box;
    }
    const Fitted& get_moving_agent() {
        if (!moving_agent) moving_agent = fit_scenario("moving_agent.json", 512);
        return *moving_agent;
    }
    const Fitted& get_corridor() {
        if (!corridor) corridor = fit_scenario("corridor.json", 768);
        return *corridor;
    }
    std::vector<const Fitted*> all() {
        return {&get_single_box(), &get_moving_agent(), &get_corridor()};
    }
};

double scene_miou(const GaussianScene& scene, const OccupancyGrid& target, const SplatParams& p) {
    return miou_iou(splat(scene, target.spec, p).grid, target).miou;
}

GridSpec cube(int n, double vs) {
    GridSpec s;
    s.dims = {n, n, n};
    s.voxel_size = vs;
    return s;
}

// ---- 1. gradient correctness -----------------------------------------------

Outcome gradients() {
    Outcome o;
    std::mt19937_64 rng(20241);
    std::uniform_int_distribution<int> count(1, 16);
    std::uniform_int_distribution<int> cls(0, 3);
    const GridSpec spec = cube(8, 0.5);
    SplatParams p;
    p.cfg.num_classes = 3;
    double worst = 0.0;
    std::size_t compared = 0, excluded = 0;
    const auto t0 = Clock::now();
    for (int s = 0; s < kGradScenes; ++s) {
        const auto scene = testing::random_scene(rng, spec, count(rng));
        OccupancyGrid target(spec, 3);
        for (auto& l : target.labels) {
            const int c = cls(rng);
            l = c == 3 ? kEmpty : static_cast<std::uint8_t>(c);
        }
        GradientCheckOptions opt;
        opt.step = 1e-4;
        opt.rotation = false;
        const auto rep = check_gradients(scene, target, p, opt);
        worst = std::max(worst, rep.max_rel());
        for (const auto* g : {&rep.mean, &rep.log_scale, &rep.logits}) {
            compared += g->compared;
            excluded += g->excluded;
        }
    }
    const double secs = seconds_since(t0);
    o.note(std::to_string(kGradScenes) + " scenes, " + std::to_string(compared) + " components (" +
           std::to_string(excluded) + " at cutoff), max rel err " + fmt("%.2e", worst) + ", " +
           fmt("%.1f s", secs));
    o.require(worst < kGradRelTol, "max rel err < 1e-4");
    o.require(compared > 0, "components compared");
    o.require(secs < kGradSeconds, "runtime < 30 s");
    return o;
}

// ---- 2. splat oracle equivalence -------------------------------------------

// All-pairs field with the kernel, cutoff and softmax recomputed from scratch.
std::vector<double> oracle_fields(const GaussianScene& scene, const GridSpec& spec, int c,
                                  double kappa) {
    std::vector<double> f(spec.num_voxels() * c, 0.0);
    for (const auto& g : scene.gaussians) {
        const auto probs = testing::softmax_oracle(g.logits());
        for (std::size_t v = 0; v < spec.num_voxels(); ++v) {
            const Vec3 x = spec.center_unchecked(spec.unflatten(v));
            if (testing::mahalanobis_oracle(g, x) > kappa) continue;
            const double d = testing::density_oracle(g, x);
            for (int k = 0; k < c; ++k) f[v * c + k] += d * static_cast<double>(probs[k]);
        }
    }
    return f;
}

Outcome splat_equivalence() {
    Outcome o;
    std::mt19937_64 rng(777);
    std::uniform_int_distribution<int> count(1, 128);
    std::uniform_int_distribution<int> side(8, 32);
    double splat_secs = 0.0, worst_field = 0.0;
    std::size_t label_mismatch = 0, brute_mismatch = 0, voxels = 0;
    for (int s = 0; s < kSplatScenes; ++s) {
        GridSpec spec;
        spec.dims = {side(rng), side(rng), side(rng)};
        spec.voxel_size = 0.25;
        testing::RandomSceneOptions opt;
        opt.max_log_scale = std::log(0.6);
        const auto scene = testing::random_scene(rng, spec, count(rng), opt);
        SplatParams p;
        p.cfg.num_classes = 3;
        p.store_fields = true;
        const auto t0 = Clock::now();
        const auto sparse = splat(scene, spec, p);
        p.use_index = false;
        const auto brute = splat(scene, spec, p);
        splat_secs += seconds_since(t0);
        brute_mismatch += sparse.grid != brute.grid || sparse.fields != brute.fields;

        const auto f = oracle_fields(scene, spec, 3, p.cfg.mahalanobis_cutoff);
        for (std::size_t v = 0; v < spec.num_voxels(); ++v) {
            double total = 0.0;
            int best = 0;
            for (int k = 0; k < 3; ++k) {
                worst_field = std::max(worst_field, std::abs(sparse.fields[v * 3 + k] - f[v * 3 + k]));
                total += f[v * 3 + k];
                if (f[v * 3 + k] > f[v * 3 + best]) best = k;
            }
            const std::uint8_t want =
                total < p.cfg.empty_evidence ? kEmpty : static_cast<std::uint8_t>(best);
            label_mismatch += sparse.grid.labels[v] != want;
        }
        voxels += spec.num_voxels();
    }
    o.note(std::to_string(kSplatScenes) + " scenes, " + std::to_string(voxels) + " voxels, " +
           std::to_string(label_mismatch) + " label mismatches, max field err " +
           fmt("%.2e", worst_field) + ", splat " + fmt("%.1f s", splat_secs));
    o.require(brute_mismatch == 0, "indexed == all-pairs bitwise");
    o.require(label_mismatch == 0, "labels equal the oracle");
    o.require(worst_field <= kFieldTol, "fields within 1e-9");
    o.require(splat_secs < kSplatSeconds, "runtime < 60 s");
    return o;
}

// ---- 3. SE(2) algebra ------------------------------------------------------

double pose_dist(const Pose2& a, const Pose2& b) {
    return std::max({std::abs(a.x - b.x), std::abs(a.y - b.y), std::abs(wrap_angle(a.yaw - b.yaw))});
}

double scene_dist(const GaussianScene& a, const GaussianScene& b) {
    double d = pose_dist(a.frame_pose, b.frame_pose);
    for (std::size_t i = 0; i < a.size(); ++i) {
        d = std::max(d, (a.gaussians[i].mean() - b.gaussians[i].mean()).lpNorm<Eigen::Infinity>());
        d = std::max(d, a.gaussians[i].rotation().angularDistance(b.gaussians[i].rotation()));
    }
    return d;
}

Outcome se2_algebra() {
    Outcome o;
    std::mt19937_64 rng(31337);
    std::uniform_real_distribution<double> t(-20.0, 20.0), yaw(-M_PI, M_PI);
    const auto pose = [&] { return make_pose(t(rng), t(rng), yaw(rng)); };
    const auto scene = testing::random_scene(rng, cube(8, 0.5), 8);
    const Pose2 id{};
    double worst = 0.0;
    for (int i = 0; i < kPoses; ++i) {
        const Pose2 a = pose(), b = pose(), c = pose();
        worst = std::max({worst, pose_dist(compose(a, id), a), pose_dist(compose(id, a), a),
                          pose_dist(compose(a, inverse(a)), id), pose_dist(compose(inverse(a), a), id),
                          pose_dist(compose(compose(a, b), c), compose(a, compose(b, c)))});
        const Vec2 x(t(rng), t(rng));
        worst = std::max(worst, (to_local(a, to_parent(a, x)) - x).norm());
        // Re-expressing in a, then in b relative to a, equals one step into a∘b.
        worst = std::max(worst, scene_dist(ego_transform(ego_transform(scene, a), b),
                                           ego_transform(scene, compose(a, b))));
        worst = std::max(worst, scene_dist(ego_transform(scene, id), scene));
        worst = std::max(worst, scene_dist(ego_transform(ego_transform(scene, a), inverse(a)),
                                           ego_transform(scene, id)));
        const Vec3 d(t(rng), t(rng), t(rng));
        const Vec3 local = rotate_into(a, d);
        worst = std::max(worst, std::abs(local.z() - d.z()));
        worst = std::max(worst, (to_parent({0, 0, a.yaw}, local.head<2>()) - d.head<2>()).norm());
    }
    o.note(std::to_string(kPoses) + " poses, max deviation " + fmt("%.2e", worst));
    o.require(worst <= kPoseTol, "invariants within 1e-9");
    return o;
}

// ---- 4. fitting convergence ------------------------------------------------

Outcome fitting(Fixtures& fx) {
    Outcome o;
    const Fitted& f = fx.get_single_box();
    const double m = scene_miou(f.fit.scene, f.sc.gt_grids[0], f.cfg.splat_params());
    const auto& h = f.fit.loss_history;
    o.note("grid 16^3, N=64, " + std::to_string(f.cfg.max_iters) + " iters: mIoU " + fmt("%.4f", m) +
           ", loss " + fmt("%.4f", h.front()) + " -> " + fmt("%.4f", h.back()) + ", " +
           fmt("%.2f s", f.fit_seconds));
    o.require(f.sc.gt_grids[0].spec.dims == Index3{16, 16, 16}, "grid is 16^3");
    o.require(m >= kFitMiou, "mIoU >= 0.8");
    o.require(h.back() <= h.front(), "final loss <= initial");
    o.require(f.fit_seconds < kFitSeconds, "runtime < 60 s");
    return o;
}

// ---- 5. forecasting fidelity and ordering ----------------------------------

Outcome forecasting(Fixtures& fx) {
    Outcome o;
    const Fitted& f = fx.get_moving_agent();
    const SplatParams p = f.cfg.splat_params();
    FlowFitConfig fc;
    fc.classes = f.sc.config.classes();
    const std::vector<OccupancyGrid> future(f.sc.gt_grids.begin() + 1, f.sc.gt_grids.end());
    const FlowField flows = fit_flows(f.fit.scene, future, f.sc.gt_ego, fc);
    const auto scenes = forecast(f.fit.scene, flows, f.sc.gt_ego);
    const OccupancyGrid current = splat(f.fit.scene, f.sc.config.grid, p).grid;
    std::string rows;
    double flow_last = 0.0, copy_last = 0.0;
    for (int h : kHorizons) {
        const double mf = scene_miou(scenes[h - 1], f.sc.gt_grids[h], p);
        const double mc =
            miou_iou(copy_paste_forecast(current, f.sc.gt_ego.waypoints[h - 1]), f.sc.gt_grids[h]).miou;
        rows += fmt(" %.1fs", h * f.sc.config.dt) + fmt(" flow %.4f", mf) + fmt(" copy %.4f", mc);
        o.require(mf >= mc, "flow >= copy-paste at " + fmt("%.1f s", h * f.sc.config.dt));
        flow_last = mf;
        copy_last = mc;
    }
    o.note("mIoU" + rows);
    o.require(flow_last > copy_last, "flow > copy-paste at 3 s");
    o.require(flow_last >= kForecastMiou, "flow mIoU at 3 s >= 0.9");
    return o;
}

// ---- 6. pruning robustness -------------------------------------------------

Outcome pruning(Fixtures& fx) {
    Outcome o;
    for (const Fitted* f : fx.all()) {
        const SplatParams p = f->cfg.splat_params();
        const auto pr = prune(f->fit.scene, kPruneFraction);
        const double before = scene_miou(f->fit.scene, f->sc.gt_grids[0], p);
        const double after = scene_miou(pr.scene, f->sc.gt_grids[0], p);
        const double drop = before > 0.0 ? (before - after) / before : 1.0;
        o.note(std::to_string(f->fit.scene.size()) + "->" + std::to_string(pr.scene.size()) +
               fmt(": %.4f", before) + fmt(" -> %.4f", after) + fmt(" (%.1f%%)", 100.0 * drop));
        o.require(drop <= kPruneRelDrop, "relative drop <= 10%");
    }
    return o;
}

// ---- 7. planner safety -----------------------------------------------------

Outcome planner(Fixtures& fx) {
    Outcome o;
    const Fitted& f = fx.get_corridor();
    const auto cfg = planner_config_from_json(read_text(config_path("planner_corridor.json")));
    const Trajectory reference = load_trajectory(config_path("reference_straight.csv"), cfg.dt);
    const FlowField flows = gt_flows(f.sc, f.fit.scene);
    const auto t0 = Clock::now();
    const PlanResult r = plan(f.fit.scene, flows, cfg, reference);
    const double secs = seconds_since(t0);

    CollisionScenario scen;
    scen.grids.assign(f.sc.anchor_grids.begin() + 1, f.sc.anchor_grids.end());
    scen.boxes.assign(f.sc.gt_boxes.begin() + 1, f.sc.gt_boxes.end());
    ObstacleFilter filter;
    filter.non_obstacle_ids = {f.sc.config.layout.drivable_class};
    const auto rate = [&](const Trajectory& t) {
        return collision_rate(std::span(&t, 1), std::span(&scen, 1), kHorizons, Footprint{}, filter);
    };
    const auto planned = rate(r.trajectory);
    const auto straight = rate(reference);
    std::string rows;
    for (std::size_t i = 0; i < kHorizons.size(); ++i) {
        rows += fmt(" %.0f%%", planned[i]);
    }
    rows += " | straight";
    for (double v : straight) rows += fmt(" %.0f%%", v);
    o.note("candidate " + std::to_string(r.chosen) + "/" + std::to_string(r.candidates.size()) +
           " [" + fmt("%.2f s", secs) + "] plan CR at 1/2/3 s:" + rows);
    for (double v : planned) o.require(v == 0.0, "plan collision rate 0%");
    o.require(straight[1] == 100.0 && straight[2] == 100.0, "straight reference 100% at 2 s and 3 s");
    return o;
}

// ---- 8. metric identities --------------------------------------------------

OccupancyGrid labels_2x2(std::initializer_list<int> labels) {
    GridSpec s;
    s.dims = {2, 2, 1};
    OccupancyGrid g(s, 2);
    std::size_t v = 0;
    for (int l : labels) g.labels[v++] = l < 0 ? kEmpty : static_cast<std::uint8_t>(l);
    return g;
}

Outcome metric_identities() {
    Outcome o;
    // mIoU: class 0 IoU 1/2, class 1 IoU 1/3.
    const auto s = miou_iou(labels_2x2({0, 1, 1, 1}), labels_2x2({0, 0, 1, -1}));
    o.note(fmt("mIoU %.17g", s.miou));
    o.require(std::abs(s.miou - 5.0 / 12.0) <= kMiouHandTol, "mIoU hand case 5/12");
    o.require(s.per_class[0] == 0.5 && s.per_class[1] == 1.0 / 3.0 && s.iou == 0.75, "per-class IoU");

    // L2 averaged: lateral error 0.2 k at step k.
    Trajectory gt, plan;
    for (int k = 1; k <= 6; ++k) {
        gt.waypoints.push_back({1.0 * k, 0.0, 0.0});
        plan.waypoints.push_back({1.0 * k, 0.2 * k, 0.0});
    }
    const auto avg = l2_errors(plan, gt, kHorizons, L2Mode::Averaged);
    o.note(fmt("L2 avg %.6f", avg[0]) + fmt(" %.6f", avg[1]) + fmt(" %.6f", avg[2]));
    const double want[] = {0.3, 0.5, 0.7};
    for (int i = 0; i < 3; ++i) o.require(std::abs(avg[i] - want[i]) <= kL2Tol, "L2 averaged case");

    // Collision counting: one blocked and one free sample.
    Trajectory straight;
    for (int k = 1; k <= 6; ++k) straight.waypoints.push_back({1.0 * k, 0.0, 0.0});
    Box agent;
    agent.center = Vec3(8.0, 0.0, 0.75);
    agent.size = Vec3(4.0, 2.0, 1.5);
    CollisionScenario blocked, open;
    blocked.boxes.assign(6, {agent});
    const std::vector<Trajectory> plans{straight, straight};
    const std::vector<CollisionScenario> scen{blocked, open};
    const auto cr = collision_rate(plans, scen, kHorizons);
    o.note(fmt("CR %.0f", cr[0]) + fmt("/%.0f", cr[1]) + fmt("/%.0f", cr[2]));
    o.require(cr == std::vector<double>{0.0, 50.0, 50.0}, "collision counting 50%");
    return o;
}

// ---- 9. determinism --------------------------------------------------------

int run(const std::string& args) {
    const std::string cmd = std::string("\"") + GAD_CLI + "\" " + args + " 2>&1";
    return std::system(cmd.c_str());
}

std::map<std::string, std::vector<std::uint8_t>> snapshot(const fs::path& dir) {
    std::map<std::string, std::vector<std::uint8_t>> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = read_bytes(e.path());
    }
    return out;
}

bool pipeline(const fs::path& d, int workers) {
    const std::string c = (fs::path(GAD_SOURCE_DIR) / "configs").string();
    const std::string o = d.string();
    const std::string w = " --workers " + std::to_string(workers);
    const std::string spec = "'{\"origin\":[-8,-8,-0.5],\"dims\":[32,32,6],\"voxel_size\":0.5}'";
    fs::create_directories(d);
    write_text(d / "still.csv", "step,x,y,psi\n1,0,0,0\n2,0,0,0\n3,0,0,0\n4,0,0,0\n5,0,0,0\n6,0,0,0\n");
    const std::vector<std::string> steps{
        "synth --config " + c + "/moving_agent.json --out " + o + "/ma",
        "synth --config " + c + "/corridor.json --out " + o + "/co",
        "fit --target " + o + "/ma/grid_0.occ --out " + o + "/ma.json --iters 120 --seed 5" + w +
            " --loss-csv " + o + "/loss.csv",
        "splat --scene " + o + "/ma.json --spec " + spec + " --out " + o + "/ma.occ" + w,
        "fit-flows --scene " + o + "/ma.json --scenario " + o + "/ma --out " + o + "/ma.gflw --iters 30" + w,
        "forecast --scene " + o + "/ma.json --flows " + o + "/ma.gflw --plan " + o +
            "/still.csv --spec " + spec + " --out " + o + "/fc" + w,
        "forecast --scene " + o + "/ma.json --plan " + o + "/still.csv --spec " + spec + " --out " + o +
            "/cp --baseline copy-paste" + w,
        "prune --scene " + o + "/ma.json --fraction 0.4 --out " + o + "/ma_pruned.json",
        "fit --target " + o + "/co/grid_0.occ --out " + o + "/co.json --iters 120 --n-gaussians 768" + w,
        "fit-flows --scene " + o + "/co.json --scenario " + o + "/co --out " + o + "/co.gflw --method analytic",
        "plan --scene " + o + "/co.json --flows " + o + "/co.gflw --planner " + c +
            "/planner_corridor.json --reference " + c + "/reference_straight.csv --out " + o +
            "/plan.csv --costs " + o + "/costs.csv",
        "eval --mode occ --pred " + o + "/ma.occ --gt " + o + "/ma/grid_0.occ --report " + o +
            "/r_occ.csv --breakdown " + o + "/b_occ.txt --dynamic 2",
        "eval --mode forecast --pred " + o + "/fc --gt " + o + "/ma --report " + o + "/r_fc.csv",
        "eval --mode plan --pred " + o + "/plan.csv --gt " + o + "/co --report " + o + "/r_plan.csv",
    };
    for (const auto& s : steps) {
        if (run(s) != 0) {
            std::printf("    command failed: gaussad %s\n", s.c_str());
            return false;
        }
    }
    return true;
}

Outcome determinism() {
    Outcome o;
    const fs::path root = fs::temp_directory_path() / "gad_acceptance_determinism";
    fs::remove_all(root);
    const bool ok = pipeline(root / "a", 1) && pipeline(root / "b", 1);
    o.require(ok, "CLI pipeline ran");
    if (ok) {
        const auto a = snapshot(root / "a");
        o.note(std::to_string(a.size()) + " output files");
        o.require(a == snapshot(root / "b"), "re-run byte-identical");
        const std::string spec = "'{\"origin\":[-8,-8,-0.5],\"dims\":[32,32,6],\"voxel_size\":0.5}'";
        bool same = true;
        for (int w : {2, 4}) {
            const fs::path out = root / ("ma_w" + std::to_string(w) + ".occ");
            same = same && run("splat --scene " + (root / "a" / "ma.json").string() + " --spec " + spec +
                               " --out " + out.string() + " --workers " + std::to_string(w)) == 0 &&
                   read_bytes(out) == a.at("ma.occ");
        }
        o.require(same, "CLI splat independent of worker count");
    }
    fs::remove_all(root);

    std::mt19937_64 rng(4);
    std::size_t diff = 0;
    for (int s = 0; s < 10; ++s) {
        const GridSpec spec = cube(20, 0.3);
        const auto scene = testing::random_scene(rng, spec, 96);
        SplatParams p;
        p.cfg.num_classes = 3;
        p.store_fields = true;
        const auto ref = splat(scene, spec, p);
        for (int w : {2, 3, 4, 7}) {
            p.num_workers = w;
            const auto r = splat(scene, spec, p);
            diff += r.grid != ref.grid || r.fields != ref.fields;
        }
    }
    o.require(diff == 0, "splat independent of worker count (1,2,3,4,7)");
    return o;
}

// ---- 10. loss ledger -------------------------------------------------------

SceneDescription gt_description(const Scenario& sc) {
    SceneDescription d;
    d.boxes = sc.boxes_in_ego(0);
    d.map = sc.gt_map;
    for (std::size_t i = 0; i < d.boxes.size(); ++i) {
        std::vector<Vec2> m;
        for (std::size_t k = 1; k < sc.gt_boxes.size(); ++k) m.push_back(sc.gt_boxes[k][i].center.head<2>());
        d.motions.push_back(m);
    }
    d.occupancy = sc.gt_grids[0];
    return d;
}

SceneDescription perturbed(const Scenario& sc) {
    SceneDescription d = gt_description(sc);
    for (auto& b : d.boxes) {
        b.center.x() += 0.5;
        b.yaw += 0.1;
    }
    for (auto& l : d.map) {
        for (auto& p : l.points) p.y() += 0.3;
    }
    for (auto& m : d.motions) {
        for (auto& p : m) p.x() += 0.2;
    }
    d.occupancy = copy_paste_forecast(sc.gt_grids[0], {1.0, 0.0, 0.0});
    return d;
}

bool close_rel(double a, double b) {
    return std::abs(a - b) <= kLinearityRelTol * std::max({1.0, std::abs(a), std::abs(b)});
}

// Re-adds the weighted terms; the breakdown's total must agree.
bool consistent(const LossBreakdown& b) {
    double sum = 0.0;
    for (const auto& t : b.terms) sum += t.contribution();
    return close_rel(sum, b.total);
}

using Evaluator = std::function<LossBreakdown(const LossWeights&)>;

struct WeightField {
    double LossWeights::*field;
    const char* term;
};

// Gating: each zero weight removes exactly its term. Linearity: totals are
// linear in the weight vector.
void check_composition(Outcome& o, const std::string& label, const Evaluator& eval,
                       const std::vector<WeightField>& fields, std::mt19937_64& rng) {
    const LossWeights ones;
    const auto full = eval(ones);
    o.require(consistent(full), label + " total = sum of weighted terms");
    for (const auto& f : fields) {
        o.require(full.has(f.term), label + " has " + f.term);
        LossWeights w = ones;
        w.*f.field = 0.0;
        const auto gated = eval(w);
        o.require(!gated.has(f.term), label + " gates " + f.term);
        for (const auto& g : fields) {
            if (g.term != f.term) o.require(gated.has(g.term), label + " keeps " + g.term);
        }
        o.require(close_rel(gated.total + full.value(f.term), full.total), label + " gated total");
    }
    std::uniform_real_distribution<double> u(0.1, 3.0);
    for (int trial = 0; trial < 3; ++trial) {
        LossWeights a, b, ab;
        const double alpha = u(rng);
        for (const auto& f : fields) {
            a.*f.field = u(rng);
            b.*f.field = u(rng);
            ab.*f.field = a.*f.field + alpha * b.*f.field;
        }
        const double ta = eval(a).total, tb = eval(b).total, tab = eval(ab).total;
        o.require(close_rel(tab, ta + alpha * tb), label + " linear in weights");
    }
}

Outcome loss_ledger(Fixtures& fx) {
    Outcome o;
    std::mt19937_64 rng(99);
    double worst_identity = 0.0;
    for (const Fitted* f : fx.all()) {
        const Scenario& sc = f->sc;
        LossParams params;
        params.classes = sc.config.classes();
        const SceneDescription gt = gt_description(sc);
        const SceneDescription off = perturbed(sc);

        // Perception.
        const auto perc = [&](const SceneDescription& pred) {
            return [&, pred](const LossWeights& w) { return perception_loss({pred, nullptr}, gt, w, params); };
        };
        const LossWeights ones;
        worst_identity = std::max(worst_identity, std::abs(perc(gt)(ones).total));
        check_composition(o, "perception", perc(off),
                          {{&LossWeights::occ, "J_occ"}, {&LossWeights::det, "J_det"},
                           {&LossWeights::map, "J_map"}, {&LossWeights::motion, "J_motion"}},
                          rng);

        // Prediction: forecasts under ground-truth motion are the reference.
        const GaussianScene& scene = f->fit.scene;
        const auto truth = forecast(scene, gt_flows(sc, scene), sc.gt_ego);
        const auto still = forecast(scene, FlowField::zeros(sc.gt_ego.size(), scene.size()),
                                    Trajectory{std::vector<Waypoint>(sc.gt_ego.size()), sc.gt_ego.dt});
        std::vector<SceneDescription> descs;
        for (const auto& s : truth) descs.push_back(describe(s, sc.config.grid, params, true));
        const auto pred = [&](const std::vector<GaussianScene>& fc) {
            return [&](const LossWeights& w) { return prediction_loss(fc, truth, descs, w, params); };
        };
        worst_identity = std::max(worst_identity, std::abs(pred(truth)(ones).total));
        check_composition(o, "prediction", pred(still),
                          {{&LossWeights::re, "J_re"}, {&LossWeights::perc, "J_perc"}}, rng);

        // Planning.
        const PredictionInputs same{truth, truth, descs};
        const PredictionInputs moved{still, truth, descs};
        Trajectory shifted = sc.gt_ego;
        for (auto& p : shifted.waypoints) p.y += 0.3;
        worst_identity = std::max(
            worst_identity, std::abs(planning_loss(sc.gt_ego, sc.gt_ego, &same, ones, params).total));
        check_composition(
            o, "planning",
            [&](const LossWeights& w) { return planning_loss(shifted, sc.gt_ego, &moved, w, params); },
            {{&LossWeights::tra, "J_tra"}, {&LossWeights::pred, "J_pred"}}, rng);

        // Overall objective.
        const auto total = total_loss(1.5, 2.0, 0.25);
        o.require(consistent(total) && total.total == 3.75 && total.terms.size() == 3, "total = sum");
        o.require(total_loss(0.0, 0.0, 0.0).total == 0.0, "total zero at identity");
    }
    o.note("3 scenarios, max |loss| at identity " + fmt("%.1e", worst_identity));
    o.require(worst_identity == 0.0, "zero at identity");
    return o;
}

} // namespace

int main() {
    Fixtures fx;
    struct Criterion {
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {"gradient correctness", gradients},
        {"splat oracle equivalence", splat_equivalence},
        {"SE(2) algebra", se2_algebra},
        {"fitting convergence", [&] { return fitting(fx); }},
        {"forecast fidelity and ordering", [&] { return forecasting(fx); }},
        {"pruning robustness", [&] { return pruning(fx); }},
        {"planner safety", [&] { return planner(fx); }},
        {"metric identities", metric_identities},
        {"determinism", determinism},
        {"loss ledger", [&] { return loss_ledger(fx); }},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail += std::string("exception: ") + e.what();
        }
        failed += !o.pass;
        std::printf("%s  %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name,
                    o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
