// Copyright Contributors to the GaussAD Project
// SPDX-License-Identifier: Apache-2.0
//
// gaussad: synth -> fit -> (splat | fit-flows | forecast | plan | prune) -> eval.

#include "gad/core.h"
#include "gad/error.h"
#include "gad/fit.h"
#include "gad/flow.h"
#include "gad/io.h"
#include "gad/losses.h"
#include "gad/metrics.h"
#include "gad/plan.h"
#include "gad/splat.h"
#include "gad/synth.h"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace gad;

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class Report {
public:
    void add(const std::string& metric, const std::string& horizon, double value) {
        text_ += metric + ',' + horizon + ',' + fmt(value) + '\n';
    }
    void save(const fs::path& path) const { write_text(path, "metric,horizon,value\n" + text_); }

private:
    std::string text_;
};

GridSpec spec_arg(const std::string& arg) {
    return grid_spec_from_json(!arg.empty() && arg.front() == '{' ? arg : read_text(arg));
}

std::vector<int> dynamic_ids(const std::string& csv) {
    std::vector<int> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stoi(item));
    }
    return out;
}

fs::path step_file(const fs::path& dir, const char* stem, std::size_t k) {
    return dir / (std::string(stem) + "_" + std::to_string(k) + ".occ");
}

// ---- subcommands -----------------------------------------------------------

struct SynthArgs {
    std::string config, out;
};

void run_synth(const SynthArgs& a) {
    const auto cfg = scenario_config_from_json(read_text(a.config));
    save_scenario(a.out, generate(cfg));
}

struct FitArgs {
    std::string target, out, loss_csv, dynamic, class_names;
    int iters = 500;
    std::size_t n = 512;
    std::uint64_t seed = 0;
    bool freeze_rotation = true;
    int workers = 1;
    LearningRates lr;
};

void run_fit(const FitArgs& a) {
    const OccupancyGrid target = load_grid(a.target);
    FitConfig cfg;
    cfg.num_gaussians = a.n;
    cfg.max_iters = a.iters;
    cfg.seed = a.seed;
    cfg.freeze_rotation = a.freeze_rotation;
    cfg.lr = a.lr;
    cfg.num_workers = a.workers;
    cfg.classes.num_classes = target.num_classes;
    cfg.classes.dynamic_class_ids = dynamic_ids(a.dynamic);
    std::stringstream names(a.class_names);
    for (std::string n; std::getline(names, n, ',');) cfg.class_names.push_back(n);
    const auto r = fit_gaussians(target, cfg);
    save_scene(a.out, r.scene);
    if (!a.loss_csv.empty()) {
        std::string csv = "iteration,loss\n";
        for (std::size_t i = 0; i < r.loss_history.size(); ++i) {
            csv += std::to_string(i) + ',' + fmt(r.loss_history[i]) + '\n';
        }
        write_text(a.loss_csv, csv);
    }
}

struct SplatArgs {
    std::string scene, spec, out;
    int workers = 1;
};

void run_splat(const SplatArgs& a) {
    const auto scene = load_scene(a.scene);
    SplatParams p;
    p.cfg.num_classes = scene.num_classes();
    p.num_workers = a.workers;
    save_grid(a.out, splat(scene, spec_arg(a.spec), p).grid);
}

struct FlowArgs {
    std::string scene, scenario, out, method = "fit";
    int iters = 150;
    double lr = 0.02;
    bool per_gaussian = false;
    int workers = 1;
};

void run_fit_flows(const FlowArgs& a) {
    const auto scene = load_scene(a.scene);
    const auto sc = load_scenario(a.scenario);
    FlowField flows;
    if (a.method == "analytic") {
        flows = gt_flows(sc, scene);
    } else if (a.method == "fit") {
        FlowFitConfig cfg;
        cfg.max_iters = a.iters;
        cfg.lr = a.lr;
        cfg.rigid_groups = !a.per_gaussian;
        cfg.classes = sc.config.classes();
        cfg.num_workers = a.workers;
        const std::vector<OccupancyGrid> targets(sc.gt_grids.begin() + 1, sc.gt_grids.end());
        flows = fit_flows(scene, targets, sc.gt_ego, cfg);
    } else {
        throw std::invalid_argument("--method must be 'fit' or 'analytic'");
    }
    save_flows(a.out, flows);
}

struct ForecastArgs {
    std::string scene, flows, plan, out, spec, baseline;
    int workers = 1;
};

void run_forecast(const ForecastArgs& a) {
    const auto scene = load_scene(a.scene);
    const auto plan = load_trajectory(a.plan);
    const GridSpec spec = spec_arg(a.spec);
    SplatParams p;
    p.cfg.num_classes = scene.num_classes();
    p.num_workers = a.workers;
    fs::create_directories(a.out);
    const OccupancyGrid current = splat(scene, spec, p).grid;
    save_grid(step_file(a.out, "forecast", 0), current);
    if (a.baseline == "copy-paste") {
        for (std::size_t k = 0; k < plan.size(); ++k) {
            save_grid(step_file(a.out, "forecast", k + 1), copy_paste_forecast(current, plan.waypoints[k]));
        }
        return;
    }
    if (!a.baseline.empty()) {
        throw std::invalid_argument("--baseline must be 'copy-paste'");
    }
    if (a.flows.empty()) {
        throw std::invalid_argument("--flows is required unless --baseline copy-paste");
    }
    const auto flows = load_flows(a.flows, scene.size());
    const auto scenes = forecast(scene, flows, plan);
    for (std::size_t k = 0; k < scenes.size(); ++k) {
        save_grid(step_file(a.out, "forecast", k + 1), splat(scenes[k], spec, p).grid);
    }
}

struct PlanArgs {
    std::string scene, flows, planner, out, costs, reference;
};

void run_plan(const PlanArgs& a) {
    const auto scene = load_scene(a.scene);
    const auto cfg = planner_config_from_json(read_text(a.planner));
    const FlowField flows = a.flows.empty() ? FlowField{} : load_flows(a.flows, scene.size());
    std::optional<Trajectory> ref;
    if (!a.reference.empty()) ref = load_trajectory(a.reference, cfg.dt);
    const auto r = plan(scene, flows, cfg, ref);
    save_trajectory(a.out, r.trajectory);
    if (!a.costs.empty()) {
        std::string csv = "candidate,collision,comfort,deviation,total\n";
        for (std::size_t i = 0; i < r.costs.size(); ++i) {
            const auto& c = r.costs[i];
            csv += std::to_string(i) + ',' + fmt(c.collision) + ',' + fmt(c.comfort) + ',' +
                   fmt(c.deviation) + ',' + fmt(c.total) + '\n';
        }
        write_text(a.costs, csv);
    }
}

struct PruneArgs {
    std::string scene, out;
    double fraction = 0.4;
};

void run_prune(const PruneArgs& a) {
    save_scene(a.out, prune(load_scene(a.scene), a.fraction).scene);
}

struct EvalArgs {
    std::string mode, pred, gt, report, horizons = "2,4,6", breakdown, dynamic = "";
};

// Perception loss between two grids: occupancy plus boxes extracted from the
// dynamic classes; map and motion have nothing to compare and are disabled.
std::string occ_breakdown(const OccupancyGrid& pred, const OccupancyGrid& gt,
                          const std::vector<int>& dynamic) {
    LossParams params;
    params.classes.num_classes = gt.num_classes;
    params.classes.dynamic_class_ids = dynamic;
    auto describe_grid = [&](const OccupancyGrid& g) {
        SceneDescription d;
        d.occupancy = g;
        d.boxes = extract_boxes(g, params.classes);
        return d;
    };
    LossWeights w;
    w.map = 0.0;
    w.motion = 0.0;
    return perception_loss({describe_grid(pred), nullptr}, describe_grid(gt), w, params).to_text();
}

std::vector<int> parse_horizons(const std::string& s) {
    std::vector<int> h = dynamic_ids(s);
    if (h.empty()) throw std::invalid_argument("--horizons is empty");
    return h;
}

void eval_plan_sample(const Trajectory& plan, const Scenario& sc, std::vector<Trajectory>& plans,
                      std::vector<Trajectory>& gts, std::vector<CollisionScenario>& scen) {
    CollisionScenario c;
    c.grids.assign(sc.anchor_grids.begin() + 1, sc.anchor_grids.end());
    c.boxes.assign(sc.gt_boxes.begin() + 1, sc.gt_boxes.end());
    plans.push_back(plan);
    gts.push_back(sc.gt_ego);
    scen.push_back(std::move(c));
}

void run_eval(const EvalArgs& a) {
    Report rep;
    if (a.mode == "occ") {
        const OccupancyGrid pred = load_grid(a.pred);
        const OccupancyGrid gt = load_grid(a.gt);
        const auto s = miou_iou(pred, gt);
        if (!a.breakdown.empty()) write_text(a.breakdown, occ_breakdown(pred, gt, dynamic_ids(a.dynamic)));
        rep.add("miou", "0", s.miou);
        rep.add("iou", "0", s.iou);
        for (std::size_t c = 0; c < s.per_class.size(); ++c) {
            if (!std::isnan(s.per_class[c])) rep.add("iou_class" + std::to_string(c), "0", s.per_class[c]);
        }
    } else if (a.mode == "forecast") {
        const auto hz = parse_horizons(a.horizons);
        const int last = *std::max_element(hz.begin(), hz.end());
        std::vector<OccupancyGrid> pred, gt;
        for (int k = 0; k <= last; ++k) {
            pred.push_back(load_grid(step_file(a.pred, "forecast", k)));
            gt.push_back(load_grid(step_file(a.gt, "grid", k)));
        }
        const auto s = forecast_eval(pred, gt, hz);
        for (std::size_t i = 0; i < hz.size(); ++i) {
            rep.add("miou", std::to_string(hz[i]), s.miou[i]);
            rep.add("iou", std::to_string(hz[i]), s.iou[i]);
        }
        rep.add("miou", "avg", s.avg_miou);
        rep.add("iou", "avg", s.avg_iou);
    } else if (a.mode == "plan") {
        const auto hz = parse_horizons(a.horizons);
        std::vector<Trajectory> plans, gts;
        std::vector<CollisionScenario> scen;
        int drivable = 0;
        if (fs::is_directory(a.pred)) {
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(a.pred)) {
                if (e.path().extension() == ".csv") files.push_back(e.path());
            }
            std::sort(files.begin(), files.end());
            if (files.empty()) throw std::invalid_argument("no *.csv plans in " + a.pred);
            for (const auto& f : files) {
                const auto sc = load_scenario(fs::path(a.gt) / f.stem());
                drivable = sc.config.layout.drivable_class;
                eval_plan_sample(load_trajectory(f, sc.config.dt), sc, plans, gts, scen);
            }
        } else {
            const auto sc = load_scenario(a.gt);
            drivable = sc.config.layout.drivable_class;
            eval_plan_sample(load_trajectory(a.pred, sc.config.dt), sc, plans, gts, scen);
        }
        std::vector<double> at(hz.size(), 0.0), avg(hz.size(), 0.0);
        for (std::size_t s = 0; s < plans.size(); ++s) {
            const auto e1 = l2_errors(plans[s], gts[s], hz, L2Mode::AtStep);
            const auto e2 = l2_errors(plans[s], gts[s], hz, L2Mode::Averaged);
            for (std::size_t i = 0; i < hz.size(); ++i) {
                at[i] += e1[i] / plans.size();
                avg[i] += e2[i] / plans.size();
            }
        }
        ObstacleFilter filter;
        filter.non_obstacle_ids = {drivable};
        const auto cr = collision_rate(plans, scen, hz, Footprint{}, filter);
        for (std::size_t i = 0; i < hz.size(); ++i) {
            const std::string h = std::to_string(hz[i]);
            rep.add("l2", h, at[i]);
            rep.add("l2_avg", h, avg[i]);
            rep.add("collision_rate", h, cr[i]);
        }
    } else {
        throw std::invalid_argument("--mode must be occ, forecast or plan");
    }
    rep.save(a.report);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaussian-centric scene fitting, forecasting and planning"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "generate a synthetic scenario bundle");
    s->add_option("--config", synth.config, "scenario config JSON")->required();
    s->add_option("--out", synth.out, "output directory")->required();

    FitArgs fit;
    auto* f = app.add_subcommand("fit", "fit Gaussians to an occupancy grid");
    f->add_option("--target", fit.target, "target grid (.occ)")->required();
    f->add_option("--out", fit.out, "output scene JSON")->required();
    f->add_option("--iters", fit.iters, "gradient steps")->capture_default_str();
    f->add_option("--n-gaussians", fit.n, "number of Gaussians")->capture_default_str();
    f->add_option("--seed", fit.seed, "initialization seed")->capture_default_str();
    f->add_option("--freeze-rotation", fit.freeze_rotation, "keep rotations at identity")
        ->capture_default_str();
    f->add_option("--lr-mean", fit.lr.mean)->capture_default_str();
    f->add_option("--lr-log-scale", fit.lr.log_scale)->capture_default_str();
    f->add_option("--lr-logits", fit.lr.logits)->capture_default_str();
    f->add_option("--lr-rotation", fit.lr.rotation)->capture_default_str();
    f->add_option("--dynamic", fit.dynamic, "comma-separated dynamic class ids");
    f->add_option("--class-names", fit.class_names, "comma-separated class names");
    f->add_option("--loss-csv", fit.loss_csv, "write iteration,loss CSV");
    f->add_option("--workers", fit.workers)->capture_default_str();

    SplatArgs sp;
    auto* p = app.add_subcommand("splat", "rasterize a scene to an occupancy grid");
    p->add_option("--scene", sp.scene)->required();
    p->add_option("--spec", sp.spec, "grid spec JSON file or inline JSON")->required();
    p->add_option("--out", sp.out)->required();
    p->add_option("--workers", sp.workers)->capture_default_str();

    FlowArgs fl;
    auto* ff = app.add_subcommand("fit-flows", "fit per-Gaussian flows to a scenario's future grids");
    ff->add_option("--scene", fl.scene)->required();
    ff->add_option("--scenario", fl.scenario, "scenario bundle directory")->required();
    ff->add_option("--out", fl.out)->required();
    ff->add_option("--method", fl.method, "fit | analytic")->capture_default_str();
    ff->add_option("--iters", fl.iters)->capture_default_str();
    ff->add_option("--lr", fl.lr)->capture_default_str();
    ff->add_flag("--per-gaussian", fl.per_gaussian, "independent displacement per Gaussian");
    ff->add_option("--workers", fl.workers)->capture_default_str();

    ForecastArgs fc;
    auto* fo = app.add_subcommand("forecast", "forecast future occupancy along a plan");
    fo->add_option("--scene", fc.scene)->required();
    fo->add_option("--flows", fc.flows);
    fo->add_option("--plan", fc.plan, "trajectory CSV")->required();
    fo->add_option("--spec", fc.spec, "grid spec JSON file or inline JSON")->required();
    fo->add_option("--out", fc.out, "output directory")->required();
    fo->add_option("--baseline", fc.baseline, "copy-paste");
    fo->add_option("--workers", fc.workers)->capture_default_str();

    PlanArgs pl;
    auto* pn = app.add_subcommand("plan", "choose a trajectory with the sampling planner");
    pn->add_option("--scene", pl.scene)->required();
    pn->add_option("--flows", pl.flows);
    pn->add_option("--planner", pl.planner, "planner config JSON")->required();
    pn->add_option("--reference", pl.reference, "reference trajectory CSV");
    pn->add_option("--out", pl.out)->required();
    pn->add_option("--costs", pl.costs, "per-candidate cost CSV");

    PruneArgs pr;
    auto* pu = app.add_subcommand("prune", "drop the least confident Gaussians");
    pu->add_option("--scene", pr.scene)->required();
    pu->add_option("--fraction", pr.fraction)->capture_default_str();
    pu->add_option("--out", pr.out)->required();

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "compute metrics and write a report CSV");
    e->add_option("--mode", ev.mode, "occ | forecast | plan")->required();
    e->add_option("--pred", ev.pred)->required();
    e->add_option("--gt", ev.gt)->required();
    e->add_option("--horizons", ev.horizons)->capture_default_str();
    e->add_option("--report", ev.report)->required();
    e->add_option("--breakdown", ev.breakdown, "occ mode: write the perception loss breakdown");
    e->add_option("--dynamic", ev.dynamic, "occ mode: comma-separated dynamic class ids");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*s) run_synth(synth);
        if (*f) run_fit(fit);
        if (*p) run_splat(sp);
        if (*ff) run_fit_flows(fl);
        if (*fo) run_forecast(fc);
        if (*pn) run_plan(pl);
        if (*pu) run_prune(pr);
        if (*e) run_eval(ev);
    } catch (const std::exception& ex) {
        std::string msg = ex.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        std::cerr << "gaussad: error: " << msg << '\n';
        return 1;
    }
    return 0;
}
