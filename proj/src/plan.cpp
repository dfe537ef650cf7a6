// Copyright Contributors to the GaussAD Project
// SPDX-License-Identifier: Apache-2.0

#include "gad/plan.h"

#include "gad/parallel.h"
#include "gad/splat.h"

#include <cmath>
#include <stdexcept>
#include <string>

namespace gad {

void PlannerConfig::validate() const {
    if (steps < 1) throw std::invalid_argument("PlannerConfig.steps must be >= 1");
    if (!(dt > 0.0)) throw std::invalid_argument("PlannerConfig.dt must be positive");
    if (speeds.empty() || curvatures.empty()) {
        throw std::invalid_argument("PlannerConfig.speeds/curvatures must be non-empty");
    }
    if (!(footprint.length > 0.0) || !(footprint.width > 0.0)) {
        throw std::invalid_argument("PlannerConfig.footprint must be positive");
    }
    if (!(collision_weight >= 0.0) || !(comfort_weight >= 0.0) || !(reference_weight >= 0.0)) {
        throw std::invalid_argument("PlannerConfig weights must be >= 0");
    }
}

Trajectory unicycle_rollout(double speed, double curvature, std::size_t steps, double dt) {
    Trajectory t;
    t.dt = dt;
    for (std::size_t k = 1; k <= steps; ++k) {
        const double s = speed * dt * static_cast<double>(k);  // arclength
        if (curvature == 0.0) {
            t.waypoints.push_back({s, 0.0, 0.0});
        } else {
            const double th = curvature * s;
            t.waypoints.push_back(
                {std::sin(th) / curvature, (1.0 - std::cos(th)) / curvature, wrap_angle(th)});
        }
    }
    return t;
}

std::vector<Trajectory> sample_candidates(const PlannerConfig& cfg,
                                          const std::optional<Trajectory>& reference) {
    cfg.validate();
    std::vector<Trajectory> out;
    if (reference) {
        out.push_back(*reference);
    }
    for (double v : cfg.speeds) {
        for (double c : cfg.curvatures) {
            out.push_back(unicycle_rollout(v, c, cfg.steps, cfg.dt));
        }
    }
    if (cfg.num_candidates > 0) {
        if (cfg.num_candidates > out.size()) {
            throw std::invalid_argument("PlannerConfig.num_candidates exceeds the " +
                                        std::to_string(out.size()) + " available candidates");
        }
        out.resize(cfg.num_candidates);
    }
    return out;
}

double comfort_cost(const Trajectory& plan) {
    double cost = 0.0;
    double prev_speed = 0.0;
    Waypoint prev{};
    for (std::size_t k = 0; k < plan.size(); ++k) {
        const Waypoint& w = plan.waypoints[k];
        const double chord = std::hypot(w.x - prev.x, w.y - prev.y);
        const double speed = chord / plan.dt;
        if (k > 0) {
            cost += std::abs(speed - prev_speed);
        }
        if (chord > 0.0) {
            cost += std::abs(2.0 * std::sin(0.5 * wrap_angle(w.yaw - prev.yaw)) / chord);
        }
        prev_speed = speed;
        prev = w;
    }
    return cost;
}

CandidateCost score(const Trajectory& plan, std::span<const OccupancyGrid> grids,
                    const PlannerConfig& cfg, const std::optional<Trajectory>& reference) {
    if (grids.size() != plan.size()) {
        throw std::invalid_argument("score: " + std::to_string(grids.size()) + " grids for a " +
                                    std::to_string(plan.size()) + "-step plan");
    }
    CandidateCost c;
    const OrientedRect ego = cfg.footprint.at(Waypoint{});
    for (const auto& g : grids) {
        c.collision += static_cast<double>(obstacle_voxels_in(g, ego, cfg.obstacles));
    }
    c.comfort = comfort_cost(plan);
    if (reference && reference->size() > 0) {
        if (reference->size() != plan.size()) {
            throw std::invalid_argument("score: reference length differs from plan");
        }
        for (std::size_t k = 0; k < plan.size(); ++k) {
            c.deviation += std::hypot(plan.waypoints[k].x - reference->waypoints[k].x,
                                      plan.waypoints[k].y - reference->waypoints[k].y);
        }
        c.deviation /= static_cast<double>(plan.size());
    }
    c.total = cfg.collision_weight * c.collision + cfg.comfort_weight * c.comfort +
              cfg.reference_weight * c.deviation;
    return c;
}

PlanResult plan(const GaussianScene& scene, const FlowField& flows, const PlannerConfig& cfg,
                const std::optional<Trajectory>& reference) {
    cfg.validate();
    cfg.grid.validate();
    PlanResult out;
    out.candidates = sample_candidates(cfg, reference);
    const FlowField used =
        flows.num_steps() == 0 ? FlowField::zeros(cfg.steps, scene.size()) : flows;
    for (const auto& c : out.candidates) {
        if (c.size() != used.num_steps()) {
            throw std::invalid_argument("plan: candidate length differs from flow steps");
        }
    }
    out.costs.resize(out.candidates.size());
    SplatParams sp;
    sp.cfg = cfg.classes;
    // Candidates are scored in parallel; each splat runs single-threaded.
    parallel_for(out.candidates.size(), cfg.num_workers,
                 [&](std::size_t begin, std::size_t end, int) {
                     for (std::size_t i = begin; i < end; ++i) {
                         const auto scenes = forecast(scene, used, out.candidates[i]);
                         std::vector<OccupancyGrid> grids;
                         for (const auto& s : scenes) {
                             grids.push_back(splat(s, cfg.grid, sp).grid);
                         }
                         out.costs[i] = score(out.candidates[i], grids, cfg, reference);
                     }
                 });
    for (std::size_t i = 1; i < out.costs.size(); ++i) {
        if (out.costs[i].total < out.costs[out.chosen].total) {
            out.chosen = i;
        }
    }
    out.trajectory = out.candidates[out.chosen];
    return out;
}

} // namespace gad
