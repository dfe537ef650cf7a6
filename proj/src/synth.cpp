// Copyright Contributors to the GaussAD Project
// SPDX-License-Identifier: Apache-2.0

#include "gad/synth.h"

#include "gad/plan.h"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace gad {

namespace {

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

bool in_layout(const LayoutConfig& l, const Vec3& p, int& label) {
    if (l.corridor_width > 0.0) {
        const double ay = std::abs(p.y());
        const double inner = 0.5 * l.corridor_width;
        if (ay >= inner && ay <= inner + l.wall_thickness && p.z() >= 0.0 &&
            p.z() <= l.wall_height) {
            label = l.wall_class;
            return true;
        }
    }
    if (l.ground && p.z() < 0.0 && p.z() >= -l.ground_thickness) {
        label = l.drivable_class;
        return true;
    }
    return false;
}

} // namespace

Pose2 AgentSpec::pose_at(double t) const {
    if (yaw_rate == 0.0) {
        return {pose.x + speed * t * std::cos(pose.yaw), pose.y + speed * t * std::sin(pose.yaw),
                pose.yaw};
    }
    const double yaw = pose.yaw + yaw_rate * t;
    const double r = speed / yaw_rate;
    return {pose.x + r * (std::sin(yaw) - std::sin(pose.yaw)),
            pose.y - r * (std::cos(yaw) - std::cos(pose.yaw)), wrap_angle(yaw)};
}

Box AgentSpec::box_at(double t) const {
    const Pose2 p = pose_at(t);
    Box b;
    b.center = Vec3(p.x, p.y, 0.5 * size.z());
    b.size = size;
    b.yaw = p.yaw;
    b.class_id = class_id;
    return b;
}

ClassConfig ScenarioConfig::classes() const {
    ClassConfig c;
    c.num_classes = static_cast<int>(class_names.size());
    c.dynamic_class_ids = dynamic_class_ids;
    return c;
}

void ScenarioConfig::validate() const {
    grid.validate();
    if (steps < 1) throw std::invalid_argument("ScenarioConfig.steps must be >= 1");
    if (!(dt > 0.0)) throw std::invalid_argument("ScenarioConfig.dt must be positive");
    if (random_agents < 0) throw std::invalid_argument("ScenarioConfig.random_agents must be >= 0");
    if (class_names.empty() || class_names.size() > 255) {
        throw std::invalid_argument("ScenarioConfig.class_names must hold 1..255 names");
    }
    const int c = static_cast<int>(class_names.size());
    const auto check_class = [c](int id, const std::string& field) {
        if (id < 0 || id >= c) throw std::invalid_argument("ScenarioConfig." + field + " out of range");
    };
    if (layout.ground) check_class(layout.drivable_class, "layout.drivable_class");
    if (layout.corridor_width > 0.0) check_class(layout.wall_class, "layout.wall_class");
    for (int id : dynamic_class_ids) check_class(id, "dynamic_class_ids");
    if (random_agents > 0 && dynamic_class_ids.empty()) {
        throw std::invalid_argument("ScenarioConfig.random_agents needs dynamic_class_ids");
    }
    const Vec3 hi = grid.origin + grid.voxel_size * Vec3(grid.dims[0], grid.dims[1], grid.dims[2]);
    for (std::size_t i = 0; i < agents.size(); ++i) {
        const auto& a = agents[i];
        const std::string f = "agents[" + std::to_string(i) + "]";
        check_class(a.class_id, f + ".class_id");
        if (!(a.size.minCoeff() > 0.0)) throw std::invalid_argument(f + ".size must be positive");
        if (a.pose.x < grid.origin.x() || a.pose.x > hi.x() || a.pose.y < grid.origin.y() ||
            a.pose.y > hi.y()) {
            throw std::invalid_argument(f + ".pose outside the grid at t = 0");
        }
    }
}

Pose2 Scenario::ego_pose(std::size_t k) const {
    return k == 0 ? Pose2{} : gt_ego.waypoints.at(k - 1);
}

std::vector<Box> Scenario::boxes_in_ego(std::size_t k) const {
    const Pose2 ego = ego_pose(k);
    std::vector<Box> out = gt_boxes.at(k);
    for (Box& b : out) {
        const Vec2 c = to_local(ego, b.center.head<2>());
        b.center.x() = c.x();
        b.center.y() = c.y();
        b.yaw = wrap_angle(b.yaw - ego.yaw);
    }
    return out;
}

OccupancyGrid rasterize_boxes(std::span<const Box> boxes, const LayoutConfig* layout,
                              const GridSpec& spec, int num_classes, const Pose2& frame) {
    OccupancyGrid g(spec, num_classes);
    for (std::size_t v = 0; v < spec.num_voxels(); ++v) {
        const Vec3 c = spec.center_unchecked(spec.unflatten(v));
        const Vec2 xy = to_parent(frame, c.head<2>());
        const Vec3 p(xy.x(), xy.y(), c.z());
        int label = kEmpty;
        if (layout) {
            in_layout(*layout, p, label);
        }
        for (const Box& b : boxes) {
            if (b.contains(p)) {
                label = b.class_id;
            }
        }
        g.labels[v] = static_cast<std::uint8_t>(label);
    }
    return g;
}

Scenario generate(const ScenarioConfig& cfg) {
    cfg.validate();
    Scenario s;
    s.config = cfg;
    std::mt19937_64 rng(cfg.seed);
    const double ex = cfg.grid.dims[0] * cfg.grid.voxel_size;
    const double ey = cfg.grid.dims[1] * cfg.grid.voxel_size;
    for (int i = 0; i < cfg.random_agents; ++i) {
        AgentSpec a;
        a.class_id = cfg.dynamic_class_ids[static_cast<std::size_t>(
            uniform01(rng) * static_cast<double>(cfg.dynamic_class_ids.size()))];
        a.pose.x = cfg.grid.origin.x() + uniform01(rng) * ex;
        double ylo = cfg.grid.origin.y(), yhi = ylo + ey;
        if (cfg.layout.corridor_width > 0.0) {
            const double half = std::max(0.0, 0.5 * (cfg.layout.corridor_width - a.size.y()));
            ylo = std::max(ylo, -half);
            yhi = std::min(yhi, half);
        }
        a.pose.y = ylo + uniform01(rng) * (yhi - ylo);
        a.pose.yaw = uniform01(rng) < 0.5 ? 0.0 : std::numbers::pi;
        a.speed = 3.0 * uniform01(rng);
        s.config.agents.push_back(a);
    }
    s.config.random_agents = 0;  // the extras are now explicit
    s.gt_ego = unicycle_rollout(cfg.ego_speed, cfg.ego_curvature, cfg.steps, cfg.dt);
    const int c = static_cast<int>(cfg.class_names.size());
    for (int k = 0; k <= cfg.steps; ++k) {
        std::vector<Box> boxes;
        for (const auto& a : s.config.agents) {
            boxes.push_back(a.box_at(k * cfg.dt));
        }
        s.gt_grids.push_back(rasterize_boxes(boxes, &cfg.layout, cfg.grid, c, s.ego_pose(k)));
        s.anchor_grids.push_back(rasterize_boxes(boxes, &cfg.layout, cfg.grid, c));
        s.gt_boxes.push_back(std::move(boxes));
    }
    if (cfg.layout.corridor_width > 0.0) {
        const double x0 = cfg.grid.origin.x();
        const double x1 = x0 + ex + cfg.ego_speed * cfg.dt * cfg.steps;
        const double h = 0.5 * cfg.layout.corridor_width;
        s.gt_map.push_back({MapCategory::Boundary, {{x0, h}, {x1, h}}});
        s.gt_map.push_back({MapCategory::Boundary, {{x0, -h}, {x1, -h}}});
        s.gt_map.push_back({MapCategory::Divider, {{x0, 0.0}, {x1, 0.0}}});
    }
    return s;
}

FlowField gt_flows(const Scenario& scenario, const GaussianScene& scene, double margin,
                   bool match_class) {
    const auto& cfg = scenario.config;
    FlowField f = FlowField::zeros(static_cast<std::size_t>(cfg.steps), scene.size());
    for (std::size_t i = 0; i < scene.size(); ++i) {
        const Vec3& mu = scene.gaussians[i].mean();
        const int cls = argmax_class(scene.gaussians[i]);
        const AgentSpec* owner = nullptr;
        for (const auto& a : cfg.agents) {  // later agents win, like rasterization
            Box grown = a.box_at(0.0);
            grown.size += Vec3::Constant(2.0 * margin);
            if (grown.contains(mu) && (!match_class || cls == a.class_id)) {
                owner = &a;
            }
        }
        if (!owner) {
            continue;
        }
        const Pose2 p0 = owner->pose_at(0.0);
        const Vec2 local = to_local(p0, mu.head<2>());
        for (int k = 1; k <= cfg.steps; ++k) {
            const Vec2 moved = to_parent(owner->pose_at(k * cfg.dt), local);
            f.steps[k - 1][i] = Vec3(moved.x() - mu.x(), moved.y() - mu.y(), 0.0);
        }
    }
    return f;
}

} // namespace gad
