// Copyright Contributors to the GaussAD Project
// SPDX-License-Identifier: Apache-2.0

#include "gad/flow.h"

#include <cmath>
#include <stdexcept>
#include <string>

namespace gad {

FlowField FlowField::zeros(std::size_t num_steps, std::size_t num_gaussians) {
    FlowField f;
    f.steps.assign(num_steps, std::vector<Vec3>(num_gaussians, Vec3::Zero()));
    return f;
}

void FlowField::validate() const {
    const std::size_t n = num_gaussians();
    for (std::size_t k = 0; k < steps.size(); ++k) {
        if (steps[k].size() != n) {
            throw std::invalid_argument("FlowField: step " + std::to_string(k) + " has " +
                                        std::to_string(steps[k].size()) + " rows, expected " +
                                        std::to_string(n));
        }
        for (const Vec3& d : steps[k]) {
            if (!d.allFinite()) {
                throw std::invalid_argument("FlowField: non-finite displacement at step " +
                                            std::to_string(k));
            }
        }
    }
}

namespace {

void check_lengths(const GaussianScene& scene, std::span<const Vec3> step) {
    if (step.size() != scene.size()) {
        throw std::invalid_argument("apply_flow: " + std::to_string(step.size()) +
                                    " displacements for " + std::to_string(scene.size()) +
                                    " gaussians");
    }
}

} // namespace

GaussianScene apply_flow(const GaussianScene& scene, std::span<const Vec3> step) {
    check_lengths(scene, step);
    GaussianScene out = scene;
    for (std::size_t i = 0; i < scene.size(); ++i) {
        out.gaussians[i] = scene.gaussians[i].with_mean(scene.gaussians[i].mean() + step[i]);
    }
    return out;
}

GaussianScene apply_flow(const GaussianScene& scene, std::span<const Vec3> step,
                         const ClassConfig& cfg) {
    check_lengths(scene, step);
    GaussianScene out = scene;
    for (std::size_t i = 0; i < scene.size(); ++i) {
        if (cfg.is_dynamic(argmax_class(scene.gaussians[i]))) {
            out.gaussians[i] = scene.gaussians[i].with_mean(scene.gaussians[i].mean() + step[i]);
        }
    }
    return out;
}

Vec3 rotate_into(const Waypoint& w, const Vec3& displacement) {
    const Vec2 xy = rot2(-w.yaw) * displacement.head<2>();
    return {xy.x(), xy.y(), displacement.z()};
}

GaussianScene ego_transform(const GaussianScene& scene, const Waypoint& w) {
    if (w.x == 0.0 && w.y == 0.0 && w.yaw == 0.0) {
        GaussianScene out = scene;
        out.frame_pose = compose(scene.frame_pose, w);
        return out;
    }
    const Quat qz(Eigen::AngleAxisd(-w.yaw, Vec3::UnitZ()));
    GaussianScene out;
    out.class_names = scene.class_names;
    out.timestamp_index = scene.timestamp_index;
    out.frame_pose = compose(scene.frame_pose, w);
    out.gaussians.reserve(scene.size());
    const Vec3 t(w.x, w.y, 0.0);
    for (const auto& g : scene.gaussians) {
        const Vec3 mu = rotate_into(w, g.mean() - t);
        out.gaussians.emplace_back(mu, g.log_scale(), qz * g.rotation(), g.logits());
    }
    return out;
}

std::vector<GaussianScene> forecast(const GaussianScene& scene, const FlowField& flows,
                                    const Trajectory& plan) {
    if (flows.num_steps() != plan.size()) {
        throw std::invalid_argument("forecast: " + std::to_string(flows.num_steps()) +
                                    " flow steps for a " + std::to_string(plan.size()) +
                                    "-step plan");
    }
    std::vector<GaussianScene> out;
    out.reserve(plan.size());
    for (std::size_t k = 0; k < plan.size(); ++k) {
        GaussianScene s = ego_transform(apply_flow(scene, flows.steps[k]), plan.waypoints[k]);
        s.timestamp_index = scene.timestamp_index + static_cast<int>(k) + 1;
        out.push_back(std::move(s));
    }
    return out;
}

OccupancyGrid copy_paste_forecast(const OccupancyGrid& current, const Waypoint& w) {
    OccupancyGrid out(current.spec, current.num_classes);
    const GridSpec& spec = current.spec;
    const bool identity = w.x == 0.0 && w.y == 0.0 && w.yaw == 0.0;
    if (identity) {
        out.labels = current.labels;
        return out;
    }
    const Mat2 r = rot2(w.yaw);
    const Vec2 t = w.translation();
    for (std::size_t v = 0; v < spec.num_voxels(); ++v) {
        const Vec3 p = spec.center_unchecked(spec.unflatten(v));
        const Vec2 src = r * p.head<2>() + t;
        const Index3 ijk = spec.voxel_of({src.x(), src.y(), p.z()});
        if (spec.contains(ijk)) {
            out.labels[v] = current.at(ijk);
        }
    }
    return out;
}

} // namespace gad
