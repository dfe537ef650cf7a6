// Copyright Contributors to the GaussAD Project
// SPDX-License-Identifier: Apache-2.0
//
// Gaussian flow and ego-frame simulation. A flow field holds one cumulative
// displacement per Gaussian per future step, expressed in the frame of the
// current scene. A future scene as seen from a planned pose is obtained by
// displacing the means and then re-expressing everything in the frame of
// that pose.

#pragma once

#include "gad/core.h"
#include "gad/grid.h"

#include <span>
#include <vector>

namespace gad {

/// Planar ego pose relative to the frame at time T.
using Waypoint = Pose2;

struct Trajectory {
    std::vector<Waypoint> waypoints;  // step k+1 at index k, cumulative from T
    double dt = 0.5;

    std::size_t size() const { return waypoints.size(); }
    bool operator==(const Trajectory&) const = default;
};

struct FlowField {
    std::vector<std::vector<Vec3>> steps;  // [F][N]

    static FlowField zeros(std::size_t num_steps, std::size_t num_gaussians);

    std::size_t num_steps() const { return steps.size(); }
    std::size_t num_gaussians() const { return steps.empty() ? 0 : steps.front().size(); }
    /// Throws std::invalid_argument on ragged rows or non-finite entries.
    void validate() const;

    bool operator==(const FlowField&) const = default;
};

/// Translates every mean by its displacement. Throws std::invalid_argument
/// on length mismatch.
GaussianScene apply_flow(const GaussianScene& scene, std::span<const Vec3> step);

/// Same, but only Gaussians whose argmax class is in cfg.dynamic_class_ids
/// move.
GaussianScene apply_flow(const GaussianScene& scene, std::span<const Vec3> step,
                         const ClassConfig& cfg);

/// Re-expresses a scene in the frame of pose w: mu -> R(-yaw)(mu - t),
/// q -> q_z(-yaw) * q, frame_pose -> compose(frame_pose, w).
GaussianScene ego_transform(const GaussianScene& scene, const Waypoint& w);

/// Rotates a displacement into the frame of pose w (translation ignored).
Vec3 rotate_into(const Waypoint& w, const Vec3& displacement);

/// Step k: ego_transform(apply_flow(scene, flows.steps[k]), plan.waypoints[k]).
std::vector<GaussianScene> forecast(const GaussianScene& scene, const FlowField& flows,
                                    const Trajectory& plan);

/// Static-world baseline: nearest-neighbour resampling of the current grid
/// into the frame of pose w. Sources outside the grid become EMPTY.
OccupancyGrid copy_paste_forecast(const OccupancyGrid& current, const Waypoint& w);

} // namespace gad
