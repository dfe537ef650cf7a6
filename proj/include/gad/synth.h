// Copyright Contributors to the GaussAD Project
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic synthetic driving scenarios with full ground truth. The world
// frame is the ego frame at the first step.

#pragma once

#include "gad/core.h"
#include "gad/description.h"
#include "gad/flow.h"
#include "gad/grid.h"

#include <cstdint>
#include <string>
#include <vector>

namespace gad {

/// Straight corridor along the world x axis, centred on y = 0.
struct LayoutConfig {
    bool ground = true;
    double ground_thickness = 0.5;  // slab below z = 0
    double corridor_width = 0.0;    // 0: no walls
    double wall_thickness = 0.5;
    double wall_height = 2.0;
    int drivable_class = 0;
    int wall_class = 1;
};

/// Agent moving with constant speed along its heading and constant yaw rate.
struct AgentSpec {
    int class_id = 2;
    Pose2 pose;                        // at t = 0; box bottom rests on z = 0
    Vec3 size = Vec3(4.0, 1.8, 1.5);  // length, width, height
    double speed = 0.0;
    double yaw_rate = 0.0;

    /// Pose after t seconds, integrated in closed form.
    Pose2 pose_at(double t) const;
    Box box_at(double t) const;
};

struct ScenarioConfig {
    std::uint64_t seed = 0;
    GridSpec grid;
    int steps = 6;  // F
    double dt = 0.5;
    LayoutConfig layout;
    std::vector<AgentSpec> agents;
    /// Extra agents drawn from the seed inside the grid footprint.
    int random_agents = 0;
    double ego_speed = 5.0;
    double ego_curvature = 0.0;
    std::vector<std::string> class_names{"road", "wall", "car"};
    std::vector<int> dynamic_class_ids{2};

    ClassConfig classes() const;
    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

struct Scenario {
    ScenarioConfig config;       // seeded extras made explicit, random_agents = 0
    Trajectory gt_ego;           // F waypoints in the world frame
    std::vector<OccupancyGrid> gt_grids;      // F + 1, ego frame of each step
    std::vector<OccupancyGrid> anchor_grids;  // F + 1, world frame
    std::vector<std::vector<Box>> gt_boxes;   // F + 1, world frame
    std::vector<Polyline> gt_map;             // world frame

    /// Ego pose at step k (identity at k = 0).
    Pose2 ego_pose(std::size_t k) const;
    /// Boxes of step k expressed in the ego frame of that step.
    std::vector<Box> boxes_in_ego(std::size_t k) const;
};

Scenario generate(const ScenarioConfig& cfg);

/// Labels voxels whose centers lie in the layout, then in each box in order
/// (later boxes win). `frame` is the pose of the grid frame in the world.
OccupancyGrid rasterize_boxes(std::span<const Box> boxes, const LayoutConfig* layout,
                              const GridSpec& spec, int num_classes, const Pose2& frame = {});

/// Rigid-motion flows for a scene observed at step 0 (world frame): each
/// Gaussian whose mean lies in an agent box grown by `margin` (and, when
/// match_class is set, whose argmax class is the agent's) follows that agent;
/// all others stay. Steps 1..F at indices 0..F-1.
FlowField gt_flows(const Scenario& scenario, const GaussianScene& scene, double margin = 0.25,
                   bool match_class = true);

} // namespace gad
