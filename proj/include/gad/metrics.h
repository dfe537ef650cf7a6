// Copyright Contributors to the GaussAD Project
// SPDX-License-Identifier: Apache-2.0
//
// Evaluation metrics: semantic occupancy IoU, planning displacement error,
// collision rate and per-horizon forecasting scores.

#pragma once

#include "gad/description.h"
#include "gad/flow.h"
#include "gad/grid.h"

#include <span>
#include <vector>

namespace gad {

struct OccupancyScores {
    double miou = 1.0;
    double iou = 1.0;              // occupied vs EMPTY
    std::vector<double> per_class;  // NaN for classes absent from both grids
};

/// Per-class IoU over semantic classes. mIoU averages the classes present in
/// gt; with no gt classes it is 1 if pred is also empty and 0 otherwise.
/// Throws std::invalid_argument on spec or class-count mismatch.
OccupancyScores miou_iou(const OccupancyGrid& pred, const OccupancyGrid& gt);

enum class L2Mode { AtStep, Averaged };

/// Horizons are 1-based step indices. AtStep: planar error at that step;
/// Averaged: mean of the at-step errors over steps 1..h.
std::vector<double> l2_errors(const Trajectory& plan, const Trajectory& gt,
                              std::span<const int> horizons, L2Mode mode);

/// Which occupied voxels count as obstacles for footprint tests.
struct ObstacleFilter {
    std::vector<int> non_obstacle_ids;  // e.g. drivable surface
    double z_min = 0.2;
    double z_max = 2.0;

    bool is_obstacle(std::uint8_t label) const;
};

/// Obstacle voxels whose centers lie inside the rectangle and the z slab.
std::size_t obstacle_voxels_in(const OccupancyGrid& grid, const OrientedRect& footprint,
                               const ObstacleFilter& filter);

struct Footprint {
    double length = 4.6;
    double width = 1.9;

    OrientedRect at(const Waypoint& w) const { return {w, length, width}; }
};

/// Ground truth for one evaluation sample, expressed in the ego frame at the
/// start of the plan. Either list may be empty; otherwise one entry per step
/// (index k = step k + 1, like trajectory waypoints).
struct CollisionScenario {
    std::vector<OccupancyGrid> grids;
    std::vector<std::vector<Box>> boxes;
};

/// First step (1-based) at which the footprint at the planned pose overlaps a
/// gt box or an obstacle voxel; 0 if never.
int first_collision_step(const Trajectory& plan, const CollisionScenario& scenario,
                         const Footprint& footprint, const ObstacleFilter& filter);

/// Percentage of samples colliding at any step <= h, per horizon.
std::vector<double> collision_rate(std::span<const Trajectory> plans,
                                   std::span<const CollisionScenario> scenarios,
                                   std::span<const int> horizons, const Footprint& footprint = {},
                                   const ObstacleFilter& filter = {});

struct ForecastScores {
    std::vector<int> horizons;
    std::vector<double> miou;
    std::vector<double> iou;
    double avg_miou = 0.0;  // over horizons > 0
    double avg_iou = 0.0;
};

/// Grids are indexed by step (index 0 = current frame); horizons select
/// entries of both lists.
ForecastScores forecast_eval(std::span<const OccupancyGrid> pred,
                             std::span<const OccupancyGrid> gt, std::span<const int> horizons);

} // namespace gad
