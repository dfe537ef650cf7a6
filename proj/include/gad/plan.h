// Copyright Contributors to the GaussAD Project
// SPDX-License-Identifier: Apache-2.0
//
// Sampling planner: unicycle candidates scored against forecast occupancy.

#pragma once

#include "gad/core.h"
#include "gad/flow.h"
#include "gad/grid.h"
#include "gad/metrics.h"

#include <optional>
#include <vector>

namespace gad {

struct PlannerConfig {
    /// Number of candidates returned by sample_candidates; 0 takes the
    /// reference (if any) plus the whole speed x curvature lattice.
    std::size_t num_candidates = 0;
    std::size_t steps = 6;
    double dt = 0.5;
    std::vector<double> speeds{5.0};
    std::vector<double> curvatures{-0.08, -0.05, -0.03, -0.015, 0.0, 0.015, 0.03, 0.05, 0.08};
    Footprint footprint;
    double collision_weight = 10.0;
    double comfort_weight = 1.0;
    double reference_weight = 1.0;
    ObstacleFilter obstacles;
    /// Ego-frame grid the forecasts are splatted onto.
    GridSpec grid;
    ClassConfig classes;
    int num_workers = 1;

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

/// Constant speed v and curvature c from the origin pose:
/// x = sin(v c t) / c, y = (1 - cos(v c t)) / c, yaw = v c t.
Trajectory unicycle_rollout(double speed, double curvature, std::size_t steps, double dt);

/// Reference first (when given), then speeds x curvatures in order,
/// truncated to num_candidates. Throws when fewer candidates exist than
/// requested.
std::vector<Trajectory> sample_candidates(const PlannerConfig& cfg,
                                          const std::optional<Trajectory>& reference = {});

struct CandidateCost {
    double collision = 0.0;  // obstacle voxels under the footprint, summed over steps
    double comfort = 0.0;    // sum |d speed| + sum |curvature|
    double deviation = 0.0;  // mean planar distance to the reference
    double total = 0.0;      // weighted sum
};

/// Per-step speeds and curvatures of a trajectory starting at the origin.
/// Curvature uses the chord, so circular arcs give their exact curvature.
double comfort_cost(const Trajectory& plan);

/// Grids are ego-frame forecasts aligned with the plan steps; the footprint
/// sits at the origin of each. Throws std::invalid_argument on length
/// mismatch.
CandidateCost score(const Trajectory& plan, std::span<const OccupancyGrid> grids,
                    const PlannerConfig& cfg, const std::optional<Trajectory>& reference = {});

struct PlanResult {
    Trajectory trajectory;
    std::size_t chosen = 0;
    std::vector<Trajectory> candidates;
    std::vector<CandidateCost> costs;
};

/// Forecasts the scene under each candidate with the shared flows (zero
/// flows when `flows` has no steps), splats onto cfg.grid, scores, and
/// returns the cheapest candidate; ties go to the lower index.
PlanResult plan(const GaussianScene& scene, const FlowField& flows, const PlannerConfig& cfg,
                const std::optional<Trajectory>& reference = {});

} // namespace gad
