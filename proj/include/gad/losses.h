// Copyright Contributors to the GaussAD Project
// SPDX-License-Identifier: Apache-2.0
//
// Training objective: representation and description discrepancies and
// their weighted compositions into perception, prediction, planning and
// total losses. Every composite reports a breakdown; a term whose weight is
// zero is left out entirely and its ground truth is not required.

#pragma once

#include "gad/assignment.h"
#include "gad/core.h"
#include "gad/description.h"
#include "gad/flow.h"
#include "gad/grid.h"

#include <span>
#include <string>
#include <vector>

namespace gad {

struct LossWeights {
    double occ = 1.0;
    double det = 1.0;
    double map = 1.0;
    double motion = 1.0;
    double re = 1.0;
    double perc = 1.0;
    double tra = 1.0;
    double pred = 1.0;

    /// Throws std::invalid_argument naming a negative or non-finite weight.
    void validate() const;
};

struct LossParams {
    double semantic_weight = 1.0;  // lambda_sem of the representation term
    double far_cost = 10.0;        // per Gaussian when the other scene is empty
    double unmatched_box_cost = 5.0;
    double unmatched_map_cost = 5.0;  // per category present on one side only
    double unmatched_motion_cost = 5.0;
    double map_spacing = 0.5;  // resampling step for map polylines, meters
    /// Occupancy term against a predicted scene: false compares the splatted
    /// labels (one-hot with probability floor), true uses the differentiable
    /// splat cross-entropy. Label-only predictions always use the former.
    bool soft_occupancy = false;
    ClassConfig classes;
    int num_workers = 1;
};

struct LossTerm {
    std::string name;
    double weight = 0.0;
    double value = 0.0;

    double contribution() const { return weight * value; }
};

struct LossBreakdown {
    std::vector<LossTerm> terms;  // enabled terms only, in a fixed order
    double total = 0.0;

    bool has(const std::string& name) const;
    /// Raw (unweighted) value; throws std::out_of_range when absent.
    double value(const std::string& name) const;
    /// "name=value" lines followed by "total=...".
    std::string to_text() const;
};

/// Symmetric semantic Chamfer over Gaussians:
/// 1/2 (sum_a min_b c(a,b) + sum_b min_a c(a,b)),
/// c = |mu_a - mu_b|^2 + lambda_sem |p_a - p_b|^2.
double representation_discrepancy(const GaussianScene& a, const GaussianScene& b,
                                  const LossParams& params = {});

/// Hungarian matching on center distance; matched pairs cost L1 on center
/// and size plus |wrapped yaw difference|; unmatched boxes cost a penalty.
double detection_discrepancy(std::span<const Box> pred, std::span<const Box> gt,
                             const LossParams& params = {});
/// Matching used by detection_discrepancy (pred index -> gt index or
/// kUnassigned).
std::vector<long> match_boxes(std::span<const Box> pred, std::span<const Box> gt);

/// Points at fixed arclength spacing including both endpoints (the last
/// interval may be shorter).
std::vector<Vec2> resample_polyline(std::span<const Vec2> points, double spacing);
double point_to_segment(const Vec2& p, const Vec2& a, const Vec2& b);

/// Per-category symmetric Chamfer (mean point-to-polyline distance in each
/// direction, averaged), summed over categories.
double map_discrepancy(std::span<const Polyline> pred, std::span<const Polyline> gt,
                       const LossParams& params = {});

/// Average displacement error over matched agents, normalized by the larger
/// agent count; unmatched agents cost a penalty. With an empty matching the
/// assignment minimizing total ADE is used.
double motion_discrepancy(std::span<const std::vector<Vec2>> pred,
                          std::span<const std::vector<Vec2>> gt,
                          const std::vector<long>& matching = {}, const LossParams& params = {});

/// Mean over voxels of the cross-entropy of one-hot predicted labels (with
/// the probability floor) against the target labels.
double label_discrepancy(const OccupancyGrid& pred, const OccupancyGrid& gt);

/// Axis-aligned boxes around 6-connected components of dynamic-class voxels.
std::vector<Box> extract_boxes(const OccupancyGrid& grid, const ClassConfig& classes);

/// What a scene "describes": its splatted occupancy on `spec` and, when
/// requested, boxes extracted from it.
SceneDescription describe(const GaussianScene& scene, const GridSpec& spec,
                          const LossParams& params, bool with_boxes);

/// Prediction side of the perception loss: a description and, optionally,
/// the scene it came from (used for occupancy when the description has none).
struct PerceptionInput {
    SceneDescription desc;
    const GaussianScene* scene = nullptr;
};

/// occ J_occ + det J_det + map J_map + motion J_motion.
LossBreakdown perception_loss(const PerceptionInput& pred, const SceneDescription& gt,
                              const LossWeights& w, const LossParams& params = {});

/// Sum over steps of re J_re(forecast, gt scene) + perc J_perc(description
/// of the forecast, gt description). Forecast descriptions carry occupancy
/// and boxes, so only the occupancy and detection weights apply inside J_perc.
LossBreakdown prediction_loss(std::span<const GaussianScene> forecasts,
                              std::span<const GaussianScene> gt_scenes,
                              std::span<const SceneDescription> gt_descs, const LossWeights& w,
                              const LossParams& params = {});

/// Mean over steps of |dx| + |dy|.
double trajectory_loss(const Trajectory& plan, const Trajectory& gt);

struct PredictionInputs {
    std::span<const GaussianScene> forecasts;
    std::span<const GaussianScene> gt_scenes;
    std::span<const SceneDescription> gt_descs;
};

/// tra J_tra + pred J_pred; `pred` may be null when w.pred == 0.
LossBreakdown planning_loss(const Trajectory& plan, const Trajectory& gt_plan,
                            const PredictionInputs* pred, const LossWeights& w,
                            const LossParams& params = {});

/// J_perc + J_pred + J_plan, with the components as named terms of weight 1.
LossBreakdown total_loss(double perception, double prediction, double planning);

} // namespace gad
