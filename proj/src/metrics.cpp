// Copyright Contributors to the GaussAD Project
// SPDX-License-Identifier: Apache-2.0

#include "gad/metrics.h"

#include "gad/core.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace gad {

OccupancyScores miou_iou(const OccupancyGrid& pred, const OccupancyGrid& gt) {
    if (!(pred.spec == gt.spec) || pred.labels.size() != gt.labels.size()) {
        throw std::invalid_argument("miou_iou: grid specs differ");
    }
    if (pred.num_classes != gt.num_classes) {
        throw std::invalid_argument("miou_iou: class counts differ");
    }
    const int c = gt.num_classes;
    std::vector<std::size_t> inter(c, 0), in_pred(c, 0), in_gt(c, 0);
    std::size_t occ_inter = 0, occ_union = 0;
    for (std::size_t v = 0; v < gt.labels.size(); ++v) {
        const std::uint8_t p = pred.labels[v], g = gt.labels[v];
        if (p != kEmpty && p < c) ++in_pred[p];
        if (g != kEmpty && g < c) ++in_gt[g];
        if (p == g && g != kEmpty && g < c) ++inter[g];
        occ_inter += p != kEmpty && g != kEmpty;
        occ_union += p != kEmpty || g != kEmpty;
    }
    OccupancyScores out;
    out.per_class.assign(c, std::numeric_limits<double>::quiet_NaN());
    double sum = 0.0;
    int present = 0;
    bool pred_any = false;
    for (int k = 0; k < c; ++k) {
        const std::size_t uni = in_pred[k] + in_gt[k] - inter[k];
        if (uni > 0) {
            out.per_class[k] = static_cast<double>(inter[k]) / static_cast<double>(uni);
        }
        if (in_gt[k] > 0) {
            sum += out.per_class[k];
            ++present;
        }
        pred_any = pred_any || in_pred[k] > 0;
    }
    out.miou = present ? sum / present : (pred_any ? 0.0 : 1.0);
    out.iou = occ_union ? static_cast<double>(occ_inter) / static_cast<double>(occ_union) : 1.0;
    return out;
}

std::vector<double> l2_errors(const Trajectory& plan, const Trajectory& gt,
                              std::span<const int> horizons, L2Mode mode) {
    std::vector<double> out;
    for (int h : horizons) {
        if (h < 1 || static_cast<std::size_t>(h) > plan.size() ||
            static_cast<std::size_t>(h) > gt.size()) {
            throw std::invalid_argument("l2_errors: horizon " + std::to_string(h) +
                                        " outside trajectory");
        }
        const auto err = [&](int step) {
            const auto& a = plan.waypoints[step - 1];
            const auto& b = gt.waypoints[step - 1];
            return std::hypot(a.x - b.x, a.y - b.y);
        };
        if (mode == L2Mode::AtStep) {
            out.push_back(err(h));
        } else {
            double s = 0.0;
            for (int k = 1; k <= h; ++k) s += err(k);
            out.push_back(s / h);
        }
    }
    return out;
}

bool ObstacleFilter::is_obstacle(std::uint8_t label) const {
    return label != kEmpty &&
           std::find(non_obstacle_ids.begin(), non_obstacle_ids.end(), label) ==
               non_obstacle_ids.end();
}

std::size_t obstacle_voxels_in(const OccupancyGrid& grid, const OrientedRect& footprint,
                               const ObstacleFilter& filter) {
    const GridSpec& s = grid.spec;
    const auto corners = footprint.corners();
    double lo[2] = {corners[0].x(), corners[0].y()}, hi[2] = {lo[0], lo[1]};
    for (const Vec2& c : corners) {
        for (int a = 0; a < 2; ++a) {
            lo[a] = std::min(lo[a], c[a]);
            hi[a] = std::max(hi[a], c[a]);
        }
    }
    // Voxel index ranges whose centers can fall in the box (one voxel margin).
    int i0[3], i1[3];
    const double zl[2] = {filter.z_min, filter.z_max};
    for (int a = 0; a < 3; ++a) {
        const double l = a < 2 ? lo[a] : zl[0];
        const double h = a < 2 ? hi[a] : zl[1];
        i0[a] = std::max(0, static_cast<int>(std::floor((l - s.origin[a]) / s.voxel_size)) - 1);
        i1[a] = std::min(s.dims[a] - 1,
                         static_cast<int>(std::floor((h - s.origin[a]) / s.voxel_size)) + 1);
    }
    std::size_t n = 0;
    for (int k = i0[2]; k <= i1[2]; ++k) {
        for (int j = i0[1]; j <= i1[1]; ++j) {
            for (int i = i0[0]; i <= i1[0]; ++i) {
                const Index3 ijk{i, j, k};
                if (!filter.is_obstacle(grid.labels[s.flat_index(ijk)])) {
                    continue;
                }
                const Vec3 c = s.center_unchecked(ijk);
                if (c.z() >= filter.z_min && c.z() <= filter.z_max &&
                    footprint.contains(c.head<2>())) {
                    ++n;
                }
            }
        }
    }
    return n;
}

int first_collision_step(const Trajectory& plan, const CollisionScenario& scenario,
                         const Footprint& footprint, const ObstacleFilter& filter) {
    for (std::size_t k = 0; k < plan.size(); ++k) {
        const OrientedRect ego = footprint.at(plan.waypoints[k]);
        if (k < scenario.boxes.size()) {
            for (const Box& b : scenario.boxes[k]) {
                if (overlaps(ego, b.footprint())) {
                    return static_cast<int>(k) + 1;
                }
            }
        }
        if (k < scenario.grids.size() && obstacle_voxels_in(scenario.grids[k], ego, filter) > 0) {
            return static_cast<int>(k) + 1;
        }
    }
    return 0;
}

std::vector<double> collision_rate(std::span<const Trajectory> plans,
                                   std::span<const CollisionScenario> scenarios,
                                   std::span<const int> horizons, const Footprint& footprint,
                                   const ObstacleFilter& filter) {
    if (plans.size() != scenarios.size()) {
        throw std::invalid_argument("collision_rate: one scenario per plan required");
    }
    std::vector<int> first(plans.size());
    for (std::size_t s = 0; s < plans.size(); ++s) {
        first[s] = first_collision_step(plans[s], scenarios[s], footprint, filter);
    }
    std::vector<double> out;
    for (int h : horizons) {
        if (h < 1) {
            throw std::invalid_argument("collision_rate: horizons are 1-based");
        }
        std::size_t hits = 0;
        for (int f : first) {
            hits += f > 0 && f <= h;
        }
        out.push_back(plans.empty() ? 0.0
                                    : 100.0 * static_cast<double>(hits) /
                                          static_cast<double>(plans.size()));
    }
    return out;
}

ForecastScores forecast_eval(std::span<const OccupancyGrid> pred,
                             std::span<const OccupancyGrid> gt, std::span<const int> horizons) {
    ForecastScores out;
    int future = 0;
    for (int h : horizons) {
        if (h < 0 || static_cast<std::size_t>(h) >= pred.size() ||
            static_cast<std::size_t>(h) >= gt.size()) {
            throw std::invalid_argument("forecast_eval: horizon " + std::to_string(h) +
                                        " has no grid");
        }
        const auto s = miou_iou(pred[h], gt[h]);
        out.horizons.push_back(h);
        out.miou.push_back(s.miou);
        out.iou.push_back(s.iou);
        if (h > 0) {
            out.avg_miou += s.miou;
            out.avg_iou += s.iou;
            ++future;
        }
    }
    if (future > 0) {
        out.avg_miou /= future;
        out.avg_iou /= future;
    }
    return out;
}

} // namespace gad
