// Copyright Contributors to the GaussAD Project
// SPDX-License-Identifier: Apache-2.0

#include "gad/losses.h"

#include "gad/splat.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace gad {

// ---- description -----------------------------------------------------------

bool Box::contains(const Vec3& p) const {
    return footprint().contains(p.head<2>()) && std::abs(p.z() - center.z()) <= 0.5 * size.z();
}

const char* to_string(MapCategory c) {
    switch (c) {
    case MapCategory::Divider: return "divider";
    case MapCategory::Boundary: return "boundary";
    case MapCategory::Crossing: return "crossing";
    }
    return "?";
}

MapCategory map_category_from_string(const std::string& s) {
    if (s == "divider") return MapCategory::Divider;
    if (s == "boundary") return MapCategory::Boundary;
    if (s == "crossing") return MapCategory::Crossing;
    throw std::invalid_argument("unknown map category '" + s + "'");
}

void SceneDescription::validate() const {
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        if (!(boxes[i].size.minCoeff() > 0.0) || !boxes[i].center.allFinite()) {
            throw std::invalid_argument("box " + std::to_string(i) + ": size must be positive");
        }
    }
    for (std::size_t i = 0; i < map.size(); ++i) {
        if (map[i].points.size() < 2) {
            throw std::invalid_argument("polyline " + std::to_string(i) + ": needs >= 2 points");
        }
    }
    if (!motions.empty() && motions.size() != boxes.size()) {
        throw std::invalid_argument("motions: one list per box required");
    }
    if (occupancy) {
        occupancy->validate();
    }
}

// ---- weights / breakdown ---------------------------------------------------

void LossWeights::validate() const {
    const std::pair<const char*, double> all[] = {{"occ", occ},   {"det", det},
                                                  {"map", map},   {"motion", motion},
                                                  {"re", re},     {"perc", perc},
                                                  {"tra", tra},   {"pred", pred}};
    for (const auto& [name, v] : all) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw std::invalid_argument(std::string("LossWeights.") + name +
                                        " must be finite and >= 0");
        }
    }
}

bool LossBreakdown::has(const std::string& name) const {
    return std::any_of(terms.begin(), terms.end(), [&](const LossTerm& t) { return t.name == name; });
}

double LossBreakdown::value(const std::string& name) const {
    for (const auto& t : terms) {
        if (t.name == name) {
            return t.value;
        }
    }
    throw std::out_of_range("no loss term '" + name + "'");
}

std::string LossBreakdown::to_text() const {
    std::ostringstream os;
    os.precision(17);
    for (const auto& t : terms) {
        os << t.name << '=' << t.value << '\n';
    }
    os << "total=" << total << '\n';
    return os.str();
}

namespace {

void add_term(LossBreakdown& b, const char* name, double weight, double value) {
    b.terms.push_back({name, weight, value});
    b.total += weight * value;
}

} // namespace

// ---- representation --------------------------------------------------------

double representation_discrepancy(const GaussianScene& a, const GaussianScene& b,
                                  const LossParams& params) {
    if (a.class_names.size() != b.class_names.size()) {
        throw std::invalid_argument("representation_discrepancy: class tables differ");
    }
    if (a.gaussians.empty() && b.gaussians.empty()) {
        return 0.0;
    }
    if (a.gaussians.empty() || b.gaussians.empty()) {
        return 0.5 * params.far_cost * static_cast<double>(a.size() + b.size());
    }
    std::vector<VecX> pa, pb;
    for (const auto& g : a.gaussians) pa.push_back(softmax(g.logits()));
    for (const auto& g : b.gaussians) pb.push_back(softmax(g.logits()));
    std::vector<double> best_b(b.size(), std::numeric_limits<double>::infinity());
    double sum_a = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < b.size(); ++j) {
            const double c = (a.gaussians[i].mean() - b.gaussians[j].mean()).squaredNorm() +
                             params.semantic_weight * (pa[i] - pb[j]).squaredNorm();
            best = std::min(best, c);
            best_b[j] = std::min(best_b[j], c);
        }
        sum_a += best;
    }
    double sum_b = 0.0;
    for (double v : best_b) sum_b += v;
    return 0.5 * (sum_a + sum_b);
}

// ---- detection -------------------------------------------------------------

std::vector<long> match_boxes(std::span<const Box> pred, std::span<const Box> gt) {
    CostMatrix c(pred.size(), gt.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        for (std::size_t j = 0; j < gt.size(); ++j) {
            c(i, j) = (pred[i].center - gt[j].center).norm();
        }
    }
    return solve_assignment(c);
}

double detection_discrepancy(std::span<const Box> pred, std::span<const Box> gt,
                             const LossParams& params) {
    const auto m = match_boxes(pred, gt);
    double total = 0.0;
    std::size_t matched = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (m[i] == kUnassigned) {
            continue;
        }
        const Box& p = pred[i];
        const Box& g = gt[m[i]];
        total += (p.center - g.center).lpNorm<1>() + (p.size - g.size).lpNorm<1>() +
                 std::abs(wrap_angle(p.yaw - g.yaw));
        ++matched;
    }
    total += params.unmatched_box_cost * static_cast<double>(pred.size() + gt.size() - 2 * matched);
    return total;
}

// ---- map -------------------------------------------------------------------

std::vector<Vec2> resample_polyline(std::span<const Vec2> points, double spacing) {
    if (points.empty()) {
        return {};
    }
    if (!(spacing > 0.0)) {
        throw std::invalid_argument("resample_polyline: spacing must be positive");
    }
    std::vector<Vec2> out{points.front()};
    double carry = 0.0;  // arclength since the last emitted point
    for (std::size_t i = 1; i < points.size(); ++i) {
        const Vec2 a = points[i - 1];
        const Vec2 d = points[i] - a;
        const double len = d.norm();
        double s = spacing - carry;
        while (s < len - 1e-12) {
            out.push_back(a + d * (s / len));
            s += spacing;
        }
        carry = len - (s - spacing);
    }
    if ((out.back() - points.back()).norm() > 1e-12) {
        out.push_back(points.back());
    }
    return out;
}

double point_to_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 d = b - a;
    const double l2 = d.squaredNorm();
    const Vec2 r = p - a;
    const double along = r.dot(d);
    if (l2 == 0.0 || along <= 0.0) return r.norm();
    if (along >= l2) return (p - b).norm();
    // Perpendicular distance; avoids the cancellation of p - (a + t d), so
    // points on the segment's line come out exactly zero when the cross
    // product is exact (e.g. axis-aligned segments).
    return std::abs(d.x() * r.y() - d.y() * r.x()) / std::sqrt(l2);
}

namespace {

double mean_distance(const std::vector<Vec2>& queries, const std::vector<const Polyline*>& to) {
    double sum = 0.0;
    for (const Vec2& q : queries) {
        double best = std::numeric_limits<double>::infinity();
        for (const Polyline* line : to) {
            for (std::size_t i = 1; i < line->points.size(); ++i) {
                best = std::min(best, point_to_segment(q, line->points[i - 1], line->points[i]));
            }
        }
        sum += best;
    }
    return sum / static_cast<double>(queries.size());
}

} // namespace

double map_discrepancy(std::span<const Polyline> pred, std::span<const Polyline> gt,
                       const LossParams& params) {
    double total = 0.0;
    for (MapCategory cat : {MapCategory::Divider, MapCategory::Boundary, MapCategory::Crossing}) {
        std::vector<const Polyline*> a, b;
        std::vector<Vec2> qa, qb;
        for (const auto& l : pred) {
            if (l.category == cat) {
                a.push_back(&l);
                const auto r = resample_polyline(l.points, params.map_spacing);
                qa.insert(qa.end(), r.begin(), r.end());
            }
        }
        for (const auto& l : gt) {
            if (l.category == cat) {
                b.push_back(&l);
                const auto r = resample_polyline(l.points, params.map_spacing);
                qb.insert(qb.end(), r.begin(), r.end());
            }
        }
        if (a.empty() && b.empty()) {
            continue;
        }
        if (a.empty() || b.empty()) {
            total += params.unmatched_map_cost;
            continue;
        }
        total += 0.5 * (mean_distance(qa, b) + mean_distance(qb, a));
    }
    return total;
}

// ---- motion ----------------------------------------------------------------

namespace {

double ade(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
    const std::size_t n = std::min(a.size(), b.size());
    if (n == 0) {
        throw std::invalid_argument("motion_discrepancy: empty motion");
    }
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        s += (a[k] - b[k]).norm();
    }
    return s / static_cast<double>(n);
}

} // namespace

double motion_discrepancy(std::span<const std::vector<Vec2>> pred,
                          std::span<const std::vector<Vec2>> gt, const std::vector<long>& matching,
                          const LossParams& params) {
    const std::size_t denom = std::max(pred.size(), gt.size());
    if (denom == 0) {
        return 0.0;
    }
    std::vector<long> m = matching;
    if (m.empty()) {
        CostMatrix c(pred.size(), gt.size());
        for (std::size_t i = 0; i < pred.size(); ++i) {
            for (std::size_t j = 0; j < gt.size(); ++j) {
                c(i, j) = ade(pred[i], gt[j]);
            }
        }
        m = solve_assignment(c);
    } else if (m.size() != pred.size()) {
        throw std::invalid_argument("motion_discrepancy: matching size differs from predictions");
    }
    double total = 0.0;
    std::size_t matched = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (m[i] == kUnassigned) {
            continue;
        }
        if (m[i] < 0 || static_cast<std::size_t>(m[i]) >= gt.size()) {
            throw std::invalid_argument("motion_discrepancy: matching index out of range");
        }
        total += ade(pred[i], gt[m[i]]);
        ++matched;
    }
    total += params.unmatched_motion_cost * static_cast<double>(pred.size() + gt.size() - 2 * matched);
    return total / static_cast<double>(denom);
}

// ---- occupancy -------------------------------------------------------------

double label_discrepancy(const OccupancyGrid& pred, const OccupancyGrid& gt) {
    if (!(pred.spec == gt.spec) || pred.labels.size() != gt.labels.size()) {
        throw std::invalid_argument("label_discrepancy: grid specs differ");
    }
    if (gt.labels.empty()) {
        return 0.0;
    }
    std::size_t wrong = 0;
    for (std::size_t v = 0; v < gt.labels.size(); ++v) {
        wrong += pred.labels[v] != gt.labels[v];
    }
    return -std::log(kProbabilityFloor) * static_cast<double>(wrong) /
           static_cast<double>(gt.labels.size());
}

std::vector<Box> extract_boxes(const OccupancyGrid& grid, const ClassConfig& classes) {
    const GridSpec& s = grid.spec;
    std::vector<char> seen(grid.labels.size(), 0);
    std::vector<Box> out;
    std::vector<std::size_t> stack;
    for (std::size_t v0 = 0; v0 < grid.labels.size(); ++v0) {
        const int c = grid.labels[v0];
        if (seen[v0] || c == kEmpty || !classes.is_dynamic(c)) {
            continue;
        }
        Index3 lo = s.unflatten(v0), hi = lo;
        seen[v0] = 1;
        stack.assign(1, v0);
        while (!stack.empty()) {
            const Index3 p = s.unflatten(stack.back());
            stack.pop_back();
            for (int a = 0; a < 3; ++a) {
                lo[a] = std::min(lo[a], p[a]);
                hi[a] = std::max(hi[a], p[a]);
            }
            for (int a = 0; a < 3; ++a) {
                for (int d : {-1, 1}) {
                    Index3 q = p;
                    q[a] += d;
                    if (!s.contains(q)) {
                        continue;
                    }
                    const std::size_t w = s.flat_index(q);
                    if (!seen[w] && grid.labels[w] == c) {
                        seen[w] = 1;
                        stack.push_back(w);
                    }
                }
            }
        }
        Box b;
        for (int a = 0; a < 3; ++a) {
            const double l = s.origin[a] + lo[a] * s.voxel_size;
            const double h = s.origin[a] + (hi[a] + 1) * s.voxel_size;
            b.center[a] = 0.5 * (l + h);
            b.size[a] = h - l;
        }
        b.class_id = c;
        out.push_back(b);
    }
    return out;
}

SceneDescription describe(const GaussianScene& scene, const GridSpec& spec,
                          const LossParams& params, bool with_boxes) {
    SplatParams sp;
    sp.cfg = params.classes;
    sp.num_workers = params.num_workers;
    SceneDescription d;
    d.occupancy = splat(scene, spec, sp).grid;
    if (with_boxes) {
        d.boxes = extract_boxes(*d.occupancy, params.classes);
    }
    return d;
}

// ---- composites ------------------------------------------------------------

LossBreakdown perception_loss(const PerceptionInput& pred, const SceneDescription& gt,
                              const LossWeights& w, const LossParams& params) {
    w.validate();
    LossBreakdown out;
    if (w.occ > 0.0) {
        if (!gt.occupancy) {
            throw std::invalid_argument("perception_loss: occupancy weight set without target grid");
        }
        double j = 0.0;
        if (params.soft_occupancy && pred.scene) {
            SplatParams sp;
            sp.cfg = params.classes;
            sp.num_workers = params.num_workers;
            j = occupancy_loss(*pred.scene, *gt.occupancy, sp);
        } else if (pred.desc.occupancy) {
            j = label_discrepancy(*pred.desc.occupancy, *gt.occupancy);
        } else if (pred.scene) {
            j = label_discrepancy(describe(*pred.scene, gt.occupancy->spec, params, false).occupancy.value(),
                                  *gt.occupancy);
        } else {
            throw std::invalid_argument("perception_loss: no predicted occupancy or scene");
        }
        add_term(out, "J_occ", w.occ, j);
    }
    std::vector<long> box_match;
    if (w.det > 0.0 || w.motion > 0.0) {
        box_match = match_boxes(pred.desc.boxes, gt.boxes);
    }
    if (w.det > 0.0) {
        add_term(out, "J_det", w.det, detection_discrepancy(pred.desc.boxes, gt.boxes, params));
    }
    if (w.map > 0.0) {
        add_term(out, "J_map", w.map, map_discrepancy(pred.desc.map, gt.map, params));
    }
    if (w.motion > 0.0) {
        const bool aligned = pred.desc.motions.size() == pred.desc.boxes.size() &&
                             gt.motions.size() == gt.boxes.size();
        add_term(out, "J_motion", w.motion,
                 motion_discrepancy(pred.desc.motions, gt.motions,
                                    aligned && !pred.desc.boxes.empty() ? box_match
                                                                         : std::vector<long>{},
                                    params));
    }
    return out;
}

LossBreakdown prediction_loss(std::span<const GaussianScene> forecasts,
                              std::span<const GaussianScene> gt_scenes,
                              std::span<const SceneDescription> gt_descs, const LossWeights& w,
                              const LossParams& params) {
    w.validate();
    const std::size_t f = forecasts.size();
    if (w.re > 0.0 && gt_scenes.size() != f) {
        throw std::invalid_argument("prediction_loss: need one gt scene per forecast step");
    }
    if (w.perc > 0.0 && gt_descs.size() != f) {
        throw std::invalid_argument("prediction_loss: need one gt description per forecast step");
    }
    LossWeights inner = w;
    inner.map = 0.0;
    inner.motion = 0.0;
    double re = 0.0, perc = 0.0;
    for (std::size_t k = 0; k < f; ++k) {
        if (w.re > 0.0) {
            re += representation_discrepancy(forecasts[k], gt_scenes[k], params);
        }
        if (w.perc > 0.0) {
            PerceptionInput in;
            in.scene = &forecasts[k];
            if (inner.occ > 0.0 || inner.det > 0.0) {
                if (!gt_descs[k].occupancy) {
                    throw std::invalid_argument("prediction_loss: gt description " +
                                                std::to_string(k) + " has no occupancy grid");
                }
                in.desc = describe(forecasts[k], gt_descs[k].occupancy->spec, params, inner.det > 0.0);
            }
            perc += perception_loss(in, gt_descs[k], inner, params).total;
        }
    }
    LossBreakdown out;
    if (w.re > 0.0) add_term(out, "J_re", w.re, re);
    if (w.perc > 0.0) add_term(out, "J_perc", w.perc, perc);
    return out;
}

double trajectory_loss(const Trajectory& plan, const Trajectory& gt) {
    if (plan.size() != gt.size() || plan.size() == 0) {
        throw std::invalid_argument("trajectory_loss: trajectories must be non-empty and equal length");
    }
    double s = 0.0;
    for (std::size_t k = 0; k < plan.size(); ++k) {
        s += std::abs(plan.waypoints[k].x - gt.waypoints[k].x) +
             std::abs(plan.waypoints[k].y - gt.waypoints[k].y);
    }
    return s / static_cast<double>(plan.size());
}

LossBreakdown planning_loss(const Trajectory& plan, const Trajectory& gt_plan,
                            const PredictionInputs* pred, const LossWeights& w,
                            const LossParams& params) {
    w.validate();
    LossBreakdown out;
    if (w.tra > 0.0) {
        add_term(out, "J_tra", w.tra, trajectory_loss(plan, gt_plan));
    }
    if (w.pred > 0.0) {
        if (!pred) {
            throw std::invalid_argument("planning_loss: prediction weight set without forecasts");
        }
        add_term(out, "J_pred", w.pred,
                 prediction_loss(pred->forecasts, pred->gt_scenes, pred->gt_descs, w, params).total);
    }
    return out;
}

LossBreakdown total_loss(double perception, double prediction, double planning) {
    LossBreakdown out;
    add_term(out, "J_perc", 1.0, perception);
    add_term(out, "J_pred", 1.0, prediction);
    add_term(out, "J_plan", 1.0, planning);
    return out;
}

} // namespace gad
