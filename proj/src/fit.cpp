// Copyright Contributors to the GaussAD Project
// SPDX-License-Identifier: Apache-2.0

#include "gad/fit.h"

#include "gad/error.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace gad {

namespace {

// Portable uniform [0, 1) from a 64-bit engine (bit-identical everywhere,
// unlike std::uniform_real_distribution).
double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Vec3 grid_extent(const GridSpec& spec) {
    return {spec.dims[0] * spec.voxel_size, spec.dims[1] * spec.voxel_size,
            spec.dims[2] * spec.voxel_size};
}

std::vector<std::string> default_names(int c) {
    std::vector<std::string> names;
    for (int k = 0; k < c; ++k) {
        names.push_back("class" + std::to_string(k));
    }
    return names;
}

} // namespace

void FitConfig::validate() const {
    classes.validate();
    if (num_gaussians < 1) {
        throw std::invalid_argument("FitConfig.num_gaussians must be >= 1");
    }
    if (max_iters < 0) {
        throw std::invalid_argument("FitConfig.max_iters must be >= 0");
    }
    const auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw std::invalid_argument(std::string("FitConfig.lr.") + name + " must be positive");
        }
    };
    positive(lr.mean, "mean");
    positive(lr.log_scale, "log_scale");
    positive(lr.logits, "logits");
    positive(lr.rotation, "rotation");
    for (const auto& [v, name] : {std::pair{limits.mean_voxels, "mean_voxels"},
                                  std::pair{limits.log_scale, "log_scale"},
                                  std::pair{limits.logits, "logits"}}) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw std::invalid_argument(std::string("FitConfig.limits.") + name + " must be >= 0");
        }
    }
    if (!class_names.empty() && static_cast<int>(class_names.size()) != classes.num_classes) {
        throw std::invalid_argument("FitConfig.class_names size does not match num_classes");
    }
}

SplatParams FitConfig::splat_params() const {
    SplatParams p;
    p.cfg = classes;
    p.num_workers = num_workers;
    return p;
}

Index3 lattice_counts(const GridSpec& spec, std::size_t n) {
    const Vec3 ext = grid_extent(spec);
    Index3 best{1, 1, 1};
    std::size_t best_product = 1;
    double best_pitch = ext.maxCoeff();
    const std::size_t kmax = std::max<std::size_t>(1, n);
    for (int a = 0; a < 3; ++a) {
        for (std::size_t k = 1; k <= kmax; ++k) {
            const double pitch = ext[a] / static_cast<double>(k);
            Index3 counts;
            std::size_t product = 1;
            for (int b = 0; b < 3; ++b) {
                counts[b] = std::max(1, static_cast<int>(std::floor(ext[b] / pitch + 1e-9)));
                product *= static_cast<std::size_t>(counts[b]);
            }
            if (product > n) {
                break;  // finer pitches along this axis only grow the product
            }
            if (product > best_product || (product == best_product && pitch > best_pitch)) {
                best = counts;
                best_product = product;
                best_pitch = pitch;
            }
        }
    }
    return best;
}

GaussianScene init_uniform(const GridSpec& spec, const FitConfig& cfg) {
    spec.validate();
    cfg.validate();
    const int c = cfg.classes.num_classes;
    const Vec3 ext = grid_extent(spec);
    const Index3 counts = lattice_counts(spec, cfg.num_gaussians);
    const Vec3 pitch(ext[0] / counts[0], ext[1] / counts[1], ext[2] / counts[2]);
    const double log_scale = std::log(pitch.minCoeff() / 2.0);

    GaussianScene scene;
    scene.class_names = cfg.class_names.empty() ? default_names(c) : cfg.class_names;
    scene.gaussians.reserve(cfg.num_gaussians);
    const VecX logits = VecX::Zero(c);
    for (int k = 0; k < counts[2]; ++k) {
        for (int j = 0; j < counts[1]; ++j) {
            for (int i = 0; i < counts[0]; ++i) {
                const Vec3 mu = spec.origin + Vec3((i + 0.5) * pitch[0], (j + 0.5) * pitch[1],
                                                   (k + 0.5) * pitch[2]);
                scene.gaussians.emplace_back(mu, Vec3::Constant(log_scale), Quat::Identity(),
                                             logits);
            }
        }
    }
    std::mt19937_64 rng(cfg.seed);
    while (scene.gaussians.size() < cfg.num_gaussians) {
        Vec3 mu;
        for (int a = 0; a < 3; ++a) {
            mu[a] = spec.origin[a] + uniform01(rng) * ext[a];
        }
        scene.gaussians.emplace_back(mu, Vec3::Constant(log_scale), Quat::Identity(), logits);
    }
    return scene;
}

namespace {

// A non-finite step passes through unchanged so divergence is still reported.
Vec3 capped_norm(const Vec3& step, double cap) {
    const double n = step.norm();
    return (cap > 0.0 && n > cap && std::isfinite(n)) ? Vec3(step * (cap / n)) : step;
}

VecX capped_abs(const VecX& step, double cap) {
    if (cap <= 0.0 || !step.allFinite()) return step;
    return step.cwiseMax(-cap).cwiseMin(cap);
}

} // namespace

FitResult refine_gaussians(const GaussianScene& init, const OccupancyGrid& target,
                           const FitConfig& cfg) {
    cfg.validate();
    const SplatParams params = cfg.splat_params();
    const double m = static_cast<double>(target.spec.num_voxels());
    GradRequest request;
    request.rotation = !cfg.freeze_rotation;
    const double max_mean_step = cfg.limits.mean_voxels * target.spec.voxel_size;

    FitResult out;
    out.scene = init;
    for (int it = 0; it < cfg.max_iters; ++it) {
        const GaussianGrads g = occupancy_loss_and_grads(out.scene, target, params, request);
        if (!std::isfinite(g.loss_value)) {
            throw OptimizationError("fit_gaussians: non-finite loss", it);
        }
        out.loss_history.push_back(g.loss_value);
        if (cfg.tolerance > 0.0 && it > 0 &&
            std::abs(out.loss_history[it] - out.loss_history[it - 1]) < cfg.tolerance) {
            return out;
        }
        for (std::size_t i = 0; i < out.scene.size(); ++i) {
            const SemanticGaussian& s = out.scene.gaussians[i];
            const Vec3 mu = s.mean() - capped_norm(Vec3(cfg.lr.mean * m * g.d_mean[i]), max_mean_step);
            const Vec3 ls =
                s.log_scale() - Vec3(capped_abs(cfg.lr.log_scale * m * g.d_log_scale[i], cfg.limits.log_scale));
            const VecX lg = s.logits() - capped_abs(VecX(cfg.lr.logits * m * g.d_logits[i]), cfg.limits.logits);
            Quat q = s.rotation();
            if (!cfg.freeze_rotation) {
                const Eigen::Vector4d step = cfg.lr.rotation * m * g.d_rotation[i];
                q = Quat(q.w() - step[0], q.x() - step[1], q.y() - step[2], q.z() - step[3]);
            }
            if (!mu.allFinite() || !ls.allFinite() || !lg.allFinite() ||
                !q.coeffs().allFinite()) {
                throw OptimizationError("fit_gaussians: non-finite parameters", it);
            }
            out.scene.gaussians[i] = SemanticGaussian(mu, ls, q, lg);
        }
    }
    const double final_loss = occupancy_loss(out.scene, target, params);
    if (!std::isfinite(final_loss)) {
        throw OptimizationError("fit_gaussians: non-finite loss", cfg.max_iters);
    }
    out.loss_history.push_back(final_loss);
    return out;
}

FitResult fit_gaussians(const OccupancyGrid& target, const FitConfig& cfg) {
    target.validate();
    if (target.num_classes != cfg.classes.num_classes) {
        throw std::invalid_argument("fit_gaussians: target class count does not match config");
    }
    return refine_gaussians(init_uniform(target.spec, cfg), target, cfg);
}

std::vector<std::vector<std::size_t>> dynamic_groups(const GaussianScene& scene,
                                                     const ClassConfig& classes, double radius) {
    const std::size_t n = scene.size();
    std::vector<std::size_t> parent(n);
    for (std::size_t i = 0; i < n; ++i) {
        parent[i] = i;
    }
    const auto find = [&](std::size_t i) {
        while (parent[i] != i) {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        return i;
    };
    std::vector<std::size_t> dyn;
    for (std::size_t i = 0; i < n; ++i) {
        if (classes.is_dynamic(argmax_class(scene.gaussians[i]))) {
            dyn.push_back(i);
        }
    }
    const double r2 = radius * radius;
    for (std::size_t a = 0; a < dyn.size(); ++a) {
        for (std::size_t b = a + 1; b < dyn.size(); ++b) {
            const std::size_t i = dyn[a], j = dyn[b];
            if ((scene.gaussians[i].mean() - scene.gaussians[j].mean()).squaredNorm() < r2 &&
                argmax_class(scene.gaussians[i]) == argmax_class(scene.gaussians[j])) {
                const std::size_t ri = find(i), rj = find(j);
                parent[std::max(ri, rj)] = std::min(ri, rj);
            }
        }
    }
    std::vector<std::vector<std::size_t>> groups;
    std::vector<long> slot(n, -1);
    for (std::size_t i : dyn) {
        const std::size_t r = find(i);
        if (slot[r] < 0) {
            slot[r] = static_cast<long>(groups.size());
            groups.emplace_back();
        }
        groups[slot[r]].push_back(i);
    }
    return groups;
}

FlowField fit_flows(const GaussianScene& scene, std::span<const OccupancyGrid> future_targets,
                    const Trajectory& plan, const FlowFitConfig& cfg) {
    cfg.classes.validate();
    if (future_targets.size() != plan.size()) {
        throw std::invalid_argument("fit_flows: " + std::to_string(future_targets.size()) +
                                    " targets for a " + std::to_string(plan.size()) +
                                    "-step plan");
    }
    const std::size_t n = scene.size();
    FlowField flows = FlowField::zeros(plan.size(), n);

    std::vector<std::vector<std::size_t>> groups;
    if (cfg.rigid_groups) {
        groups = dynamic_groups(scene, cfg.classes, cfg.group_radius);
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            if (cfg.classes.is_dynamic(argmax_class(scene.gaussians[i]))) {
                groups.push_back({i});
            }
        }
    }
    if (groups.empty()) {
        return flows;
    }

    SplatParams params;
    params.cfg = cfg.classes;
    params.num_workers = cfg.num_workers;
    GradRequest request;
    request.log_scale = false;
    request.logits = false;
    request.rotation = false;

    for (std::size_t k = 0; k < plan.size(); ++k) {
        const OccupancyGrid& target = future_targets[k];
        const double m = static_cast<double>(target.spec.num_voxels());
        const Waypoint& w = plan.waypoints[k];
        std::vector<Vec3>& step = flows.steps[k];
        if (k == 1) {
            for (std::size_t i = 0; i < n; ++i) {
                step[i] = 2.0 * flows.steps[0][i];
            }
        } else if (k >= 2) {
            for (std::size_t i = 0; i < n; ++i) {
                step[i] = 2.0 * flows.steps[k - 1][i] - flows.steps[k - 2][i];
            }
        }
        for (int it = 0; it < cfg.max_iters; ++it) {
            const GaussianScene moved = ego_transform(apply_flow(scene, step), w);
            const GaussianGrads g = occupancy_loss_and_grads(moved, target, params, request);
            if (!std::isfinite(g.loss_value)) {
                throw OptimizationError("fit_flows: non-finite loss", it);
            }
            for (const auto& group : groups) {
                Vec3 d = Vec3::Zero();
                for (std::size_t i : group) {
                    // The transform rotates displacements by R(-yaw); pull back with R(yaw).
                    const Vec2 xy = rot2(w.yaw) * g.d_mean[i].head<2>();
                    d += Vec3(xy.x(), xy.y(), g.d_mean[i].z());
                }
                d /= static_cast<double>(group.size());
                const Vec3 delta = cfg.lr * m * d;
                for (std::size_t i : group) {
                    step[i] -= delta;
                }
            }
        }
        for (const Vec3& s : step) {
            if (!s.allFinite()) {
                throw OptimizationError("fit_flows: non-finite displacement", cfg.max_iters);
            }
        }
    }
    return flows;
}

double GradientReport::max_rel() const {
    return std::max({mean.max_rel, log_scale.max_rel, logits.max_rel, rotation.max_rel});
}

namespace {

std::vector<std::size_t> active_voxels(const SemanticGaussian& g, const GridSpec& spec,
                                       double kappa) {
    const GaussianKernel k(g);
    const double cut2 = kappa * kappa;
    std::vector<std::size_t> out;
    for (std::size_t v = 0; v < spec.num_voxels(); ++v) {
        if (k.mahalanobis_sq(spec.center_unchecked(spec.unflatten(v))) <= cut2) {
            out.push_back(v);
        }
    }
    return out;
}

SemanticGaussian perturbed(const SemanticGaussian& g, int group, int comp, double delta) {
    Vec3 mu = g.mean();
    Vec3 ls = g.log_scale();
    VecX lg = g.logits();
    Eigen::Vector4d q(g.rotation().w(), g.rotation().x(), g.rotation().y(), g.rotation().z());
    switch (group) {
    case 0: mu[comp] += delta; break;
    case 1: ls[comp] += delta; break;
    case 2: lg[comp] += delta; break;
    default: q[comp] += delta; break;
    }
    return SemanticGaussian(mu, ls, Quat(q[0], q[1], q[2], q[3]), lg);
}

} // namespace

GradientReport check_gradients(const GaussianScene& scene, const OccupancyGrid& target,
                               const SplatParams& params, const GradientCheckOptions& opt) {
    GradRequest request;
    request.mean = opt.mean;
    request.log_scale = opt.log_scale;
    request.logits = opt.logits;
    request.rotation = opt.rotation;
    const GaussianGrads grads = occupancy_loss_and_grads(scene, target, params, request);
    const double kappa = params.cfg.mahalanobis_cutoff;
    const double h = opt.step;

    GradientReport report;
    GroupError* errs[4] = {&report.mean, &report.log_scale, &report.logits, &report.rotation};
    const bool enabled[4] = {opt.mean, opt.log_scale, opt.logits, opt.rotation};
    std::vector<double> sums(4, 0.0);

    GaussianScene work = scene;
    for (std::size_t i = 0; i < scene.size(); ++i) {
        const SemanticGaussian& g = scene.gaussians[i];
        const auto base = active_voxels(g, target.spec, kappa);
        for (int group = 0; group < 4; ++group) {
            if (!enabled[group]) {
                continue;
            }
            const int comps = group == 2 ? g.num_classes() : (group == 3 ? 4 : 3);
            for (int comp = 0; comp < comps; ++comp) {
                if (group != 2 &&
                    (active_voxels(perturbed(g, group, comp, 2 * h), target.spec, kappa) != base ||
                     active_voxels(perturbed(g, group, comp, -2 * h), target.spec, kappa) != base)) {
                    ++errs[group]->excluded;
                    continue;
                }
                work.gaussians[i] = perturbed(g, group, comp, h);
                const double fp = occupancy_loss(work, target, params);
                work.gaussians[i] = perturbed(g, group, comp, -h);
                const double fm = occupancy_loss(work, target, params);
                work.gaussians[i] = g;
                const double fd = (fp - fm) / (2.0 * h);
                double an = 0.0;
                switch (group) {
                case 0: an = grads.d_mean[i][comp]; break;
                case 1: an = grads.d_log_scale[i][comp]; break;
                case 2: an = grads.d_logits[i][comp]; break;
                default: an = grads.d_rotation[i][comp]; break;
                }
                const double rel =
                    std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), opt.abs_floor});
                errs[group]->max_rel = std::max(errs[group]->max_rel, rel);
                sums[group] += rel;
                ++errs[group]->compared;
            }
        }
    }
    for (int group = 0; group < 4; ++group) {
        if (errs[group]->compared > 0) {
            errs[group]->mean_rel = sums[group] / static_cast<double>(errs[group]->compared);
        }
    }
    return report;
}

} // namespace gad
