// Copyright Contributors to the GaussAD Project
// SPDX-License-Identifier: Apache-2.0
//
// Direct gradient-descent fitting of Gaussians to a target occupancy grid,
// fitting of flow fields to future grids, and a finite-difference checker
// for the analytic splatting gradients.

#pragma once

#include "gad/core.h"
#include "gad/flow.h"
#include "gad/grid.h"
#include "gad/splat.h"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace gad {

/// Step sizes per parameter group. They scale the gradient of the summed
/// per-voxel loss (mean loss times voxel count), which keeps them
/// independent of grid size.
struct LearningRates {
    double mean = 0.02;
    double log_scale = 0.01;
    double logits = 0.2;
    double rotation = 0.005;
};

/// Per-step caps applied after scaling by the learning rate: Euclidean
/// length of the mean step (in voxels) and largest per-component change of
/// log-scales and logits. Guards against the 1/F blow-up of the gradient in
/// sparsely covered voxels. Zero disables a cap.
struct StepLimits {
    double mean_voxels = 0.5;
    double log_scale = 0.25;
    double logits = 1.0;
};

struct FitConfig {
    std::size_t num_gaussians = 512;
    int max_iters = 500;
    LearningRates lr;
    StepLimits limits;
    bool freeze_rotation = true;
    std::uint64_t seed = 0;
    /// Stop once |loss[t] - loss[t-1]| < tolerance; 0 runs all iterations.
    double tolerance = 0.0;
    ClassConfig classes;
    /// Optional; defaults to "class0".."classC-1".
    std::vector<std::string> class_names;
    int num_workers = 1;

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
    SplatParams splat_params() const;
};

/// Regular lattice over the grid volume, filled row-major (x fastest), with
/// the remainder placed uniformly at random from `seed`. Isotropic
/// log-scale ln(pitch / 2), identity rotation, zero logits.
GaussianScene init_uniform(const GridSpec& spec, const FitConfig& cfg);

/// Per-axis lattice counts chosen by init_uniform.
Index3 lattice_counts(const GridSpec& spec, std::size_t n);

struct FitResult {
    GaussianScene scene;
    std::vector<double> loss_history;  // loss before each step, then final
};

/// Plain gradient descent on the occupancy loss from init_uniform. Throws
/// OptimizationError when the loss becomes non-finite.
FitResult fit_gaussians(const OccupancyGrid& target, const FitConfig& cfg);

/// Same, starting from a given scene.
FitResult refine_gaussians(const GaussianScene& init, const OccupancyGrid& target,
                           const FitConfig& cfg);

struct FlowFitConfig {
    int max_iters = 150;
    double lr = 0.02;  // same gradient scaling as LearningRates; 0.05 already 2-cycles
    /// Share one displacement per connected group of dynamic Gaussians
    /// (Gaussians closer than group_radius). Disable for free per-Gaussian
    /// flows.
    bool rigid_groups = true;
    double group_radius = 1.0;
    ClassConfig classes;  // dynamic_class_ids selects the movable Gaussians
    int num_workers = 1;
};

/// Fits cumulative per-step displacements so that the ego-frame forecast of
/// each step splats to the matching future target. Rows of Gaussians whose
/// argmax class is not dynamic are exactly zero. Steps are fitted in order,
/// each warm-started by constant-velocity extrapolation of the previous
/// ones. Gradients are pulled back through the ego transform.
FlowField fit_flows(const GaussianScene& scene, std::span<const OccupancyGrid> future_targets,
                    const Trajectory& plan, const FlowFitConfig& cfg);

/// Groups of dynamic Gaussians linked by distance < radius, in ascending
/// order of their smallest member; static Gaussians are omitted.
std::vector<std::vector<std::size_t>> dynamic_groups(const GaussianScene& scene,
                                                     const ClassConfig& classes, double radius);

struct GroupError {
    double max_rel = 0.0;
    double mean_rel = 0.0;
    std::size_t compared = 0;
    std::size_t excluded = 0;  // components whose perturbation crosses the cutoff
};

struct GradientReport {
    GroupError mean;
    GroupError log_scale;
    GroupError logits;
    GroupError rotation;

    double max_rel() const;
};

struct GradientCheckOptions {
    double step = 1e-4;
    /// Denominator floor of the relative error |a - f| / max(|a|, |f|, floor).
    double abs_floor = 1e-6;
    bool mean = true;
    bool log_scale = true;
    bool logits = true;
    bool rotation = false;
};

/// Compares analytic gradients with central differences component by
/// component. A component is excluded when perturbing it by +-2 step changes
/// the set of voxels inside that Gaussian's cutoff.
GradientReport check_gradients(const GaussianScene& scene, const OccupancyGrid& target,
                               const SplatParams& params, const GradientCheckOptions& opt = {});

} // namespace gad
