// Copyright Contributors to the GaussAD Project
// SPDX-License-Identifier: Apache-2.0
//
// Gaussian-to-voxel splatting and the occupancy cross-entropy loss with
// analytic gradients.
//
// Splatting is a pure gather: every voxel sums the contributions of its
// candidate Gaussians in ascending index order, so the indexed and the
// all-pairs paths add identical terms in identical order and agree
// bit-for-bit. Gradients are accumulated per Gaussian over the voxels in
// its cutoff box after the per-voxel upstream terms are known, which makes
// them independent of the worker count as well.

#pragma once

#include "gad/core.h"
#include "gad/grid.h"

#include <Eigen/Core>

#include <vector>

namespace gad {

/// Lower bound applied to probabilities inside log().
inline constexpr double kProbabilityFloor = 1e-12;

struct SplatParams {
    ClassConfig cfg;
    bool use_index = true;     // spatial-hash culling vs all-pairs
    bool store_fields = false; // keep the dense per-class field
    int num_workers = 1;       // 0 = hardware concurrency
    double cell_size = 0.0;    // index cell size; <= 0 means 4 voxels
};

struct SplatResult {
    OccupancyGrid grid;
    /// voxel-major, num_voxels * C entries; empty unless store_fields.
    std::vector<double> fields;

    double field(std::size_t voxel, int c) const {
        return fields[voxel * static_cast<std::size_t>(grid.num_classes) + c];
    }
};

/// Throws std::invalid_argument on class-count mismatch or invalid spec.
SplatResult splat(const GaussianScene& scene, const GridSpec& spec, const SplatParams& params);

struct GaussianGrads {
    std::vector<Vec3> d_mean;
    std::vector<Vec3> d_log_scale;
    std::vector<VecX> d_logits;
    /// (w, x, y, z), projected onto the tangent of the unit sphere.
    std::vector<Eigen::Vector4d> d_rotation;
    double loss_value = 0.0;
};

/// Which parameter groups to differentiate. Skipped groups are returned
/// as zeros.
struct GradRequest {
    bool mean = true;
    bool log_scale = true;
    bool logits = true;
    bool rotation = true;
};

/// Mean over voxels of the (C+1)-way cross-entropy between
/// P_c = F_c / (sum F + eps), P_empty = eps / (sum F + eps) and the target
/// label, with probabilities floored at kProbabilityFloor.
double occupancy_loss(const GaussianScene& scene, const OccupancyGrid& target,
                      const SplatParams& params);

/// Loss value plus exact derivatives of it. Voxels where a Gaussian is cut
/// off contribute nothing to that Gaussian; floored probabilities have zero
/// derivative.
GaussianGrads occupancy_loss_and_grads(const GaussianScene& scene, const OccupancyGrid& target,
                                       const SplatParams& params, const GradRequest& request = {});

/// Chain rule from dL/dR (R the rotation matrix of a unit quaternion q) to
/// the tangent-projected dL/dq in (w, x, y, z) order.
Eigen::Vector4d rotation_matrix_grad_to_quat(const Mat3& d_rot, const Quat& q);

} // namespace gad
