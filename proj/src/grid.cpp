// Copyright Contributors to the GaussAD Project
// SPDX-License-Identifier: Apache-2.0

#include "gad/grid.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace gad {

void GridSpec::validate() const {
    for (int a = 0; a < 3; ++a) {
        if (dims[a] <= 0) {
            throw std::invalid_argument("GridSpec.dims[" + std::to_string(a) + "] must be positive");
        }
    }
    if (!(voxel_size > 0.0) || !std::isfinite(voxel_size)) {
        throw std::invalid_argument("GridSpec.voxel_size must be positive");
    }
    if (!origin.allFinite()) {
        throw std::invalid_argument("GridSpec.origin must be finite");
    }
    if (num_voxels() > (std::size_t{1} << 31)) {
        throw std::invalid_argument("GridSpec.dims: more than 2^31 voxels");
    }
}

Index3 GridSpec::voxel_of(const Vec3& p) const {
    Index3 out;
    for (int a = 0; a < 3; ++a) {
        const double f = std::floor((p[a] - origin[a]) / voxel_size);
        out[a] = static_cast<int>(std::clamp(f, -1e9, 1e9));
    }
    return out;
}

Vec3 voxel_center(const GridSpec& spec, const Index3& ijk) {
    if (!spec.contains(ijk)) {
        throw std::out_of_range("voxel_center: index (" + std::to_string(ijk[0]) + "," +
                                std::to_string(ijk[1]) + "," + std::to_string(ijk[2]) +
                                ") outside grid");
    }
    return spec.center_unchecked(ijk);
}

OccupancyGrid::OccupancyGrid(const GridSpec& s, int c)
    : spec(s), num_classes(c), labels(s.num_voxels(), kEmpty) {}

std::size_t OccupancyGrid::count_occupied() const {
    return static_cast<std::size_t>(
        std::count_if(labels.begin(), labels.end(), [](std::uint8_t l) { return l != kEmpty; }));
}

void OccupancyGrid::validate() const {
    spec.validate();
    if (num_classes < 1 || num_classes > 255) {
        throw std::invalid_argument("OccupancyGrid.num_classes must be in [1, 255]");
    }
    if (labels.size() != spec.num_voxels()) {
        throw std::invalid_argument("OccupancyGrid.labels size does not match dims");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != kEmpty && labels[i] >= num_classes) {
            throw std::invalid_argument("OccupancyGrid.labels[" + std::to_string(i) +
                                        "] = " + std::to_string(labels[i]) + " out of range");
        }
    }
}

double kappa_radius(const SemanticGaussian& g, double kappa) {
    return kappa * std::exp(g.log_scale().maxCoeff()) * (1.0 + 1e-9);
}

SpatialIndex::SpatialIndex(const GaussianScene& scene, const GridSpec& spec, double kappa,
                           double cell_size)
    : spec_(spec), cell_size_(cell_size > 0.0 ? cell_size : 4.0 * spec.voxel_size) {
    if (!(kappa > 0.0)) {
        throw std::invalid_argument("SpatialIndex: kappa must be positive");
    }
    spec_.validate();

    // Cells that overlap the grid volume; boxes are clipped to this range.
    Index3 grid_hi;
    for (int a = 0; a < 3; ++a) {
        grid_hi[a] = static_cast<int>(std::floor(spec.dims[a] * spec.voxel_size / cell_size_));
    }

    ranges_.reserve(scene.size());
    for (std::size_t i = 0; i < scene.size(); ++i) {
        const auto& g = scene.gaussians[i];
        const double r = kappa_radius(g, kappa);
        Index3 lo = cell_of(g.mean() - Vec3::Constant(r));
        Index3 hi = cell_of(g.mean() + Vec3::Constant(r));
        bool outside = false;
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::max(lo[a], 0);
            hi[a] = std::min(hi[a], grid_hi[a]);
            outside = outside || lo[a] > hi[a];
        }
        ranges_.emplace_back(lo, hi);
        if (outside) {
            continue;
        }
        for (int cz = lo[2]; cz <= hi[2]; ++cz) {
            for (int cy = lo[1]; cy <= hi[1]; ++cy) {
                for (int cx = lo[0]; cx <= hi[0]; ++cx) {
                    cells_[key({cx, cy, cz})].push_back(static_cast<std::uint32_t>(i));
                }
            }
        }
    }
}

std::uint64_t SpatialIndex::key(const Index3& c) {
    constexpr std::uint64_t mask = (1u << 21) - 1;
    const auto enc = [](int v) { return static_cast<std::uint64_t>(v + (1 << 20)) & mask; };
    return enc(c[0]) | (enc(c[1]) << 21) | (enc(c[2]) << 42);
}

Index3 SpatialIndex::cell_of(const Vec3& p) const {
    Index3 out;
    for (int a = 0; a < 3; ++a) {
        const double f = std::floor((p[a] - spec_.origin[a]) / cell_size_);
        out[a] = static_cast<int>(std::clamp(f, -1.0e6, 1.0e6));
    }
    return out;
}

std::span<const std::uint32_t> SpatialIndex::candidates_at(const Vec3& p) const {
    const auto it = cells_.find(key(cell_of(p)));
    if (it == cells_.end()) {
        return {};
    }
    return it->second;
}

std::span<const std::uint32_t> SpatialIndex::candidates(const Index3& ijk) const {
    return candidates_at(voxel_center(spec_, ijk));
}

std::vector<Index3> SpatialIndex::cells_of(std::size_t gaussian) const {
    std::vector<Index3> out;
    const auto& [lo, hi] = ranges_.at(gaussian);
    for (int cz = lo[2]; cz <= hi[2]; ++cz) {
        for (int cy = lo[1]; cy <= hi[1]; ++cy) {
            for (int cx = lo[0]; cx <= hi[0]; ++cx) {
                out.push_back({cx, cy, cz});
            }
        }
    }
    return out;
}

} // namespace gad
