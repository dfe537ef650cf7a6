// Copyright Contributors to the GaussAD Project
// SPDX-License-Identifier: Apache-2.0
//
// Dense voxel grids and the spatial hash used to cull Gaussians per voxel.

#pragma once

#include "gad/core.h"

#include <array>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

namespace gad {

using Index3 = std::array<int, 3>;

struct GridSpec {
    Vec3 origin = Vec3::Zero();  // outer corner of voxel (0,0,0)
    Index3 dims = {1, 1, 1};
    double voxel_size = 1.0;

    /// Throws std::invalid_argument for non-positive dims/voxel size or more
    /// than 2^31 voxels.
    void validate() const;

    std::size_t num_voxels() const {
        return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    }
    bool contains(const Index3& ijk) const {
        return ijk[0] >= 0 && ijk[1] >= 0 && ijk[2] >= 0 && ijk[0] < dims[0] && ijk[1] < dims[1] &&
               ijk[2] < dims[2];
    }
    /// x-fastest: i + nx * (j + ny * k).
    std::size_t flat_index(const Index3& ijk) const {
        return static_cast<std::size_t>(ijk[0]) +
               static_cast<std::size_t>(dims[0]) *
                   (static_cast<std::size_t>(ijk[1]) + static_cast<std::size_t>(dims[1]) * ijk[2]);
    }
    Index3 unflatten(std::size_t idx) const {
        const auto nx = static_cast<std::size_t>(dims[0]);
        const auto ny = static_cast<std::size_t>(dims[1]);
        return {static_cast<int>(idx % nx), static_cast<int>((idx / nx) % ny),
                static_cast<int>(idx / (nx * ny))};
    }
    /// Center assuming ijk is in range; no bounds check.
    Vec3 center_unchecked(const Index3& ijk) const {
        return {origin.x() + (ijk[0] + 0.5) * voxel_size, origin.y() + (ijk[1] + 0.5) * voxel_size,
                origin.z() + (ijk[2] + 0.5) * voxel_size};
    }
    /// Voxel containing point p, which may lie outside the grid.
    Index3 voxel_of(const Vec3& p) const;

    bool operator==(const GridSpec&) const = default;
};

/// Throws std::out_of_range when ijk is outside the grid.
Vec3 voxel_center(const GridSpec& spec, const Index3& ijk);

struct OccupancyGrid {
    GridSpec spec;
    int num_classes = 1;
    std::vector<std::uint8_t> labels;  // x-fastest; kEmpty for empty

    OccupancyGrid() = default;
    /// All-EMPTY grid.
    OccupancyGrid(const GridSpec& spec, int num_classes);

    std::uint8_t at(const Index3& ijk) const { return labels[spec.flat_index(ijk)]; }
    std::uint8_t& at(const Index3& ijk) { return labels[spec.flat_index(ijk)]; }

    std::size_t count_occupied() const;
    /// Throws std::invalid_argument if a label is neither kEmpty nor < num_classes.
    void validate() const;

    bool operator==(const OccupancyGrid&) const = default;
};

/// Hash from integer cell coordinates to the Gaussians whose conservative
/// kappa-radius box touches the cell. Cells are measured from the grid
/// origin. Immutable after construction.
class SpatialIndex {
public:
    /// cell_size <= 0 selects the default of four voxels.
    SpatialIndex(const GaussianScene& scene, const GridSpec& spec, double kappa,
                 double cell_size = 0.0);

    double cell_size() const { return cell_size_; }
    std::size_t num_cells() const { return cells_.size(); }

    /// Sorted, duplicate-free superset of the Gaussians within kappa of the
    /// voxel center. Throws std::out_of_range when ijk is outside the grid.
    std::span<const std::uint32_t> candidates(const Index3& ijk) const;

    /// Candidates of the cell containing an arbitrary point.
    std::span<const std::uint32_t> candidates_at(const Vec3& p) const;

    /// Cells touched by Gaussian i's box, for inspection and tests.
    std::vector<Index3> cells_of(std::size_t gaussian) const;

private:
    static std::uint64_t key(const Index3& c);
    Index3 cell_of(const Vec3& p) const;

    GridSpec spec_;
    double cell_size_;
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> cells_;
    std::vector<std::pair<Index3, Index3>> ranges_;  // per-Gaussian [lo, hi] cells
};

/// Conservative per-axis half extent of a Gaussian's kappa ellipsoid:
/// kappa * exp(max log_scale), slightly inflated against rounding.
double kappa_radius(const SemanticGaussian& g, double kappa);

} // namespace gad
