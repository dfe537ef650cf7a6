// Copyright Contributors to the GaussAD Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

namespace gad {

/// Row-major rows x cols cost matrix.
struct CostMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    CostMatrix() = default;
    CostMatrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), values(r * c, fill) {}
    double& operator()(std::size_t i, std::size_t j) { return values[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
};

inline constexpr long kUnassigned = -1;

/// Minimum-cost assignment (Hungarian / shortest augmenting path, O(n^2 m)).
/// Matches min(rows, cols) pairs; result[i] is the column of row i or
/// kUnassigned. Costs must be finite.
std::vector<long> solve_assignment(const CostMatrix& cost);

/// Sum of the matched costs.
double assignment_cost(const CostMatrix& cost, const std::vector<long>& rows_to_cols);

} // namespace gad
