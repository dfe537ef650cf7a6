// Copyright Contributors to the GaussAD Project
// SPDX-License-Identifier: Apache-2.0

#include "gad/assignment.h"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace gad {

std::vector<long> solve_assignment(const CostMatrix& cost) {
    for (double v : cost.values) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument("solve_assignment: non-finite cost");
        }
    }
    const bool transpose = cost.rows > cost.cols;
    const std::size_t n = transpose ? cost.cols : cost.rows;  // n <= m
    const std::size_t m = transpose ? cost.rows : cost.cols;
    std::vector<long> out(cost.rows, kUnassigned);
    if (n == 0) {
        return out;
    }
    const auto a = [&](std::size_t i, std::size_t j) {
        return transpose ? cost(j - 1, i - 1) : cost(i - 1, j - 1);
    };
    // 1-based potentials; way/p follow the classic e-maxx formulation.
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(m + 1, inf);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= m; ++j) {
                if (used[j]) {
                    continue;
                }
                const double cur = a(i0, j) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    for (std::size_t j = 1; j <= m; ++j) {
        if (p[j] == 0) {
            continue;
        }
        if (transpose) {
            out[j - 1] = static_cast<long>(p[j] - 1);
        } else {
            out[p[j] - 1] = static_cast<long>(j - 1);
        }
    }
    return out;
}

double assignment_cost(const CostMatrix& cost, const std::vector<long>& rows_to_cols) {
    double s = 0.0;
    for (std::size_t i = 0; i < rows_to_cols.size(); ++i) {
        if (rows_to_cols[i] != kUnassigned) {
            s += cost(i, static_cast<std::size_t>(rows_to_cols[i]));
        }
    }
    return s;
}

} // namespace gad
