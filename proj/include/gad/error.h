// Copyright Contributors to the GaussAD Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gad {

/// Malformed or unsupported file contents.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Gradient descent produced a non-finite loss.
class OptimizationError : public std::runtime_error {
public:
    OptimizationError(const std::string& what, int iteration)
        : std::runtime_error(what + " at iteration " + std::to_string(iteration)),
          iteration_(iteration) {}

    int iteration() const noexcept { return iteration_; }

private:
    int iteration_;
};

} // namespace gad
