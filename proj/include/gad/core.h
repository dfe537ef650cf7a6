// Copyright Contributors to the GaussAD Project
// SPDX-License-Identifier: Apache-2.0
//
// Semantic Gaussians: the sparse scene primitive. Each Gaussian carries a
// mean, an anisotropic covariance (log-scales + rotation) and a vector of
// class logits. Empty space is represented by the absence of Gaussians,
// not by a class.

#pragma once

#include "gad/geometry.h"

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gad {

using Quat = Eigen::Quaterniond;
using VecX = Eigen::VectorXd;

/// Label value for voxels without semantic evidence.
inline constexpr std::uint8_t kEmpty = 255;

/// log(1e-4) and log(1e3): the admissible range for per-axis log-scales.
inline constexpr double kMinLogScale = -9.210340371976184;
inline constexpr double kMaxLogScale = 6.907755278982137;

class SemanticGaussian {
public:
    /// Normalizes `rotation` and clamps `log_scale` into
    /// [kMinLogScale, kMaxLogScale]. Throws std::invalid_argument on
    /// non-finite input, a zero quaternion or an empty logit vector.
    SemanticGaussian(const Vec3& mean, const Vec3& log_scale, const Quat& rotation, VecX logits);

    const Vec3& mean() const { return mean_; }
    const Vec3& log_scale() const { return log_scale_; }
    const Quat& rotation() const { return rotation_; }
    const VecX& logits() const { return logits_; }
    int num_classes() const { return static_cast<int>(logits_.size()); }

    SemanticGaussian with_mean(const Vec3& mean) const;
    SemanticGaussian with_rotation(const Quat& rotation) const;

    bool operator==(const SemanticGaussian& other) const;

private:
    Vec3 mean_;
    Vec3 log_scale_;
    Quat rotation_;
    VecX logits_;
};

struct GaussianScene {
    std::vector<SemanticGaussian> gaussians;
    std::vector<std::string> class_names;
    Pose2 frame_pose;
    int timestamp_index = 0;

    std::size_t size() const { return gaussians.size(); }
    bool empty() const { return gaussians.empty(); }
    int num_classes() const { return static_cast<int>(class_names.size()); }

    /// Throws std::invalid_argument if any Gaussian's class count differs
    /// from class_names.
    void validate() const;

    bool operator==(const GaussianScene&) const = default;
};

struct ClassConfig {
    int num_classes = 1;
    std::vector<int> dynamic_class_ids;
    double empty_evidence = 0.1;
    double mahalanobis_cutoff = 3.0;

    bool is_dynamic(int class_id) const;
    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

/// Sigma = R diag(exp(2 log_scale)) R^T.
Mat3 covariance(const Vec3& log_scale, const Quat& rotation);

/// Numerically stable softmax.
VecX softmax(const VecX& logits);

/// Precomputed evaluation form of one Gaussian, shared by every splatting
/// path so that all of them produce bit-identical sums.
struct GaussianKernel {
    Vec3 mean;
    Mat3 rotation;       // columns are the principal axes
    Vec3 inv_variance;   // exp(-2 log_scale)
    double max_sigma;    // exp(max log_scale)
    VecX probs;          // softmax(logits)

    explicit GaussianKernel(const SemanticGaussian& g);

    double mahalanobis_sq(const Vec3& x) const {
        const Vec3 y = rotation.transpose() * (x - mean);
        return y.x() * y.x() * inv_variance.x() + y.y() * y.y() * inv_variance.y() +
               y.z() * y.z() * inv_variance.z();
    }
};

/// Unnormalized kernel exp(-m^2 / 2). With a cutoff, returns exactly 0 when
/// the Mahalanobis distance exceeds it.
double density_at(const SemanticGaussian& g, const Vec3& x,
                  std::optional<double> cutoff = std::nullopt);

/// F_c(x) = sum_i softmax(logits_i)_c * density_i(x), with the cfg cutoff
/// applied. The pointwise reference form of splatting.
VecX class_field_at(const GaussianScene& scene, const Vec3& x, const ClassConfig& cfg);

/// Label of a field vector: kEmpty when total evidence is below
/// empty_evidence, else the argmax class (lowest index wins ties).
std::uint8_t label_from_field(const VecX& field, double empty_evidence);

std::uint8_t label_at(const GaussianScene& scene, const Vec3& x, const ClassConfig& cfg);

/// Largest softmax probability.
double confidence(const SemanticGaussian& g);

/// Index of the largest logit (lowest index on ties).
int argmax_class(const SemanticGaussian& g);

struct PruneResult {
    GaussianScene scene;
    std::vector<std::size_t> survivors;  // original indices, ascending
};

/// Number of Gaussians kept when pruning `fraction` of `n`:
/// ceil((1 - fraction) * n).
std::size_t prune_keep_count(std::size_t n, double fraction);

/// Keeps the most confident Gaussians (ties keep the lower index) in their
/// original order. Throws std::invalid_argument unless 0 <= fraction <= 1.
PruneResult prune(const GaussianScene& scene, double fraction);

} // namespace gad
