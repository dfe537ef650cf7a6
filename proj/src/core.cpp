// Copyright Contributors to the GaussAD Project
// SPDX-License-Identifier: Apache-2.0

#include "gad/core.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace gad {

namespace {

bool all_finite(const Vec3& v) { return v.allFinite(); }

} // namespace

SemanticGaussian::SemanticGaussian(const Vec3& mean, const Vec3& log_scale,
                                   const Quat& rotation, VecX logits)
    : mean_(mean), log_scale_(log_scale), rotation_(rotation), logits_(std::move(logits)) {
    if (!all_finite(mean_) || !all_finite(log_scale_)) {
        throw std::invalid_argument("SemanticGaussian: non-finite mean or log_scale");
    }
    if (!rotation_.coeffs().allFinite()) {
        throw std::invalid_argument("SemanticGaussian: non-finite rotation");
    }
    const double n = rotation_.norm();
    if (n == 0.0) {
        throw std::invalid_argument("SemanticGaussian: zero quaternion");
    }
    // Already-unit quaternions are kept bit-for-bit so that re-normalization
    // is idempotent (exact serialization round-trips).
    if (std::abs(n - 1.0) > 4.0 * std::numeric_limits<double>::epsilon()) {
        rotation_.coeffs() /= n;
    }
    if (logits_.size() == 0) {
        throw std::invalid_argument("SemanticGaussian: empty logits");
    }
    if (!logits_.allFinite()) {
        throw std::invalid_argument("SemanticGaussian: non-finite logits");
    }
    log_scale_ = log_scale_.cwiseMax(kMinLogScale).cwiseMin(kMaxLogScale);
}

SemanticGaussian SemanticGaussian::with_mean(const Vec3& mean) const {
    SemanticGaussian g = *this;
    if (!all_finite(mean)) {
        throw std::invalid_argument("SemanticGaussian: non-finite mean");
    }
    g.mean_ = mean;
    return g;
}

SemanticGaussian SemanticGaussian::with_rotation(const Quat& rotation) const {
    return SemanticGaussian(mean_, log_scale_, rotation, logits_);
}

bool SemanticGaussian::operator==(const SemanticGaussian& other) const {
    return mean_ == other.mean_ && log_scale_ == other.log_scale_ &&
           rotation_.coeffs() == other.rotation_.coeffs() && logits_.size() == other.logits_.size() &&
           logits_ == other.logits_;
}

void GaussianScene::validate() const {
    const int c = num_classes();
    for (std::size_t i = 0; i < gaussians.size(); ++i) {
        if (gaussians[i].num_classes() != c) {
            throw std::invalid_argument("GaussianScene: gaussian " + std::to_string(i) + " has " +
                                        std::to_string(gaussians[i].num_classes()) +
                                        " logits, expected " + std::to_string(c));
        }
    }
}

bool ClassConfig::is_dynamic(int class_id) const {
    return std::find(dynamic_class_ids.begin(), dynamic_class_ids.end(), class_id) !=
           dynamic_class_ids.end();
}

void ClassConfig::validate() const {
    if (num_classes < 1 || num_classes > 255) {
        throw std::invalid_argument("ClassConfig.num_classes must be in [1, 255]");
    }
    for (int id : dynamic_class_ids) {
        if (id < 0 || id >= num_classes) {
            throw std::invalid_argument("ClassConfig.dynamic_class_ids contains " + std::to_string(id));
        }
    }
    if (!(empty_evidence > 0.0) || !std::isfinite(empty_evidence)) {
        throw std::invalid_argument("ClassConfig.empty_evidence must be positive");
    }
    if (!(mahalanobis_cutoff > 0.0) || !std::isfinite(mahalanobis_cutoff)) {
        throw std::invalid_argument("ClassConfig.mahalanobis_cutoff must be positive");
    }
}

Mat3 covariance(const Vec3& log_scale, const Quat& rotation) {
    if (!log_scale.allFinite() || !rotation.coeffs().allFinite()) {
        throw std::invalid_argument("covariance: non-finite input");
    }
    const Mat3 r = rotation.normalized().toRotationMatrix();
    const Vec3 var = (2.0 * log_scale).array().exp();
    Mat3 sigma = r * var.asDiagonal() * r.transpose();
    // Symmetrize away rounding asymmetry.
    return 0.5 * (sigma + sigma.transpose());
}

VecX softmax(const VecX& logits) {
    const double m = logits.maxCoeff();
    VecX e = (logits.array() - m).exp();
    return e / e.sum();
}

GaussianKernel::GaussianKernel(const SemanticGaussian& g)
    : mean(g.mean()),
      rotation(g.rotation().toRotationMatrix()),
      inv_variance((-2.0 * g.log_scale()).array().exp()),
      max_sigma(std::exp(g.log_scale().maxCoeff())),
      probs(softmax(g.logits())) {}

double density_at(const SemanticGaussian& g, const Vec3& x, std::optional<double> cutoff) {
    const GaussianKernel k(g);
    const double m2 = k.mahalanobis_sq(x);
    if (cutoff && m2 > *cutoff * *cutoff) {
        return 0.0;
    }
    return std::exp(-0.5 * m2);
}

VecX class_field_at(const GaussianScene& scene, const Vec3& x, const ClassConfig& cfg) {
    VecX field = VecX::Zero(cfg.num_classes);
    const double cut2 = cfg.mahalanobis_cutoff * cfg.mahalanobis_cutoff;
    for (const auto& g : scene.gaussians) {
        const GaussianKernel k(g);
        const double m2 = k.mahalanobis_sq(x);
        if (m2 > cut2) {
            continue;
        }
        const double d = std::exp(-0.5 * m2);
        for (int c = 0; c < cfg.num_classes; ++c) {
            field[c] += k.probs[c] * d;
        }
    }
    return field;
}

std::uint8_t label_from_field(const VecX& field, double empty_evidence) {
    if (field.size() == 0 || field.sum() < empty_evidence) {
        return kEmpty;
    }
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < field.size(); ++c) {
        if (field[c] > field[best]) {
            best = c;
        }
    }
    return static_cast<std::uint8_t>(best);
}

std::uint8_t label_at(const GaussianScene& scene, const Vec3& x, const ClassConfig& cfg) {
    return label_from_field(class_field_at(scene, x, cfg), cfg.empty_evidence);
}

double confidence(const SemanticGaussian& g) { return softmax(g.logits()).maxCoeff(); }

int argmax_class(const SemanticGaussian& g) {
    const VecX& l = g.logits();
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < l.size(); ++c) {
        if (l[c] > l[best]) {
            best = c;
        }
    }
    return static_cast<int>(best);
}

std::size_t prune_keep_count(std::size_t n, double fraction) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) {
        throw std::invalid_argument("prune: fraction must be in [0, 1]");
    }
    const double keep = (1.0 - fraction) * static_cast<double>(n);
    const double nearest = std::round(keep);
    // Products like 0.6 * 25600 land a few ulp off the exact integer.
    if (std::abs(keep - nearest) <= 1e-9 * std::max(1.0, static_cast<double>(n))) {
        return static_cast<std::size_t>(nearest);
    }
    return std::min(n, static_cast<std::size_t>(std::ceil(keep)));
}

PruneResult prune(const GaussianScene& scene, double fraction) {
    const std::size_t n = scene.size();
    const std::size_t keep = prune_keep_count(n, fraction);

    std::vector<double> conf(n);
    for (std::size_t i = 0; i < n; ++i) {
        conf[i] = confidence(scene.gaussians[i]);
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return conf[a] > conf[b]; });
    order.resize(keep);
    std::sort(order.begin(), order.end());

    PruneResult out;
    out.scene.class_names = scene.class_names;
    out.scene.frame_pose = scene.frame_pose;
    out.scene.timestamp_index = scene.timestamp_index;
    out.scene.gaussians.reserve(keep);
    for (std::size_t i : order) {
        out.scene.gaussians.push_back(scene.gaussians[i]);
    }
    out.survivors = std::move(order);
    return out;
}

} // namespace gad
