// Copyright Contributors to the GaussAD Project
// SPDX-License-Identifier: Apache-2.0

#include "gad/splat.h"

#include "gad/parallel.h"

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

namespace gad {

namespace {

void check_inputs(const GaussianScene& scene, const GridSpec& spec, const SplatParams& params) {
    params.cfg.validate();
    spec.validate();
    const int c = params.cfg.num_classes;
    if (!scene.class_names.empty() && scene.num_classes() != c) {
        throw std::invalid_argument("splat: scene has " + std::to_string(scene.num_classes()) +
                                    " classes, params expect " + std::to_string(c));
    }
    for (std::size_t i = 0; i < scene.size(); ++i) {
        if (scene.gaussians[i].num_classes() != c) {
            throw std::invalid_argument("splat: gaussian " + std::to_string(i) +
                                        " has wrong class count");
        }
    }
}

std::vector<GaussianKernel> make_kernels(const GaussianScene& scene) {
    std::vector<GaussianKernel> k;
    k.reserve(scene.size());
    for (const auto& g : scene.gaussians) {
        k.emplace_back(g);
    }
    return k;
}

// Pass-one machinery shared by splat() and the loss: per-voxel gather of F.
class FieldGatherer {
public:
    FieldGatherer(const GaussianScene& scene, const GridSpec& spec, const SplatParams& params)
        : spec_(spec),
          kernels_(make_kernels(scene)),
          cut2_(params.cfg.mahalanobis_cutoff * params.cfg.mahalanobis_cutoff),
          num_classes_(params.cfg.num_classes) {
        if (params.use_index) {
            index_.emplace(scene, spec, params.cfg.mahalanobis_cutoff, params.cell_size);
        }
    }

    const std::vector<GaussianKernel>& kernels() const { return kernels_; }
    double cut2() const { return cut2_; }

    // field must hold num_classes entries; it is overwritten.
    void gather(std::size_t voxel, double* field) const {
        std::fill(field, field + num_classes_, 0.0);
        const Vec3 x = spec_.center_unchecked(spec_.unflatten(voxel));
        if (index_) {
            for (std::uint32_t i : index_->candidates_at(x)) {
                accumulate(kernels_[i], x, field);
            }
        } else {
            for (const auto& k : kernels_) {
                accumulate(k, x, field);
            }
        }
    }

private:
    void accumulate(const GaussianKernel& k, const Vec3& x, double* field) const {
        const double m2 = k.mahalanobis_sq(x);
        if (m2 > cut2_) {
            return;
        }
        const double d = std::exp(-0.5 * m2);
        for (int c = 0; c < num_classes_; ++c) {
            field[c] += k.probs[c] * d;
        }
    }

    GridSpec spec_;
    std::vector<GaussianKernel> kernels_;
    std::optional<SpatialIndex> index_;
    double cut2_;
    int num_classes_;
};

std::uint8_t label_of(const double* field, int c, double empty_evidence) {
    double total = 0.0;
    for (int k = 0; k < c; ++k) {
        total += field[k];
    }
    if (total < empty_evidence) {
        return kEmpty;
    }
    int best = 0;
    for (int k = 1; k < c; ++k) {
        if (field[k] > field[best]) {
            best = k;
        }
    }
    return static_cast<std::uint8_t>(best);
}

// Per-voxel loss and upstream gradient g_c = dL/dF_c (already divided by M).
struct VoxelTerms {
    std::vector<double> loss;      // per voxel, unscaled
    std::vector<double> upstream;  // voxel-major, C per voxel
    double mean_loss = 0.0;
};

VoxelTerms voxel_terms(const FieldGatherer& gatherer, const OccupancyGrid& target,
                       const SplatParams& params, bool with_upstream) {
    const std::size_t m = target.spec.num_voxels();
    const int c = params.cfg.num_classes;
    const double eps = params.cfg.empty_evidence;
    const double inv_m = 1.0 / static_cast<double>(m);

    VoxelTerms out;
    out.loss.assign(m, 0.0);
    if (with_upstream) {
        out.upstream.assign(m * c, 0.0);
    }
    parallel_for(m, resolve_workers(params.num_workers), [&](std::size_t b, std::size_t e, int) {
        std::vector<double> field(c);
        for (std::size_t v = b; v < e; ++v) {
            gatherer.gather(v, field.data());
            double total = 0.0;
            for (int k = 0; k < c; ++k) {
                total += field[k];
            }
            const double z = total + eps;
            const std::uint8_t t = target.labels[v];
            const double p = (t == kEmpty) ? eps / z : field[t] / z;
            out.loss[v] = -std::log(std::max(p, kProbabilityFloor));
            if (!with_upstream || p < kProbabilityFloor) {
                continue;
            }
            double* g = &out.upstream[v * c];
            for (int k = 0; k < c; ++k) {
                g[k] = inv_m / z;
            }
            if (t != kEmpty) {
                g[t] -= inv_m / field[t];
            }
        }
    });
    double sum = 0.0;
    for (double l : out.loss) {
        sum += l;
    }
    out.mean_loss = sum * inv_m;
    return out;
}

void check_target(const OccupancyGrid& target, const SplatParams& params) {
    target.validate();
    if (target.num_classes != params.cfg.num_classes) {
        throw std::invalid_argument("occupancy loss: target class count does not match params");
    }
}

} // namespace

SplatResult splat(const GaussianScene& scene, const GridSpec& spec, const SplatParams& params) {
    check_inputs(scene, spec, params);
    const FieldGatherer gatherer(scene, spec, params);
    const int c = params.cfg.num_classes;
    const std::size_t m = spec.num_voxels();

    SplatResult out;
    out.grid = OccupancyGrid(spec, c);
    if (params.store_fields) {
        out.fields.assign(m * c, 0.0);
    }
    parallel_for(m, resolve_workers(params.num_workers), [&](std::size_t b, std::size_t e, int) {
        std::vector<double> local(c);
        for (std::size_t v = b; v < e; ++v) {
            double* field = params.store_fields ? &out.fields[v * c] : local.data();
            gatherer.gather(v, field);
            out.grid.labels[v] = label_of(field, c, params.cfg.empty_evidence);
        }
    });
    return out;
}

double occupancy_loss(const GaussianScene& scene, const OccupancyGrid& target,
                      const SplatParams& params) {
    check_inputs(scene, target.spec, params);
    check_target(target, params);
    const FieldGatherer gatherer(scene, target.spec, params);
    return voxel_terms(gatherer, target, params, false).mean_loss;
}

Eigen::Vector4d rotation_matrix_grad_to_quat(const Mat3& g, const Quat& q) {
    const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
    Eigen::Vector4d d;
    d[0] = 2.0 * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) + x * g(2, 1));
    d[1] = 2.0 * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2.0 * x * g(1, 1) - w * g(1, 2) +
                  z * g(2, 0) + w * g(2, 1) - 2.0 * x * g(2, 2));
    d[2] = 2.0 * (-2.0 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) + z * g(1, 2) -
                  w * g(2, 0) + z * g(2, 1) - 2.0 * y * g(2, 2));
    d[3] = 2.0 * (-2.0 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) -
                  2.0 * z * g(1, 1) + y * g(1, 2) + x * g(2, 0) + y * g(2, 1));
    const Eigen::Vector4d qv(w, x, y, z);
    return d - d.dot(qv) * qv;
}

GaussianGrads occupancy_loss_and_grads(const GaussianScene& scene, const OccupancyGrid& target,
                                       const SplatParams& params, const GradRequest& request) {
    check_inputs(scene, target.spec, params);
    check_target(target, params);
    const FieldGatherer gatherer(scene, target.spec, params);
    const VoxelTerms terms = voxel_terms(gatherer, target, params, true);

    const GridSpec& spec = target.spec;
    const int c = params.cfg.num_classes;
    const std::size_t n = scene.size();
    const auto& kernels = gatherer.kernels();
    const double cut2 = gatherer.cut2();

    GaussianGrads out;
    out.loss_value = terms.mean_loss;
    out.d_mean.assign(n, Vec3::Zero());
    out.d_log_scale.assign(n, Vec3::Zero());
    out.d_logits.assign(n, VecX::Zero(c));
    out.d_rotation.assign(n, Eigen::Vector4d::Zero());

    parallel_for(n, resolve_workers(params.num_workers), [&](std::size_t b, std::size_t e, int) {
        VecX dprob(c);
        for (std::size_t i = b; i < e; ++i) {
            const GaussianKernel& k = kernels[i];
            const double r = kappa_radius(scene.gaussians[i], params.cfg.mahalanobis_cutoff);
            Index3 lo = spec.voxel_of(k.mean - Vec3::Constant(r));
            Index3 hi = spec.voxel_of(k.mean + Vec3::Constant(r));
            bool outside = false;
            for (int a = 0; a < 3; ++a) {
                lo[a] = std::max(lo[a], 0);
                hi[a] = std::min(hi[a], spec.dims[a] - 1);
                outside = outside || lo[a] > hi[a];
            }
            if (outside) {
                continue;
            }
            dprob.setZero();
            Vec3 dmean = Vec3::Zero();
            Vec3 dls = Vec3::Zero();
            Mat3 drot = Mat3::Zero();
            for (int vz = lo[2]; vz <= hi[2]; ++vz) {
                for (int vy = lo[1]; vy <= hi[1]; ++vy) {
                    for (int vx = lo[0]; vx <= hi[0]; ++vx) {
                        const Index3 ijk{vx, vy, vz};
                        const Vec3 x = spec.center_unchecked(ijk);
                        const double m2 = k.mahalanobis_sq(x);
                        if (m2 > cut2) {
                            continue;
                        }
                        const double dens = std::exp(-0.5 * m2);
                        const double* g = &terms.upstream[spec.flat_index(ijk) * c];
                        double h = 0.0;
                        for (int cc = 0; cc < c; ++cc) {
                            dprob[cc] += g[cc] * dens;
                            h += g[cc] * k.probs[cc];
                        }
                        const double hk = h * dens;
                        if (hk == 0.0) {
                            continue;
                        }
                        const Vec3 d = x - k.mean;
                        const Vec3 y = k.rotation.transpose() * d;
                        const Vec3 dy = y.cwiseProduct(k.inv_variance);
                        if (request.mean) {
                            dmean += hk * (k.rotation * dy);
                        }
                        if (request.log_scale) {
                            dls += hk * y.cwiseProduct(dy);
                        }
                        if (request.rotation) {
                            drot -= hk * d * dy.transpose();
                        }
                    }
                }
            }
            if (request.mean) {
                out.d_mean[i] = dmean;
            }
            if (request.log_scale) {
                out.d_log_scale[i] = dls;
            }
            if (request.logits) {
                const double avg = k.probs.dot(dprob);
                out.d_logits[i] = k.probs.cwiseProduct(dprob - VecX::Constant(c, avg));
            }
            if (request.rotation) {
                out.d_rotation[i] =
                    rotation_matrix_grad_to_quat(drot, scene.gaussians[i].rotation());
            }
        }
    });
    return out;
}

} // namespace gad
