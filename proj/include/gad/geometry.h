// Copyright Contributors to the GaussAD Project
// SPDX-License-Identifier: Apache-2.0
//
// Planar rigid-body helpers shared by the flow, planning, metrics and
// synthetic-scene code.

#pragma once

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <numbers>

namespace gad {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double r = std::fmod(a, two_pi);
    if (r <= -std::numbers::pi) {
        r += two_pi;
    } else if (r > std::numbers::pi) {
        r -= two_pi;
    }
    return r;
}

inline Mat2 rot2(double yaw) {
    const double c = std::cos(yaw);
    const double s = std::sin(yaw);
    Mat2 r;
    r << c, -s, s, c;
    return r;
}

/// SE(2) pose (x, y, yaw). Used for ego waypoints and scene frame tags.
struct Pose2 {
    double x = 0.0;
    double y = 0.0;
    double yaw = 0.0;

    Vec2 translation() const { return {x, y}; }

    bool operator==(const Pose2&) const = default;
};

/// Builds a pose with yaw wrapped to (-pi, pi].
inline Pose2 make_pose(double x, double y, double yaw) { return {x, y, wrap_angle(yaw)}; }

/// Pose of `b` (expressed in the frame of `a`) re-expressed in the parent
/// frame of `a`: t = t_a + R(yaw_a) t_b, yaw = wrap(yaw_a + yaw_b).
inline Pose2 compose(const Pose2& a, const Pose2& b) {
    const Vec2 t = a.translation() + rot2(a.yaw) * b.translation();
    return make_pose(t.x(), t.y(), a.yaw + b.yaw);
}

inline Pose2 inverse(const Pose2& p) {
    const Vec2 t = -(rot2(-p.yaw) * p.translation());
    return make_pose(t.x(), t.y(), -p.yaw);
}

/// Maps a point from the frame of `p` into its parent frame.
inline Vec2 to_parent(const Pose2& p, const Vec2& local) {
    return rot2(p.yaw) * local + p.translation();
}

/// Maps a parent-frame point into the frame of `p`.
inline Vec2 to_local(const Pose2& p, const Vec2& world) {
    return rot2(-p.yaw) * (world - p.translation());
}

/// Oriented rectangle in the plane: center pose plus full length (along
/// the pose's x axis) and width.
struct OrientedRect {
    Pose2 pose;
    double length = 0.0;
    double width = 0.0;

    bool contains(const Vec2& p) const {
        const Vec2 l = to_local(pose, p);
        return std::abs(l.x()) <= 0.5 * length && std::abs(l.y()) <= 0.5 * width;
    }

    std::array<Vec2, 4> corners() const {
        const double hl = 0.5 * length;
        const double hw = 0.5 * width;
        return {to_parent(pose, {hl, hw}), to_parent(pose, {-hl, hw}),
                to_parent(pose, {-hl, -hw}), to_parent(pose, {hl, -hw})};
    }
};

/// Separating-axis overlap test for two oriented rectangles. Touching
/// edges count as overlap.
inline bool overlaps(const OrientedRect& a, const OrientedRect& b) {
    const auto ca = a.corners();
    const auto cb = b.corners();
    const std::array<Vec2, 4> axes = {rot2(a.pose.yaw).col(0), rot2(a.pose.yaw).col(1),
                                      rot2(b.pose.yaw).col(0), rot2(b.pose.yaw).col(1)};
    for (const Vec2& axis : axes) {
        double amin = ca[0].dot(axis), amax = amin;
        double bmin = cb[0].dot(axis), bmax = bmin;
        for (int i = 1; i < 4; ++i) {
            const double pa = ca[i].dot(axis);
            const double pb = cb[i].dot(axis);
            amin = std::min(amin, pa);
            amax = std::max(amax, pa);
            bmin = std::min(bmin, pb);
            bmax = std::max(bmax, pb);
        }
        if (amax < bmin || bmax < amin) {
            return false;
        }
    }
    return true;
}

} // namespace gad
