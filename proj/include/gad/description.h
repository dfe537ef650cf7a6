// Copyright Contributors to the GaussAD Project
// SPDX-License-Identifier: Apache-2.0
//
// Structured scene descriptions: agent boxes, map polylines, agent motions
// and an optional occupancy grid.

#pragma once

#include "gad/geometry.h"
#include "gad/grid.h"

#include <optional>
#include <string>
#include <vector>

namespace gad {

struct Box {
    Vec3 center = Vec3::Zero();
    Vec3 size = Vec3::Ones();  // length (heading axis), width, height
    double yaw = 0.0;
    int class_id = 0;

    OrientedRect footprint() const { return {{center.x(), center.y(), yaw}, size.x(), size.y()}; }
    /// Inclusive point-in-box test.
    bool contains(const Vec3& p) const;
    bool operator==(const Box&) const = default;
};

enum class MapCategory { Divider, Boundary, Crossing };

const char* to_string(MapCategory c);
/// Throws std::invalid_argument for unknown names.
MapCategory map_category_from_string(const std::string& s);

struct Polyline {
    MapCategory category = MapCategory::Divider;
    std::vector<Vec2> points;

    bool operator==(const Polyline&) const = default;
};

struct SceneDescription {
    std::vector<Box> boxes;
    std::vector<Polyline> map;
    /// Future 2D waypoints per box (same order as boxes); may be empty.
    std::vector<std::vector<Vec2>> motions;
    std::optional<OccupancyGrid> occupancy;

    /// Positive sizes, >= 2 points per polyline, motions sized like boxes.
    void validate() const;
};

} // namespace gad
