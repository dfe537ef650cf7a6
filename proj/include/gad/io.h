// Copyright Contributors to the GaussAD Project
// SPDX-License-Identifier: Apache-2.0
//
// File formats. Scenes and configs are JSON; grids and flows are
// little-endian binary (layouts in docs/formats.md); trajectories are CSV.
// Every loader throws FormatError on malformed or unsupported input.

#pragma once

#include "gad/core.h"
#include "gad/flow.h"
#include "gad/grid.h"
#include "gad/plan.h"
#include "gad/synth.h"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace gad {

inline constexpr int kFormatVersion = 1;

std::string scene_to_json(const GaussianScene& scene);
GaussianScene scene_from_json(const std::string& text);
void save_scene(const std::filesystem::path& path, const GaussianScene& scene);
GaussianScene load_scene(const std::filesystem::path& path);

std::vector<std::uint8_t> grid_to_bytes(const OccupancyGrid& grid);
OccupancyGrid grid_from_bytes(const std::vector<std::uint8_t>& bytes);
void save_grid(const std::filesystem::path& path, const OccupancyGrid& grid);
OccupancyGrid load_grid(const std::filesystem::path& path);

/// Displacements are stored as f32; saving rounds to nearest.
std::vector<std::uint8_t> flows_to_bytes(const FlowField& flows);
/// With expected_gaussians set, a different N is an error.
FlowField flows_from_bytes(const std::vector<std::uint8_t>& bytes,
                           std::optional<std::size_t> expected_gaussians = {});
void save_flows(const std::filesystem::path& path, const FlowField& flows);
FlowField load_flows(const std::filesystem::path& path,
                     std::optional<std::size_t> expected_gaussians = {});

/// Header "step,x,y,psi"; steps numbered from 1.
std::string trajectory_to_csv(const Trajectory& t);
Trajectory trajectory_from_csv(const std::string& text, double dt = 0.5);
void save_trajectory(const std::filesystem::path& path, const Trajectory& t);
Trajectory load_trajectory(const std::filesystem::path& path, double dt = 0.5);

GridSpec grid_spec_from_json(const std::string& text);
std::string grid_spec_to_json(const GridSpec& spec);

/// Unknown keys are rejected so that typos surface as errors.
ScenarioConfig scenario_config_from_json(const std::string& text);
std::string scenario_config_to_json(const ScenarioConfig& cfg);
PlannerConfig planner_config_from_json(const std::string& text);

/// Directory bundle: scenario.json (config, ego, boxes, map) plus
/// grid_<k>.occ (ego frame) and anchor_<k>.occ (world frame) per step.
void save_scenario(const std::filesystem::path& dir, const Scenario& s);
Scenario load_scenario(const std::filesystem::path& dir);

std::string read_text(const std::filesystem::path& path);
/// Throws std::runtime_error naming the path on I/O failure.
void write_text(const std::filesystem::path& path, const std::string& text);
std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

} // namespace gad
