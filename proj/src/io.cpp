// Copyright Contributors to the GaussAD Project
// SPDX-License-Identifier: Apache-2.0

#include "gad/io.h"

#include "gad/error.h"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

namespace gad {

using json = nlohmann::json;

// ---- plain files -----------------------------------------------------------

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out || !out.write(text.data(), static_cast<std::streamsize>(text.size()))) {
        throw std::runtime_error("cannot write " + path.string());
    }
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
    const std::string s = read_text(path);
    return {s.begin(), s.end()};
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    write_text(path, std::string(bytes.begin(), bytes.end()));
}

// ---- binary helpers --------------------------------------------------------

namespace {

template <typename T>
T to_little(T v) {
    if constexpr (std::endian::native == std::endian::big) {
        auto* p = reinterpret_cast<unsigned char*>(&v);
        std::reverse(p, p + sizeof(T));
    }
    return v;
}

class Writer {
public:
    template <typename T>
    void put(T v) {
        v = to_little(v);
        const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
        out.insert(out.end(), p, p + sizeof(T));
    }
    void raw(const void* data, std::size_t n) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        out.insert(out.end(), p, p + n);
    }
    std::vector<std::uint8_t> out;
};

class Reader {
public:
    Reader(const std::vector<std::uint8_t>& b, const char* what) : bytes(b), kind(what) {}

    template <typename T>
    T get(const char* field) {
        need(sizeof(T), field);
        T v;
        std::memcpy(&v, bytes.data() + pos, sizeof(T));
        pos += sizeof(T);
        return to_little(v);
    }
    void need(std::size_t n, const char* field) const {
        if (bytes.size() - pos < n) {
            throw FormatError(std::string(kind) + ": truncated at byte offset " +
                              std::to_string(pos) + " reading " + field + " (need " +
                              std::to_string(n) + " bytes, have " +
                              std::to_string(bytes.size() - pos) + ")");
        }
    }
    void magic(const char (&m)[5]) {
        need(4, "magic");
        if (std::memcmp(bytes.data(), m, 4) != 0) {
            throw FormatError(std::string(kind) + ": bad magic at byte offset 0 (expected \"" + m +
                              "\")");
        }
        pos = 4;
    }
    void version() {
        const std::size_t at = pos;
        const auto v = get<std::uint32_t>("version");
        if (v != kFormatVersion) {
            throw FormatError(std::string(kind) + ": unsupported version " + std::to_string(v) +
                              " at byte offset " + std::to_string(at));
        }
    }
    void finish() const {
        if (pos != bytes.size()) {
            throw FormatError(std::string(kind) + ": " + std::to_string(bytes.size() - pos) +
                              " trailing bytes at byte offset " + std::to_string(pos));
        }
    }

    const std::vector<std::uint8_t>& bytes;
    const char* kind;
    std::size_t pos = 0;
};

} // namespace

// ---- grid ------------------------------------------------------------------

std::vector<std::uint8_t> grid_to_bytes(const OccupancyGrid& grid) {
    grid.validate();
    Writer w;
    w.raw("OCCG", 4);
    w.put<std::uint32_t>(kFormatVersion);
    for (int a = 0; a < 3; ++a) w.put<double>(grid.spec.origin[a]);
    for (int a = 0; a < 3; ++a) w.put<std::uint32_t>(static_cast<std::uint32_t>(grid.spec.dims[a]));
    w.put<double>(grid.spec.voxel_size);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(grid.num_classes));
    w.raw(grid.labels.data(), grid.labels.size());
    return std::move(w.out);
}

OccupancyGrid grid_from_bytes(const std::vector<std::uint8_t>& bytes) {
    Reader r(bytes, "grid");
    r.magic("OCCG");
    r.version();
    GridSpec spec;
    for (int a = 0; a < 3; ++a) spec.origin[a] = r.get<double>("origin");
    const std::size_t dims_at = r.pos;
    for (int a = 0; a < 3; ++a) {
        const auto d = r.get<std::uint32_t>("dims");
        if (d == 0 || d > 0x7fffffffu) {
            throw FormatError("grid: invalid dimension " + std::to_string(d) + " at byte offset " +
                              std::to_string(dims_at + 4 * a));
        }
        spec.dims[a] = static_cast<int>(d);
    }
    spec.voxel_size = r.get<double>("voxel_size");
    const std::size_t classes_at = r.pos;
    const auto c = r.get<std::uint32_t>("class count");
    if (c == 0 || c > 255) {
        throw FormatError("grid: class count " + std::to_string(c) + " at byte offset " +
                          std::to_string(classes_at) + " outside 1..255");
    }
    try {
        spec.validate();
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("grid: ") + e.what());
    }
    OccupancyGrid g(spec, static_cast<int>(c));
    r.need(g.labels.size(), "labels");
    for (std::size_t v = 0; v < g.labels.size(); ++v) {
        const std::uint8_t l = bytes[r.pos + v];
        if (l != kEmpty && l >= c) {
            throw FormatError("grid: label " + std::to_string(l) + " at byte offset " +
                              std::to_string(r.pos + v) + " exceeds class count");
        }
        g.labels[v] = l;
    }
    r.pos += g.labels.size();
    r.finish();
    return g;
}

void save_grid(const std::filesystem::path& path, const OccupancyGrid& grid) {
    write_bytes(path, grid_to_bytes(grid));
}

OccupancyGrid load_grid(const std::filesystem::path& path) {
    return grid_from_bytes(read_bytes(path));
}

// ---- flows -----------------------------------------------------------------

std::vector<std::uint8_t> flows_to_bytes(const FlowField& flows) {
    flows.validate();
    Writer w;
    w.raw("GFLW", 4);
    w.put<std::uint32_t>(kFormatVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(flows.num_steps()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(flows.num_gaussians()));
    for (const auto& step : flows.steps) {
        for (const Vec3& d : step) {
            for (int a = 0; a < 3; ++a) w.put<float>(static_cast<float>(d[a]));
        }
    }
    return std::move(w.out);
}

FlowField flows_from_bytes(const std::vector<std::uint8_t>& bytes,
                           std::optional<std::size_t> expected_gaussians) {
    Reader r(bytes, "flows");
    r.magic("GFLW");
    r.version();
    const auto f = r.get<std::uint32_t>("F");
    const std::size_t n_at = r.pos;
    const auto n = r.get<std::uint32_t>("N");
    if (expected_gaussians && *expected_gaussians != n) {
        throw FormatError("flows: N = " + std::to_string(n) + " at byte offset " +
                          std::to_string(n_at) + " but the scene has " +
                          std::to_string(*expected_gaussians) + " Gaussians");
    }
    r.need(std::size_t{12} * f * n, "displacements");
    FlowField out = FlowField::zeros(f, n);
    for (auto& step : out.steps) {
        for (Vec3& d : step) {
            for (int a = 0; a < 3; ++a) {
                const std::size_t at = r.pos;
                const float v = r.get<float>("displacement");
                if (!std::isfinite(v)) {
                    throw FormatError("flows: non-finite value at byte offset " + std::to_string(at));
                }
                d[a] = v;
            }
        }
    }
    r.finish();
    return out;
}

void save_flows(const std::filesystem::path& path, const FlowField& flows) {
    write_bytes(path, flows_to_bytes(flows));
}

FlowField load_flows(const std::filesystem::path& path,
                     std::optional<std::size_t> expected_gaussians) {
    return flows_from_bytes(read_bytes(path), expected_gaussians);
}

// ---- trajectory ------------------------------------------------------------

namespace {

std::string fmt17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(line);
    while (std::getline(is, cur, sep)) out.push_back(cur);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

double parse_number(const std::string& s, const std::string& where) {
    const std::string t = trim(s);
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (t.empty() || end != t.c_str() + t.size() || !std::isfinite(v)) {
        throw FormatError(where + ": not a finite number '" + t + "'");
    }
    return v;
}

} // namespace

std::string trajectory_to_csv(const Trajectory& t) {
    std::string out = "step,x,y,psi\n";
    for (std::size_t k = 0; k < t.size(); ++k) {
        const auto& w = t.waypoints[k];
        out += std::to_string(k + 1) + ',' + fmt17(w.x) + ',' + fmt17(w.y) + ',' + fmt17(w.yaw) + '\n';
    }
    return out;
}

Trajectory trajectory_from_csv(const std::string& text, double dt) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line)) {
        throw FormatError("trajectory: empty file");
    }
    const auto header = split(trim(line), ',');
    const char* names[] = {"step", "x", "y", "psi"};
    int col[4];
    for (int c = 0; c < 4; ++c) {
        col[c] = -1;
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (trim(header[i]) == names[c]) col[c] = static_cast<int>(i);
        }
        if (col[c] < 0) {
            throw FormatError(std::string("trajectory: missing column '") + names[c] + "'");
        }
    }
    Trajectory t;
    t.dt = dt;
    int row = 1;
    while (std::getline(is, line)) {
        ++row;
        if (trim(line).empty()) continue;
        const auto cells = split(line, ',');
        if (cells.size() != header.size()) {
            throw FormatError("trajectory: line " + std::to_string(row) + " has " +
                              std::to_string(cells.size()) + " fields, expected " +
                              std::to_string(header.size()));
        }
        const std::string where = "trajectory line " + std::to_string(row);
        const double step = parse_number(cells[col[0]], where + " column 'step'");
        if (step != static_cast<double>(t.size() + 1)) {
            throw FormatError(where + ": step " + trim(cells[col[0]]) + " out of sequence");
        }
        const double psi = parse_number(cells[col[3]], where + " column 'psi'");
        t.waypoints.push_back({parse_number(cells[col[1]], where + " column 'x'"),
                               parse_number(cells[col[2]], where + " column 'y'"),
                               wrap_angle(psi)});
    }
    if (t.size() == 0) {
        throw FormatError("trajectory: no waypoints");
    }
    return t;
}

void save_trajectory(const std::filesystem::path& path, const Trajectory& t) {
    write_text(path, trajectory_to_csv(t));
}

Trajectory load_trajectory(const std::filesystem::path& path, double dt) {
    return trajectory_from_csv(read_text(path), dt);
}

// ---- JSON helpers ----------------------------------------------------------

namespace {

class Obj {
public:
    Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail("expected an object");
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw FormatError((path_.empty() ? std::string("document") : path_) + ": " + msg);
    }
    std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    bool has(const std::string& key) const {
        seen_.insert(key);
        return j_.contains(key);
    }
    const json& at(const std::string& key) const {
        if (!has(key)) throw FormatError(sub(key) + ": missing");
        return j_.at(key);
    }
    double num(const std::string& key) const { return number(at(key), sub(key)); }
    double num(const std::string& key, double def) const { return has(key) ? num(key) : def; }
    long integer(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_number_integer()) throw FormatError(sub(key) + ": expected an integer");
        return v.get<long>();
    }
    long integer(const std::string& key, long def) const { return has(key) ? integer(key) : def; }
    bool boolean(const std::string& key, bool def) const {
        if (!has(key)) return def;
        if (!j_.at(key).is_boolean()) throw FormatError(sub(key) + ": expected a boolean");
        return j_.at(key).get<bool>();
    }
    std::string str(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_string()) throw FormatError(sub(key) + ": expected a string");
        return v.get<std::string>();
    }
    std::vector<double> nums(const std::string& key, std::size_t n = 0) const {
        return numbers(at(key), sub(key), n);
    }
    /// Rejects keys that were never looked up.
    void done() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key())) {
                throw FormatError(sub(it.key()) + ": unknown key");
            }
        }
    }

    static double number(const json& v, const std::string& where) {
        if (!v.is_number()) throw FormatError(where + ": expected a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) throw FormatError(where + ": not finite");
        return d;
    }
    static std::vector<double> numbers(const json& v, const std::string& where, std::size_t n) {
        if (!v.is_array()) throw FormatError(where + ": expected an array");
        if (n && v.size() != n) {
            throw FormatError(where + ": expected " + std::to_string(n) + " numbers, got " +
                              std::to_string(v.size()));
        }
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            out.push_back(number(v[i], where + "[" + std::to_string(i) + "]"));
        }
        return out;
    }

private:
    const json& j_;
    std::string path_;
    mutable std::set<std::string> seen_;
};

json parse(const std::string& text, const char* what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string(what) + ": malformed JSON (" + e.what() + ")");
    }
}

Vec3 vec3(const std::vector<double>& v) { return {v[0], v[1], v[2]}; }
json arr(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

void check_header(const Obj& o, const char* format) {
    if (o.str("format") != format) {
        o.fail(std::string("format is not \"") + format + "\"");
    }
    const long v = o.integer("version");
    if (v != kFormatVersion) {
        throw FormatError("unsupported version " + std::to_string(v));
    }
}

json grid_spec_json(const GridSpec& s) {
    return {{"origin", arr(s.origin)},
            {"dims", json::array({s.dims[0], s.dims[1], s.dims[2]})},
            {"voxel_size", s.voxel_size}};
}

GridSpec grid_spec_of(const json& j, const std::string& path) {
    Obj o(j, path);
    GridSpec s;
    s.origin = vec3(o.nums("origin", 3));
    const json& d = o.at("dims");
    if (!d.is_array() || d.size() != 3) throw FormatError(o.sub("dims") + ": expected 3 integers");
    for (int a = 0; a < 3; ++a) {
        if (!d[a].is_number_integer()) throw FormatError(o.sub("dims") + ": expected integers");
        s.dims[a] = d[a].get<int>();
    }
    s.voxel_size = o.num("voxel_size");
    o.done();
    try {
        s.validate();
    } catch (const std::invalid_argument& e) {
        o.fail(e.what());
    }
    return s;
}

std::vector<int> ints(const Obj& o, const std::string& key, std::vector<int> def) {
    if (!o.has(key)) return def;
    const json& v = o.at(key);
    if (!v.is_array()) throw FormatError(o.sub(key) + ": expected an array of integers");
    std::vector<int> out;
    for (const auto& e : v) {
        if (!e.is_number_integer()) throw FormatError(o.sub(key) + ": expected integers");
        out.push_back(e.get<int>());
    }
    return out;
}

json box_json(const Box& b) {
    return {{"center", arr(b.center)}, {"size", arr(b.size)}, {"yaw", b.yaw}, {"class_id", b.class_id}};
}

Box box_of(const json& j, const std::string& path) {
    Obj o(j, path);
    Box b;
    b.center = vec3(o.nums("center", 3));
    b.size = vec3(o.nums("size", 3));
    b.yaw = o.num("yaw");
    b.class_id = static_cast<int>(o.integer("class_id"));
    o.done();
    return b;
}

template <typename Fn>
void wrap_invalid(const std::string& where, Fn&& fn) {
    try {
        fn();
    } catch (const std::invalid_argument& e) {
        throw FormatError(where + ": " + e.what());
    }
}

} // namespace

// ---- scene -----------------------------------------------------------------

std::string scene_to_json(const GaussianScene& scene) {
    scene.validate();
    json g = json::array();
    for (const auto& s : scene.gaussians) {
        const Quat& q = s.rotation();
        json logits = json::array();
        for (Eigen::Index c = 0; c < s.logits().size(); ++c) logits.push_back(s.logits()[c]);
        g.push_back({{"mu", arr(s.mean())},
                     {"log_scale", arr(s.log_scale())},
                     {"quat", json::array({q.w(), q.x(), q.y(), q.z()})},
                     {"logits", logits}});
    }
    const json doc = {{"format", "gauss-scene"},
                      {"version", kFormatVersion},
                      {"class_names", scene.class_names},
                      {"frame_pose",
                       {{"x", scene.frame_pose.x}, {"y", scene.frame_pose.y}, {"yaw", scene.frame_pose.yaw}}},
                      {"timestamp_index", scene.timestamp_index},
                      {"gaussians", g}};
    return doc.dump(1) + "\n";
}

GaussianScene scene_from_json(const std::string& text) {
    const json doc = parse(text, "scene");
    Obj o(doc, "");
    check_header(o, "gauss-scene");
    GaussianScene s;
    const json& names = o.at("class_names");
    if (!names.is_array() || names.empty()) throw FormatError("class_names: expected a non-empty array");
    for (const auto& n : names) {
        if (!n.is_string()) throw FormatError("class_names: expected strings");
        s.class_names.push_back(n.get<std::string>());
    }
    if (o.has("frame_pose")) {
        Obj p(o.at("frame_pose"), "frame_pose");
        s.frame_pose = {p.num("x"), p.num("y"), p.num("yaw")};
        p.done();
    }
    s.timestamp_index = static_cast<int>(o.integer("timestamp_index", 0));
    const json& gs = o.at("gaussians");
    if (!gs.is_array()) throw FormatError("gaussians: expected an array");
    const std::size_t c = s.class_names.size();
    for (std::size_t i = 0; i < gs.size(); ++i) {
        const std::string path = "gaussians[" + std::to_string(i) + "]";
        Obj g(gs[i], path);
        const Vec3 mu = vec3(g.nums("mu", 3));
        const Vec3 ls = vec3(g.nums("log_scale", 3));
        const auto q = g.nums("quat", 4);
        const auto lg = g.nums("logits");
        if (lg.size() != c) {
            throw FormatError(path + ".logits: length " + std::to_string(lg.size()) +
                              " but the scene has " + std::to_string(c) + " classes");
        }
        g.done();
        VecX logits(static_cast<Eigen::Index>(c));
        for (std::size_t k = 0; k < c; ++k) logits[k] = lg[k];
        wrap_invalid(path, [&] { s.gaussians.emplace_back(mu, ls, Quat(q[0], q[1], q[2], q[3]), logits); });
    }
    o.done();
    return s;
}

void save_scene(const std::filesystem::path& path, const GaussianScene& scene) {
    write_text(path, scene_to_json(scene));
}

GaussianScene load_scene(const std::filesystem::path& path) {
    return scene_from_json(read_text(path));
}

// ---- configs ---------------------------------------------------------------

GridSpec grid_spec_from_json(const std::string& text) {
    return grid_spec_of(parse(text, "grid spec"), "");
}

std::string grid_spec_to_json(const GridSpec& spec) { return grid_spec_json(spec).dump() + "\n"; }

namespace {

ScenarioConfig scenario_config_of(const json& j, const std::string& path) {
    Obj o(j, path);
    ScenarioConfig c;
    c.seed = static_cast<std::uint64_t>(o.integer("seed", 0));
    c.grid = grid_spec_of(o.at("grid"), o.sub("grid"));
    c.steps = static_cast<int>(o.integer("steps", c.steps));
    c.dt = o.num("dt", c.dt);
    if (o.has("layout")) {
        Obj l(o.at("layout"), o.sub("layout"));
        auto& L = c.layout;
        L.ground = l.boolean("ground", L.ground);
        L.ground_thickness = l.num("ground_thickness", L.ground_thickness);
        L.corridor_width = l.num("corridor_width", L.corridor_width);
        L.wall_thickness = l.num("wall_thickness", L.wall_thickness);
        L.wall_height = l.num("wall_height", L.wall_height);
        L.drivable_class = static_cast<int>(l.integer("drivable_class", L.drivable_class));
        L.wall_class = static_cast<int>(l.integer("wall_class", L.wall_class));
        l.done();
    }
    if (o.has("agents")) {
        const json& as = o.at("agents");
        if (!as.is_array()) throw FormatError(o.sub("agents") + ": expected an array");
        for (std::size_t i = 0; i < as.size(); ++i) {
            Obj a(as[i], o.sub("agents") + "[" + std::to_string(i) + "]");
            AgentSpec s;
            s.class_id = static_cast<int>(a.integer("class_id", s.class_id));
            const auto p = a.nums("pose", 3);
            s.pose = {p[0], p[1], wrap_angle(p[2])};
            if (a.has("size")) s.size = vec3(a.nums("size", 3));
            s.speed = a.num("speed", 0.0);
            s.yaw_rate = a.num("yaw_rate", 0.0);
            a.done();
            c.agents.push_back(s);
        }
    }
    c.random_agents = static_cast<int>(o.integer("random_agents", 0));
    c.ego_speed = o.num("ego_speed", c.ego_speed);
    c.ego_curvature = o.num("ego_curvature", c.ego_curvature);
    if (o.has("class_names")) {
        c.class_names.clear();
        const json& n = o.at("class_names");
        if (!n.is_array()) throw FormatError(o.sub("class_names") + ": expected an array");
        for (const auto& e : n) {
            if (!e.is_string()) throw FormatError(o.sub("class_names") + ": expected strings");
            c.class_names.push_back(e.get<std::string>());
        }
    }
    c.dynamic_class_ids = ints(o, "dynamic_class_ids", c.dynamic_class_ids);
    o.done();
    wrap_invalid(path.empty() ? "scenario config" : path, [&] { c.validate(); });
    return c;
}

json scenario_config_json(const ScenarioConfig& c) {
    json agents = json::array();
    for (const auto& a : c.agents) {
        agents.push_back({{"class_id", a.class_id},
                          {"pose", json::array({a.pose.x, a.pose.y, a.pose.yaw})},
                          {"size", arr(a.size)},
                          {"speed", a.speed},
                          {"yaw_rate", a.yaw_rate}});
    }
    const auto& L = c.layout;
    return {{"seed", c.seed},
            {"grid", grid_spec_json(c.grid)},
            {"steps", c.steps},
            {"dt", c.dt},
            {"layout",
             {{"ground", L.ground},
              {"ground_thickness", L.ground_thickness},
              {"corridor_width", L.corridor_width},
              {"wall_thickness", L.wall_thickness},
              {"wall_height", L.wall_height},
              {"drivable_class", L.drivable_class},
              {"wall_class", L.wall_class}}},
            {"agents", agents},
            {"random_agents", c.random_agents},
            {"ego_speed", c.ego_speed},
            {"ego_curvature", c.ego_curvature},
            {"class_names", c.class_names},
            {"dynamic_class_ids", c.dynamic_class_ids}};
}

} // namespace

ScenarioConfig scenario_config_from_json(const std::string& text) {
    return scenario_config_of(parse(text, "scenario config"), "");
}

std::string scenario_config_to_json(const ScenarioConfig& cfg) {
    return scenario_config_json(cfg).dump(1) + "\n";
}

PlannerConfig planner_config_from_json(const std::string& text) {
    const json doc = parse(text, "planner config");
    Obj o(doc, "");
    PlannerConfig c;
    c.num_candidates = static_cast<std::size_t>(o.integer("num_candidates", 0));
    c.steps = static_cast<std::size_t>(o.integer("steps", static_cast<long>(c.steps)));
    c.dt = o.num("dt", c.dt);
    if (o.has("speeds")) c.speeds = o.nums("speeds");
    if (o.has("curvatures")) c.curvatures = o.nums("curvatures");
    if (o.has("footprint")) {
        Obj f(o.at("footprint"), "footprint");
        c.footprint.length = f.num("length", c.footprint.length);
        c.footprint.width = f.num("width", c.footprint.width);
        f.done();
    }
    c.collision_weight = o.num("collision_weight", c.collision_weight);
    c.comfort_weight = o.num("comfort_weight", c.comfort_weight);
    c.reference_weight = o.num("reference_weight", c.reference_weight);
    if (o.has("obstacles")) {
        Obj f(o.at("obstacles"), "obstacles");
        c.obstacles.non_obstacle_ids = ints(f, "non_obstacle_ids", {});
        c.obstacles.z_min = f.num("z_min", c.obstacles.z_min);
        c.obstacles.z_max = f.num("z_max", c.obstacles.z_max);
        f.done();
    }
    c.grid = grid_spec_of(o.at("grid"), "grid");
    c.classes.num_classes = static_cast<int>(o.integer("num_classes"));
    c.classes.dynamic_class_ids = ints(o, "dynamic_class_ids", {});
    c.num_workers = static_cast<int>(o.integer("num_workers", 1));
    o.done();
    wrap_invalid("planner config", [&] {
        c.validate();
        c.classes.validate();
    });
    return c;
}

// ---- scenario bundle -------------------------------------------------------

void save_scenario(const std::filesystem::path& dir, const Scenario& s) {
    std::filesystem::create_directories(dir);
    json ego = json::array();
    for (const auto& w : s.gt_ego.waypoints) ego.push_back(json::array({w.x, w.y, w.yaw}));
    json boxes = json::array();
    for (const auto& step : s.gt_boxes) {
        json b = json::array();
        for (const auto& x : step) b.push_back(box_json(x));
        boxes.push_back(b);
    }
    json map = json::array();
    for (const auto& l : s.gt_map) {
        json pts = json::array();
        for (const auto& p : l.points) pts.push_back(json::array({p.x(), p.y()}));
        map.push_back({{"category", to_string(l.category)}, {"points", pts}});
    }
    const json doc = {{"format", "gauss-scenario"},
                      {"version", kFormatVersion},
                      {"config", scenario_config_json(s.config)},
                      {"gt_ego", ego},
                      {"gt_boxes", boxes},
                      {"gt_map", map}};
    write_text(dir / "scenario.json", doc.dump(1) + "\n");
    for (std::size_t k = 0; k < s.gt_grids.size(); ++k) {
        save_grid(dir / ("grid_" + std::to_string(k) + ".occ"), s.gt_grids[k]);
        save_grid(dir / ("anchor_" + std::to_string(k) + ".occ"), s.anchor_grids[k]);
    }
}

Scenario load_scenario(const std::filesystem::path& dir) {
    const json doc = parse(read_text(dir / "scenario.json"), "scenario");
    Obj o(doc, "");
    check_header(o, "gauss-scenario");
    Scenario s;
    s.config = scenario_config_of(o.at("config"), "config");
    s.gt_ego.dt = s.config.dt;
    const json& ego = o.at("gt_ego");
    if (!ego.is_array()) throw FormatError("gt_ego: expected an array");
    for (std::size_t k = 0; k < ego.size(); ++k) {
        const auto w = Obj::numbers(ego[k], "gt_ego[" + std::to_string(k) + "]", 3);
        s.gt_ego.waypoints.push_back({w[0], w[1], w[2]});
    }
    const json& boxes = o.at("gt_boxes");
    if (!boxes.is_array()) throw FormatError("gt_boxes: expected an array");
    for (std::size_t k = 0; k < boxes.size(); ++k) {
        std::vector<Box> step;
        for (std::size_t i = 0; i < boxes[k].size(); ++i) {
            step.push_back(box_of(boxes[k][i], "gt_boxes[" + std::to_string(k) + "][" +
                                                   std::to_string(i) + "]"));
        }
        s.gt_boxes.push_back(std::move(step));
    }
    const json& map = o.at("gt_map");
    if (!map.is_array()) throw FormatError("gt_map: expected an array");
    for (std::size_t i = 0; i < map.size(); ++i) {
        const std::string path = "gt_map[" + std::to_string(i) + "]";
        Obj l(map[i], path);
        Polyline p;
        wrap_invalid(path, [&] { p.category = map_category_from_string(l.str("category")); });
        const json& pts = l.at("points");
        if (!pts.is_array()) throw FormatError(path + ".points: expected an array");
        for (std::size_t k = 0; k < pts.size(); ++k) {
            const auto v = Obj::numbers(pts[k], path + ".points[" + std::to_string(k) + "]", 2);
            p.points.push_back({v[0], v[1]});
        }
        l.done();
        s.gt_map.push_back(std::move(p));
    }
    o.done();
    const std::size_t n = static_cast<std::size_t>(s.config.steps) + 1;
    if (s.gt_ego.size() + 1 != n || s.gt_boxes.size() != n) {
        throw FormatError("scenario: gt_ego/gt_boxes lengths do not match steps");
    }
    for (std::size_t k = 0; k < n; ++k) {
        s.gt_grids.push_back(load_grid(dir / ("grid_" + std::to_string(k) + ".occ")));
        s.anchor_grids.push_back(load_grid(dir / ("anchor_" + std::to_string(k) + ".occ")));
    }
    return s;
}

} // namespace gad
