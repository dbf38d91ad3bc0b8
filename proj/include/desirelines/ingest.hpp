#pragma once

// Trajectory files and scene design files.
//
// Trajectory file layout (comma separated, one row per observation):
//
//   #resolution=1280x720
//   traj_id,frame,x,y        (or traj_id,t,x,y with t in seconds)
//   7,0,412.5,88.0
//
// Frame indices are converted to seconds with the scene frame rate and
// coordinates are rescaled to the scene resolution.

#include <algorithm>
#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "desirelines/core.hpp"
#include "desirelines/error.hpp"
#include "desirelines/text.hpp"

namespace desirelines {

inline constexpr double kDefaultGateSnapRadius = 15.0;  // at the reference resolution

enum class GateKind { entry, exit, both };

inline std::string to_string(GateKind k) {
    switch (k) {
        case GateKind::entry: return "entry";
        case GateKind::exit: return "exit";
        case GateKind::both: return "both";
    }
    return "both";
}

struct Gate {
    std::string name;
    Point2 position;
    GateKind kind{GateKind::both};

    bool allows_entry() const noexcept { return kind != GateKind::exit; }
    bool allows_exit() const noexcept { return kind != GateKind::entry; }
};

struct DesignedPath {
    std::string source;
    std::string destination;
    Polyline polyline;
    int required_stops{0};
};

struct ForbiddenZone {
    std::string name;
    Polygon polygon;
};

struct SceneSpec {
    Resolution resolution{};
    double fps{30.0};
    std::vector<Gate> gates;
    std::vector<DesignedPath> designed_paths;
    std::vector<ForbiddenZone> forbidden_zones;
    std::vector<Polyline> signal_lines;
    /// Gate snap radius in scene pixels.
    double gate_snap_radius{kDefaultGateSnapRadius};

    const Gate* find_gate(std::string_view name) const noexcept {
        for (const auto& g : gates)
            if (g.name == name) return &g;
        return nullptr;
    }

    std::vector<const DesignedPath*> designs_between(std::string_view source, std::string_view destination) const {
        std::vector<const DesignedPath*> out;
        for (const auto& p : designed_paths)
            if (p.source == source && p.destination == destination) out.push_back(&p);
        return out;
    }
};

/// Checks referential integrity, gate kinds, and gate snapping of every
/// designed path. Throws InputError.
inline void validate(const SceneSpec& scene) {
    if (!scene.resolution.valid()) throw InputError("scene resolution must be positive");
    if (!(scene.fps > 0) || !std::isfinite(scene.fps)) throw InputError("scene fps must be positive");
    if (!(scene.gate_snap_radius > 0)) throw InputError("gate snap radius must be positive");
    std::set<std::string> names;
    for (const auto& g : scene.gates) {
        if (g.name.empty()) throw InputError("gate with empty name");
        if (!names.insert(g.name).second) throw InputError("duplicate gate name '" + g.name + "'");
        if (!std::isfinite(g.position.x) || !std::isfinite(g.position.y))
            throw InputError("gate '" + g.name + "' has a non-finite position");
    }
    for (const auto& path : scene.designed_paths) {
        const Gate* src = scene.find_gate(path.source);
        if (!src) throw InputError("designed path references unknown gate '" + path.source + "'");
        const Gate* dst = scene.find_gate(path.destination);
        if (!dst) throw InputError("designed path references unknown gate '" + path.destination + "'");
        const std::string label = path.source + "->" + path.destination;
        if (!src->allows_entry()) throw InputError("designed path " + label + " starts at exit-only gate");
        if (!dst->allows_exit()) throw InputError("designed path " + label + " ends at entry-only gate");
        if (path.required_stops < 0) throw InputError("designed path " + label + " has negative required_stops");
        if (euclidean(path.polyline.front(), src->position) > scene.gate_snap_radius)
            throw InputError("designed path " + label + " does not start within snap radius of '" + path.source + "'");
        if (euclidean(path.polyline.back(), dst->position) > scene.gate_snap_radius)
            throw InputError("designed path " + label + " does not end within snap radius of '" + path.destination +
                             "'");
    }
    std::set<std::string> zone_names;
    for (const auto& z : scene.forbidden_zones)
        if (!zone_names.insert(z.name).second) throw InputError("duplicate forbidden zone name '" + z.name + "'");
}

namespace detail {

inline Point2 json_point(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw InputError("expected an [x, y] pair, got " + j.dump());
    return {j[0].get<double>(), j[1].get<double>()};
}

inline std::vector<Point2> json_points(const nlohmann::json& j) {
    if (!j.is_array()) throw InputError("expected an array of [x, y] pairs");
    std::vector<Point2> pts;
    pts.reserve(j.size());
    for (const auto& e : j) pts.push_back(json_point(e));
    return pts;
}

inline Polygon json_ring(const nlohmann::json& j, const std::string& name) {
    auto pts = json_points(j);
    if (pts.size() < 4 || !(pts.front() == pts.back()))
        throw InputError("polygon '" + name + "' is not closed (first and last vertex must match)");
    pts.pop_back();
    try {
        return Polygon(std::move(pts));
    } catch (const InputError& e) {
        throw InputError("polygon '" + name + "': " + e.what());
    }
}

inline nlohmann::ordered_json points_json(std::span<const Point2> pts) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& p : pts) arr.push_back({p.x, p.y});
    return arr;
}

inline Resolution json_resolution(const nlohmann::json& j) {
    Point2 wh = json_point(j);
    return {wh.x, wh.y};
}

}  // namespace detail

/// Parses a design document (JSON syntax). Throws InputError.
inline SceneSpec parse_scene(std::istream& in) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("scene file is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw InputError("scene file must be a JSON object");
    static const std::set<std::string> known{"resolution", "fps",          "gates",           "designed_paths",
                                             "forbidden_zones", "signal_lines", "gate_snap_radius"};
    for (const auto& [key, _] : doc.items())
        if (!known.count(key)) throw InputError("scene file has unknown key '" + key + "'");

    SceneSpec scene;
    try {
        if (!doc.contains("resolution")) throw InputError("scene file is missing 'resolution'");
        scene.resolution = detail::json_resolution(doc.at("resolution"));
        if (doc.contains("fps")) scene.fps = doc.at("fps").get<double>();
        scene.gate_snap_radius = doc.value("gate_snap_radius", kDefaultGateSnapRadius * pixel_scale(scene.resolution));

        for (const auto& g : doc.value("gates", nlohmann::json::array())) {
            Gate gate;
            gate.name = g.at("name").get<std::string>();
            gate.position = {g.at("x").get<double>(), g.at("y").get<double>()};
            const auto kind = g.value("kind", std::string("both"));
            if (kind == "entry") gate.kind = GateKind::entry;
            else if (kind == "exit") gate.kind = GateKind::exit;
            else if (kind == "both") gate.kind = GateKind::both;
            else throw InputError("gate '" + gate.name + "' has unknown kind '" + kind + "'");
            scene.gates.push_back(std::move(gate));
        }
        for (const auto& p : doc.value("designed_paths", nlohmann::json::array())) {
            auto source = p.at("source").get<std::string>();
            auto destination = p.at("destination").get<std::string>();
            scene.designed_paths.push_back(DesignedPath{std::move(source), std::move(destination),
                                                        Polyline(detail::json_points(p.at("polyline"))),
                                                        p.value("required_stops", 0)});
        }
        for (const auto& z : doc.value("forbidden_zones", nlohmann::json::array())) {
            auto name = z.at("name").get<std::string>();
            auto polygon = detail::json_ring(z.at("polygon"), name);
            scene.forbidden_zones.push_back(ForbiddenZone{std::move(name), std::move(polygon)});
        }
        for (const auto& s : doc.value("signal_lines", nlohmann::json::array()))
            scene.signal_lines.emplace_back(detail::json_points(s));
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("scene file: ") + e.what());
    }
    validate(scene);
    return scene;
}

inline SceneSpec parse_scene_string(const std::string& text) {
    std::istringstream in(text);
    return parse_scene(in);
}

inline nlohmann::ordered_json scene_to_json(const SceneSpec& scene) {
    nlohmann::ordered_json doc;
    doc["resolution"] = {scene.resolution.width, scene.resolution.height};
    doc["fps"] = scene.fps;
    doc["gate_snap_radius"] = scene.gate_snap_radius;
    doc["gates"] = nlohmann::ordered_json::array();
    for (const auto& g : scene.gates)
        doc["gates"].push_back(
            {{"name", g.name}, {"x", g.position.x}, {"y", g.position.y}, {"kind", to_string(g.kind)}});
    doc["designed_paths"] = nlohmann::ordered_json::array();
    for (const auto& p : scene.designed_paths)
        doc["designed_paths"].push_back({{"source", p.source},
                                         {"destination", p.destination},
                                         {"polyline", detail::points_json(p.polyline.vertices())},
                                         {"required_stops", p.required_stops}});
    doc["forbidden_zones"] = nlohmann::ordered_json::array();
    for (const auto& z : scene.forbidden_zones) {
        std::vector<Point2> ring(z.polygon.vertices().begin(), z.polygon.vertices().end());
        ring.push_back(ring.front());
        doc["forbidden_zones"].push_back({{"name", z.name}, {"polygon", detail::points_json(ring)}});
    }
    doc["signal_lines"] = nlohmann::ordered_json::array();
    for (const auto& s : scene.signal_lines) doc["signal_lines"].push_back(detail::points_json(s.vertices()));
    return doc;
}

/// Rescales every coordinate by the per-axis ratio of `target` to the set's
/// resolution. Timestamps are untouched.
inline TrajectorySet normalize(const TrajectorySet& set, const Resolution& target) {
    if (!set.resolution.valid() || !target.valid()) throw InputError("resolutions must be positive");
    const double sx = target.width / set.resolution.width;
    const double sy = target.height / set.resolution.height;
    TrajectorySet out;
    out.resolution = target;
    out.trajectories.reserve(set.size());
    for (const auto& traj : set.trajectories) {
        std::vector<TrackPoint> pts(traj.points().begin(), traj.points().end());
        if (sx != 1.0 || sy != 1.0) {
            for (auto& p : pts) {
                p.x *= sx;
                p.y *= sy;
            }
        }
        out.trajectories.emplace_back(traj.id(), std::move(pts));
    }
    return out;
}

struct TrajectoryParseOptions {
    double fps{30.0};
    /// Resolution assumed when the file has no `#resolution=` line.
    Resolution default_resolution{};
    double bounds_margin{kDefaultBoundsMargin};
};

/// Reads a trajectory file in its declared source resolution (no rescaling).
inline TrajectorySet read_trajectory_file(std::istream& in, const TrajectoryParseOptions& opts) {
    TrajectorySet set;
    set.resolution = opts.default_resolution;

    enum class TimeColumn { frame, seconds };
    std::optional<TimeColumn> time_column;
    std::size_t line_no = 0;
    std::string line;
    // Insertion order of ids is kept so output order follows the file.
    std::vector<std::string> order;
    std::unordered_map<std::string, std::vector<TrackPoint>> rows;

    auto fail = [&](const std::string& msg) {
        throw InputError("trajectory file line " + std::to_string(line_no) + ": " + msg);
    };

    while (std::getline(in, line)) {
        ++line_no;
        const auto body = text::trim(line);
        if (body.empty()) continue;
        if (body.front() == '#') {
            constexpr std::string_view key = "#resolution=";
            if (body.substr(0, key.size()) == key) {
                if (time_column) fail("#resolution must precede the header row");
                const auto spec = body.substr(key.size());
                const auto xpos = spec.find('x');
                const auto w = xpos == std::string_view::npos ? std::nullopt : text::parse_double(spec.substr(0, xpos));
                const auto h = xpos == std::string_view::npos ? std::nullopt : text::parse_double(spec.substr(xpos + 1));
                if (!w || !h || !(*w > 0) || !(*h > 0)) fail("malformed resolution '" + std::string(spec) + "'");
                set.resolution = {*w, *h};
            }
            continue;
        }
        const auto cols = text::split(body, ',');
        if (!time_column) {
            if (cols.size() == 4 && cols[0] == "traj_id" && cols[2] == "x" && cols[3] == "y" &&
                (cols[1] == "frame" || cols[1] == "t")) {
                time_column = cols[1] == "frame" ? TimeColumn::frame : TimeColumn::seconds;
                continue;
            }
            const bool has_frame = std::find(cols.begin(), cols.end(), "frame") != cols.end();
            const bool has_t = std::find(cols.begin(), cols.end(), "t") != cols.end();
            if (has_frame && has_t) fail("header mixes frame and t columns");
            fail("unknown header '" + std::string(body) + "'");
        }
        if (cols.size() != 4) fail("expected 4 columns, found " + std::to_string(cols.size()));
        if (cols[0].empty()) fail("empty traj_id");
        const auto x = text::parse_double(cols[2]);
        const auto y = text::parse_double(cols[3]);
        if (!x || !y || !std::isfinite(*x) || !std::isfinite(*y)) fail("malformed coordinate");
        double t = 0;
        if (*time_column == TimeColumn::frame) {
            const auto frame = text::parse_int(cols[1]);
            if (!frame || *frame < 0) fail("malformed frame index '" + std::string(cols[1]) + "'");
            t = static_cast<double>(*frame) / opts.fps;
        } else {
            const auto secs = text::parse_double(cols[1]);
            if (!secs || !std::isfinite(*secs) || *secs < 0) fail("malformed time '" + std::string(cols[1]) + "'");
            t = *secs;
        }
        std::string id(cols[0]);
        auto [it, inserted] = rows.try_emplace(id);
        if (inserted) order.push_back(id);
        it->second.push_back(TrackPoint{*x, *y, t});
    }
    if (!time_column) throw InputError("trajectory file has no header row");

    set.trajectories.reserve(order.size());
    for (const auto& id : order) {
        auto& pts = rows[id];
        std::stable_sort(pts.begin(), pts.end(), [](const TrackPoint& a, const TrackPoint& b) { return a.t < b.t; });
        for (std::size_t i = 1; i < pts.size(); ++i)
            if (pts[i].t == pts[i - 1].t)
                throw InputError("trajectory '" + id + "' has duplicate timestamp t=" + text::shortest(pts[i].t));
        set.trajectories.emplace_back(id, std::move(pts));
    }
    return set;
}

/// Parses a trajectory file and normalizes it to the scene resolution.
inline TrajectorySet parse_trajectories(std::istream& in, const SceneSpec& scene,
                                        double bounds_margin = kDefaultBoundsMargin) {
    TrajectoryParseOptions opts;
    opts.fps = scene.fps;
    opts.default_resolution = scene.resolution;
    opts.bounds_margin = bounds_margin;
    auto set = normalize(read_trajectory_file(in, opts), scene.resolution);
    validate(set, bounds_margin);
    return set;
}

/// Writes the set in the seconds-based layout with round-trip exact numbers.
inline void write_trajectories(std::ostream& out, const TrajectorySet& set) {
    out << "#resolution=" << text::shortest(set.resolution.width) << 'x' << text::shortest(set.resolution.height)
        << '\n';
    out << "traj_id,t,x,y\n";
    for (const auto& traj : set.trajectories)
        for (const auto& p : traj.points())
            out << traj.id() << ',' << text::shortest(p.t) << ',' << text::shortest(p.x) << ','
                << text::shortest(p.y) << '\n';
}

}  // namespace desirelines
