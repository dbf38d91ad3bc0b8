#pragma once

// Test-only oracles and fixtures. The oracles deliberately take a different
// route from the library: top-down memoized recursion for DTW, and a full
// distance matrix with breadth-first flood fill for DBSCAN.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <queue>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "desirelines/desirelines.hpp"

namespace testsupport {

using namespace desirelines;

inline double dtw_oracle(const std::vector<Point2>& a, const std::vector<Point2>& b) {
    const std::size_t n = a.size(), m = b.size();
    std::vector<double> memo(n * m, -1.0);
    std::function<double(std::size_t, std::size_t)> d = [&](std::size_t i, std::size_t j) -> double {
        double& slot = memo[i * m + j];
        if (slot >= 0) return slot;
        const double cost = std::sqrt((a[i].x - b[j].x) * (a[i].x - b[j].x) + (a[i].y - b[j].y) * (a[i].y - b[j].y));
        if (i == 0 && j == 0) return slot = cost;
        double best = std::numeric_limits<double>::infinity();
        if (i > 0) best = std::min(best, d(i - 1, j));
        if (j > 0) best = std::min(best, d(i, j - 1));
        if (i > 0 && j > 0) best = std::min(best, d(i - 1, j - 1));
        return slot = cost + best;
    };
    return d(n - 1, m - 1);
}

/// Brute-force DBSCAN with the closed-ball, self-counting neighbourhood and
/// the nearest-core border rule (ties: smaller rank). Returns -1 for noise;
/// cluster numbering is arbitrary.
inline std::vector<int> dbscan_oracle(const std::vector<EndpointVector>& pts, double eps, std::size_t min_pts,
                                      const std::vector<std::size_t>& rank) {
    const std::size_t n = pts.size();
    std::vector<std::vector<double>> dist(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double a = pts[i].sx - pts[j].sx, b = pts[i].sy - pts[j].sy, c = pts[i].dx - pts[j].dx,
                         d = pts[i].dy - pts[j].dy;
            dist[i][j] = std::sqrt(a * a + b * b + c * c + d * d);
        }
    std::vector<bool> core(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t c = 0;
        for (std::size_t j = 0; j < n; ++j) c += dist[i][j] <= eps;
        core[i] = c >= min_pts;
    }
    std::vector<int> comp(n, -1);
    int next = 0;
    for (std::size_t s = 0; s < n; ++s) {
        if (!core[s] || comp[s] >= 0) continue;
        std::queue<std::size_t> q;
        q.push(s);
        comp[s] = next;
        while (!q.empty()) {
            const auto u = q.front();
            q.pop();
            for (std::size_t v = 0; v < n; ++v)
                if (core[v] && comp[v] < 0 && dist[u][v] <= eps) {
                    comp[v] = next;
                    q.push(v);
                }
        }
        ++next;
    }
    std::vector<int> label(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
        if (core[i]) {
            label[i] = comp[i];
            continue;
        }
        std::vector<std::size_t> candidates;
        for (std::size_t j = 0; j < n; ++j)
            if (core[j] && dist[i][j] <= eps) candidates.push_back(j);
        if (candidates.empty()) continue;
        const auto best = *std::min_element(candidates.begin(), candidates.end(), [&](std::size_t x, std::size_t y) {
            if (dist[i][x] != dist[i][y]) return dist[i][x] < dist[i][y];
            return rank[x] < rank[y];
        });
        label[i] = comp[best];
    }
    return label;
}

/// True when two labelings induce the same partition (noise must match noise).
inline bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) return false;
    std::map<int, int> ab, ba;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if ((a[i] < 0) != (b[i] < 0)) return false;
        if (a[i] < 0) continue;
        auto [it1, new1] = ab.try_emplace(a[i], b[i]);
        auto [it2, new2] = ba.try_emplace(b[i], a[i]);
        if (it1->second != b[i] || it2->second != a[i]) return false;
    }
    return true;
}

inline Trajectory make_trajectory(const std::string& id, const std::vector<Point2>& pts, double dt = 1.0 / 30) {
    std::vector<TrackPoint> tp;
    for (std::size_t i = 0; i < pts.size(); ++i) tp.push_back({pts[i].x, pts[i].y, i * dt});
    return Trajectory(id, tp);
}

/// Four-gate scene with three designed paths at 640x360:
///   A->B  corner route (A, right along the top, down, right along the bottom)
///   C->D  dog-leg from bottom-left to top-right
///   D->C  route back along the middle
/// The straight A->B diagonal is the undesigned shortcut; it is also the only
/// route crossing the forbidden zone.
inline SceneSpec three_path_scene() {
    return parse_scene_string(R"({
      "resolution": [640, 360], "fps": 30,
      "gates": [
        {"name": "A", "x": 60,  "y": 40,  "kind": "entry"},
        {"name": "B", "x": 580, "y": 320, "kind": "exit"},
        {"name": "C", "x": 60,  "y": 320, "kind": "both"},
        {"name": "D", "x": 580, "y": 40,  "kind": "both"}
      ],
      "designed_paths": [
        {"source": "A", "destination": "B", "polyline": [[60,40],[320,40],[320,320],[580,320]], "required_stops": 1},
        {"source": "C", "destination": "D", "polyline": [[60,320],[200,320],[200,120],[580,40]], "required_stops": 0},
        {"source": "D", "destination": "C", "polyline": [[580,40],[580,200],[60,200],[60,320]], "required_stops": 0}
      ],
      "forbidden_zones": [
        {"name": "lanes", "polygon": [[420,240],[560,240],[560,290],[420,290],[420,240]]}
      ],
      "signal_lines": [[[300,30],[340,30]]]
    })");
}

inline Polyline shortcut_ab() { return Polyline({{60, 40}, {580, 320}}); }

inline synth::Bundle design_bundle(const SceneSpec& scene, const std::string& src, const std::string& dst,
                                   std::size_t count, double sigma, double speed = 60.0) {
    return synth::Bundle{src + "->" + dst, scene.designs_between(src, dst).front()->polyline, count, sigma, speed,
                         std::nullopt, true};
}

/// The 300-trajectory scene: 90 per designed path at sigma 2 and 30 on the
/// A->B diagonal shortcut.
inline synth::SynthSpec recovery_spec(std::uint64_t seed) {
    synth::SynthSpec spec{three_path_scene(), {}, seed, 60.0};
    spec.bundles.push_back(design_bundle(spec.scene, "A", "B", 90, 2.0));
    spec.bundles.push_back(design_bundle(spec.scene, "C", "D", 90, 2.0));
    spec.bundles.push_back(design_bundle(spec.scene, "D", "C", 90, 2.0));
    spec.bundles.push_back(synth::Bundle{"shortcut", shortcut_ab(), 30, 2.0, 60.0, std::nullopt, false});
    return spec;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("desirelines_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

/// Writes the synthetic scene and trajectories into `dir` and returns a
/// config pointing at them.
inline RunConfig write_synth_inputs(const synth::SynthSpec& spec, const std::filesystem::path& dir) {
    const auto generated = synth::generate(spec);
    {
        std::ofstream out(dir / "scene.json");
        out << scene_to_json(spec.scene).dump(2);
        std::ofstream traj(dir / "trajectories.csv");
        write_trajectories(traj, generated.trajectories);
    }
    RunConfig cfg;
    cfg.scene = dir / "scene.json";
    cfg.trajectories = dir / "trajectories.csv";
    cfg.out_dir = dir / "out";
    return cfg;
}

inline std::string slurp(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace testsupport
