#pragma once

// Synthetic scenes with known ground truth.
//
// Randomness is drawn from std::mt19937_64, whose output sequence is fixed by
// the C++ standard. Uniform variates are formed from the top 53 bits of each
// draw and Gaussian variates by the Box-Muller transform (cosine branch only,
// two draws per variate), so a seed reproduces the same trajectories on every
// conforming platform.

#include <cmath>
#include <cstdint>
#include <istream>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "desirelines/core.hpp"
#include "desirelines/error.hpp"
#include "desirelines/ingest.hpp"

namespace desirelines::synth {

class Random {
public:
    explicit Random(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double gaussian(double sigma) {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::mt19937_64 engine_;
};

struct Dwell {
    double fraction{0.5};  // position along the path, as a fraction of arc length
    double seconds{0};
};

struct Bundle {
    std::string name;
    Polyline path;
    std::size_t count{0};
    double sigma{0};   // lateral noise, pixels
    double speed{1};   // pixels per second
    std::optional<Dwell> dwell;
    bool compliant{true};
};

struct SynthSpec {
    SceneSpec scene;
    std::vector<Bundle> bundles;
    std::uint64_t seed{0};
    /// Trajectory start times are drawn uniformly from [0, start_window).
    double start_window{60.0};

    void validate() const {
        for (const auto& b : bundles) {
            if (!(b.sigma >= 0)) throw InputError("bundle '" + b.name + "': sigma must be >= 0");
            if (!(b.speed > 0)) throw InputError("bundle '" + b.name + "': speed must be > 0");
            if (b.dwell && (!(b.dwell->fraction >= 0 && b.dwell->fraction <= 1) || !(b.dwell->seconds >= 0)))
                throw InputError("bundle '" + b.name + "': dwell needs fraction in [0,1] and seconds >= 0");
        }
        if (!(start_window >= 0)) throw InputError("start_window must be >= 0");
    }
};

struct GroundTruth {
    std::string traj_id;
    std::string bundle;
    bool compliant{true};
};

struct SynthOutput {
    TrajectorySet trajectories;
    std::vector<GroundTruth> truth;
};

namespace detail {

struct Cursor {
    Point2 position;
    Point2 direction;  // unit tangent
};

inline Cursor locate(const Polyline& path, std::span<const double> cumulative, double s) {
    const auto v = path.vertices();
    std::size_t seg = 0;
    while (seg + 2 < v.size() && cumulative[seg + 1] <= s) ++seg;
    const double len = cumulative[seg + 1] - cumulative[seg];
    const double f = std::clamp((s - cumulative[seg]) / len, 0.0, 1.0);
    const Point2& a = v[seg];
    const Point2& b = v[seg + 1];
    Cursor c;
    c.position = f == 1.0 ? b : Point2{a.x + f * (b.x - a.x), a.y + f * (b.y - a.y)};
    c.direction = {(b.x - a.x) / len, (b.y - a.y) / len};
    return c;
}

}  // namespace detail

/// Trajectories follow each bundle path at constant speed, sampled at the
/// scene frame rate, with an optional stationary dwell and Gaussian noise
/// perpendicular to the local direction. The final point lands exactly on the
/// path end at arc_length / speed (+ dwell) seconds after the start.
inline SynthOutput generate(const SynthSpec& spec) {
    spec.validate();
    Random rng(spec.seed);
    SynthOutput out;
    out.trajectories.resolution = spec.scene.resolution;
    const double dt = 1.0 / spec.scene.fps;
    std::size_t next_id = 1;

    for (std::size_t b = 0; b < spec.bundles.size(); ++b) {
        const Bundle& bundle = spec.bundles[b];
        const auto v = bundle.path.vertices();
        std::vector<double> cumulative(v.size(), 0.0);
        for (std::size_t i = 1; i < v.size(); ++i) cumulative[i] = cumulative[i - 1] + euclidean(v[i - 1], v[i]);
        const double length = cumulative.back();
        const double dwell_s = bundle.dwell ? bundle.dwell->seconds : 0.0;
        const double dwell_at = bundle.dwell ? bundle.dwell->fraction * length / bundle.speed : 0.0;
        const double total = length / bundle.speed + dwell_s;

        auto arc_at = [&](double elapsed) {
            double s = elapsed * bundle.speed;
            if (bundle.dwell && elapsed > dwell_at)
                s = elapsed <= dwell_at + dwell_s ? dwell_at * bundle.speed : (elapsed - dwell_s) * bundle.speed;
            return std::min(s, length);
        };

        for (std::size_t k = 0; k < bundle.count; ++k) {
            const double start = rng.uniform() * spec.start_window;
            std::vector<TrackPoint> pts;
            auto emit = [&](double elapsed, double s) {
                const auto c = detail::locate(bundle.path, cumulative, s);
                const double offset = bundle.sigma > 0 ? rng.gaussian(bundle.sigma) : 0.0;
                pts.push_back({c.position.x - offset * c.direction.y, c.position.y + offset * c.direction.x,
                               start + elapsed});
            };
            for (std::size_t frame = 0;; ++frame) {
                const double elapsed = static_cast<double>(frame) * dt;
                if (elapsed >= total - 1e-9) break;
                emit(elapsed, arc_at(elapsed));
            }
            emit(total, length);
            const std::string id = std::to_string(next_id++);
            out.trajectories.trajectories.emplace_back(id, std::move(pts));
            out.truth.push_back({id, bundle.name, bundle.compliant});
        }
    }
    return out;
}

/// Parses a synthetic-scene document. The scene is given inline under
/// "scene"; bundles name either a designed path ({"source", "destination"})
/// or a free "polyline".
inline SynthSpec parse_synth_spec(std::istream& in) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("synth spec is not valid JSON: ") + e.what());
    }
    try {
        SynthSpec spec;
        spec.scene = parse_scene_string(doc.at("scene").dump());
        spec.seed = doc.value("seed", std::uint64_t{0});
        spec.start_window = doc.value("start_window", 60.0);
        std::size_t index = 0;
        for (const auto& b : doc.at("bundles")) {
            const std::string name = b.value("name", "bundle" + std::to_string(index++));
            std::optional<Polyline> path;
            bool from_design = false;
            if (b.contains("polyline")) {
                path.emplace(desirelines::detail::json_points(b.at("polyline")));
            } else {
                const auto source = b.at("source").get<std::string>();
                const auto destination = b.at("destination").get<std::string>();
                const auto designs = spec.scene.designs_between(source, destination);
                const auto ordinal = b.value("ordinal", std::size_t{0});
                if (ordinal >= designs.size())
                    throw InputError("bundle '" + name + "': no designed path " + source + "->" + destination);
                path = designs[ordinal]->polyline;
                from_design = true;
            }
            Bundle bundle{name, *path, 0, 0.0, 1.0, std::nullopt, true};
            bundle.count = b.value("count", std::size_t{0});
            bundle.sigma = b.value("sigma", 0.0);
            bundle.speed = b.value("speed", 1.0);
            if (b.contains("dwell"))
                bundle.dwell = Dwell{b.at("dwell").at("fraction").get<double>(), b.at("dwell").at("seconds").get<double>()};
            bundle.compliant = b.value("compliant", from_design);
            spec.bundles.push_back(std::move(bundle));
        }
        spec.validate();
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("synth spec: ") + e.what());
    }
}

inline void write_ground_truth(std::ostream& out, const std::vector<GroundTruth>& truth) {
    out << "traj_id,bundle,compliant\n";
    for (const auto& g : truth) out << g.traj_id << ',' << g.bundle << ',' << (g.compliant ? 1 : 0) << '\n';
}

}  // namespace desirelines::synth
