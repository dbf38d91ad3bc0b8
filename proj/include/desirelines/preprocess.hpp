#pragma once

// Broken-trajectory filtering and arc-length resampling.

#include <cstddef>
#include <string>
#include <vector>

#include "desirelines/core.hpp"
#include "desirelines/error.hpp"
#include "desirelines/parallel.hpp"

namespace desirelines {

/// Explicit criteria for a "broken" trajectory. Pixel values are stated at the
/// reference resolution; use `scaled_to` before applying them to a scene.
struct FilterParams {
    std::size_t min_points{10};
    double min_path_length{40.0};
    double max_time_gap{2.0};
    double min_duration{1.0};

    void validate() const {
        if (min_points == 0 || !(min_path_length > 0) || !(max_time_gap > 0) || !(min_duration > 0))
            throw InputError("filter parameters must be strictly positive");
    }

    FilterParams scaled_to(const Resolution& r) const {
        FilterParams p = *this;
        p.min_path_length *= pixel_scale(r);
        return p;
    }
};

struct Discard {
    std::string id;
    std::string reason;

    friend bool operator==(const Discard&, const Discard&) = default;
};

struct FilterResult {
    TrajectorySet kept;
    std::vector<Discard> discarded;
};

/// First violated criterion in declaration order, or empty when `traj` passes.
inline std::string broken_reason(const Trajectory& traj, const FilterParams& p) {
    if (traj.size() < p.min_points) return "min_points";
    if (traj.path_length() < p.min_path_length) return "min_path_length";
    if (traj.max_time_gap() > p.max_time_gap) return "max_time_gap";
    if (traj.duration() < p.min_duration) return "min_duration";
    return {};
}

inline FilterResult filter_broken(const TrajectorySet& set, const FilterParams& p, unsigned threads = 1) {
    p.validate();
    std::vector<std::string> reasons(set.size());
    parallel_for(set.size(), threads, [&](std::size_t i) { reasons[i] = broken_reason(set.trajectories[i], p); });
    FilterResult out;
    out.kept.resolution = set.resolution;
    for (std::size_t i = 0; i < set.size(); ++i) {
        if (reasons[i].empty()) out.kept.trajectories.push_back(set.trajectories[i]);
        else out.discarded.push_back({set.trajectories[i].id(), std::move(reasons[i])});
    }
    return out;
}

inline constexpr std::size_t kDefaultResampleCount = 64;

/// A trajectory reduced to a fixed number of samples spaced uniformly in arc length.
struct ResampledPath {
    std::string source_id;
    std::vector<Point2> samples;
};

/// Samples `k` points at arc-length fractions 0, 1/(k-1), ..., 1 along the
/// piecewise-linear curve through `points`. Endpoints are copied exactly.
inline std::vector<Point2> resample_points(std::span<const Point2> points, std::size_t k) {
    if (k < 2) throw InputError("resample count must be at least 2");
    if (points.size() < 2) throw InputError("degenerate geometry: fewer than 2 points");
    std::vector<double> cumulative(points.size(), 0.0);
    for (std::size_t i = 1; i < points.size(); ++i)
        cumulative[i] = cumulative[i - 1] + euclidean(points[i - 1], points[i]);
    const double total = cumulative.back();
    if (!(total > 0)) throw InputError("degenerate geometry: zero path length");

    std::vector<Point2> samples;
    samples.reserve(k);
    samples.push_back(points.front());
    std::size_t seg = 0;
    for (std::size_t j = 1; j + 1 < k; ++j) {
        const double s = total * static_cast<double>(j) / static_cast<double>(k - 1);
        while (seg + 2 < points.size() && cumulative[seg + 1] < s) ++seg;
        const double len = cumulative[seg + 1] - cumulative[seg];
        const double f = len > 0 ? (s - cumulative[seg]) / len : 0.0;
        const Point2& a = points[seg];
        const Point2& b = points[seg + 1];
        samples.push_back({a.x + f * (b.x - a.x), a.y + f * (b.y - a.y)});
    }
    samples.push_back(points.back());
    return samples;
}

inline ResampledPath resample(const Trajectory& traj, std::size_t k = kDefaultResampleCount) {
    std::vector<Point2> pts;
    pts.reserve(traj.size());
    for (const auto& p : traj.points()) pts.push_back(p.position());
    try {
        return ResampledPath{traj.id(), resample_points(pts, k)};
    } catch (const InputError& e) {
        throw InputError("trajectory '" + traj.id() + "': " + e.what());
    }
}

}  // namespace desirelines
