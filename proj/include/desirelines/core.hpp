#pragma once

// Core trajectory types and planar geometry in the camera pixel plane.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "desirelines/error.hpp"

namespace desirelines {

/// Resolution every pixel-valued default is stated at.
inline constexpr double kReferenceWidth = 640.0;
inline constexpr double kReferenceHeight = 360.0;

struct Point2 {
    double x{0};
    double y{0};

    friend bool operator==(const Point2&, const Point2&) = default;
};

struct TrackPoint {
    double x{0};
    double y{0};
    double t{0};  // seconds from recording start

    Point2 position() const noexcept { return {x, y}; }
    friend bool operator==(const TrackPoint&, const TrackPoint&) = default;
};

template <typename P>
concept PlanarPoint = requires(const P& p) {
    { p.x } -> std::convertible_to<double>;
    { p.y } -> std::convertible_to<double>;
};

struct Resolution {
    double width{kReferenceWidth};
    double height{kReferenceHeight};

    bool valid() const noexcept {
        return std::isfinite(width) && std::isfinite(height) && width > 0 && height > 0;
    }
    friend bool operator==(const Resolution&, const Resolution&) = default;
};

/// Mean of the per-axis factors mapping the reference resolution onto `r`.
/// Pixel tolerances quoted at the reference resolution are multiplied by it.
inline double pixel_scale(const Resolution& r) noexcept {
    return 0.5 * (r.width / kReferenceWidth + r.height / kReferenceHeight);
}

inline bool is_anisotropic(const Resolution& r) noexcept {
    return r.width / kReferenceWidth != r.height / kReferenceHeight;
}

template <PlanarPoint A, PlanarPoint B>
double euclidean(const A& a, const B& b) noexcept {
    const double dx = static_cast<double>(a.x) - static_cast<double>(b.x);
    const double dy = static_cast<double>(a.y) - static_cast<double>(b.y);
    return std::sqrt(dx * dx + dy * dy);
}

/// Total order on trajectory ids used for every deterministic tie-break.
/// Purely numeric ids compare by value ("7" < "10"), numeric ids sort before
/// other ids, and everything else compares lexicographically.
inline bool id_less(std::string_view a, std::string_view b) noexcept {
    auto numeric = [](std::string_view s) {
        return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
    };
    const bool na = numeric(a);
    const bool nb = numeric(b);
    if (na != nb) return na;
    if (na) {
        auto strip = [](std::string_view s) {
            const auto nz = s.find_first_not_of('0');
            return nz == std::string_view::npos ? std::string_view("0") : s.substr(nz);
        };
        const auto sa = strip(a);
        const auto sb = strip(b);
        if (sa.size() != sb.size()) return sa.size() < sb.size();
        if (sa != sb) return sa < sb;
    }
    return a < b;
}

struct IdLess {
    bool operator()(std::string_view a, std::string_view b) const noexcept { return id_less(a, b); }
};

/// Rank of each id under `id_less`; rank 0 is the smallest id.
inline std::vector<std::size_t> id_ranks(std::span<const std::string> ids) {
    std::vector<std::size_t> order(ids.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return id_less(ids[a], ids[b]); });
    std::vector<std::size_t> rank(ids.size());
    for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r;
    return rank;
}

/// One tracked cyclist: a non-empty, strictly time-ordered point sequence.
class Trajectory {
public:
    Trajectory(std::string id, std::vector<TrackPoint> points)
        : id_(std::move(id)), points_(std::move(points)) {
        if (points_.empty()) throw InputError("trajectory '" + id_ + "' has no points");
        for (std::size_t i = 0; i < points_.size(); ++i) {
            const auto& p = points_[i];
            if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.t))
                throw InputError("trajectory '" + id_ + "' has a non-finite coordinate");
            if (p.t < 0) throw InputError("trajectory '" + id_ + "' has a negative timestamp");
            if (i > 0 && !(p.t > points_[i - 1].t))
                throw InputError("trajectory '" + id_ + "' timestamps are not strictly increasing");
        }
    }

    const std::string& id() const noexcept { return id_; }
    std::span<const TrackPoint> points() const noexcept { return points_; }
    std::size_t size() const noexcept { return points_.size(); }
    const TrackPoint& front() const noexcept { return points_.front(); }
    const TrackPoint& back() const noexcept { return points_.back(); }

    /// Time on screen: last minus first observation.
    double duration() const noexcept { return points_.back().t - points_.front().t; }

    double path_length() const noexcept {
        double total = 0;
        for (std::size_t i = 1; i < points_.size(); ++i) total += euclidean(points_[i - 1], points_[i]);
        return total;
    }

    double max_time_gap() const noexcept {
        double gap = 0;
        for (std::size_t i = 1; i < points_.size(); ++i) gap = std::max(gap, points_[i].t - points_[i - 1].t);
        return gap;
    }

    friend bool operator==(const Trajectory&, const Trajectory&) = default;

private:
    std::string id_;
    std::vector<TrackPoint> points_;
};

struct TrajectorySet {
    Resolution resolution{};
    std::vector<Trajectory> trajectories;

    std::size_t size() const noexcept { return trajectories.size(); }

    std::unordered_map<std::string, std::size_t> index_by_id() const {
        std::unordered_map<std::string, std::size_t> index;
        index.reserve(trajectories.size());
        for (std::size_t i = 0; i < trajectories.size(); ++i) index.emplace(trajectories[i].id(), i);
        return index;
    }

    friend bool operator==(const TrajectorySet&, const TrajectorySet&) = default;
};

inline constexpr double kDefaultBoundsMargin = 0.10;

/// Throws InputError on duplicate ids or coordinates outside the frame
/// extended by `margin_fraction` of each dimension.
inline void validate(const TrajectorySet& set, double margin_fraction = kDefaultBoundsMargin) {
    if (!set.resolution.valid()) throw InputError("trajectory set has a non-positive resolution");
    const double mx = margin_fraction * set.resolution.width;
    const double my = margin_fraction * set.resolution.height;
    std::unordered_set<std::string> seen;
    for (const auto& traj : set.trajectories) {
        if (!seen.insert(traj.id()).second) throw InputError("duplicate trajectory id '" + traj.id() + "'");
        for (const auto& p : traj.points()) {
            if (p.x < -mx || p.x > set.resolution.width + mx || p.y < -my || p.y > set.resolution.height + my)
                throw InputError("trajectory '" + traj.id() + "' has a point outside the frame at t=" +
                                 std::to_string(p.t));
        }
    }
}

/// Open polyline with at least two vertices and no zero-length segment.
class Polyline {
public:
    explicit Polyline(std::vector<Point2> vertices) : vertices_(std::move(vertices)) {
        if (vertices_.size() < 2) throw InputError("polyline needs at least 2 vertices");
        for (std::size_t i = 0; i < vertices_.size(); ++i) {
            if (!std::isfinite(vertices_[i].x) || !std::isfinite(vertices_[i].y))
                throw InputError("polyline has a non-finite vertex");
            if (i > 0 && vertices_[i] == vertices_[i - 1])
                throw InputError("polyline has consecutive identical vertices");
        }
    }

    std::span<const Point2> vertices() const noexcept { return vertices_; }
    std::size_t size() const noexcept { return vertices_.size(); }
    const Point2& front() const noexcept { return vertices_.front(); }
    const Point2& back() const noexcept { return vertices_.back(); }

    friend bool operator==(const Polyline&, const Polyline&) = default;

private:
    std::vector<Point2> vertices_;
};

inline double arc_length(std::span<const Point2> vertices) noexcept {
    double total = 0;
    for (std::size_t i = 1; i < vertices.size(); ++i) total += euclidean(vertices[i - 1], vertices[i]);
    return total;
}

inline double arc_length(const Polyline& p) noexcept { return arc_length(p.vertices()); }

template <PlanarPoint Q>
double point_to_segment(const Q& q, const Point2& a, const Point2& b) noexcept {
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    if (len2 == 0) return euclidean(q, a);
    double s = ((q.x - a.x) * dx + (q.y - a.y) * dy) / len2;
    s = std::clamp(s, 0.0, 1.0);
    const Point2 foot{a.x + s * dx, a.y + s * dy};
    return euclidean(q, foot);
}

template <PlanarPoint Q>
double point_to_polyline(const Q& q, std::span<const Point2> vertices) noexcept {
    double best = vertices.empty() ? 0.0 : euclidean(q, vertices.front());
    for (std::size_t i = 1; i < vertices.size(); ++i)
        best = std::min(best, point_to_segment(q, vertices[i - 1], vertices[i]));
    return best;
}

template <PlanarPoint Q>
double point_to_polyline(const Q& q, const Polyline& p) noexcept {
    return point_to_polyline(q, p.vertices());
}

namespace detail {

inline double cross(const Point2& o, const Point2& a, const Point2& b) noexcept {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

inline bool on_segment(const Point2& p, const Point2& a, const Point2& b) noexcept {
    return cross(a, b, p) == 0 && std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
           std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
}

inline int sign(double v) noexcept { return (v > 0) - (v < 0); }

inline bool segments_intersect(const Point2& a, const Point2& b, const Point2& c, const Point2& d) noexcept {
    const int d1 = sign(cross(c, d, a));
    const int d2 = sign(cross(c, d, b));
    const int d3 = sign(cross(a, b, c));
    const int d4 = sign(cross(a, b, d));
    if (d1 * d2 < 0 && d3 * d4 < 0) return true;
    return (d1 == 0 && on_segment(a, c, d)) || (d2 == 0 && on_segment(b, c, d)) ||
           (d3 == 0 && on_segment(c, a, b)) || (d4 == 0 && on_segment(d, a, b));
}

}  // namespace detail

/// Simple polygon stored without the repeated closing vertex.
class Polygon {
public:
    explicit Polygon(std::vector<Point2> ring) : ring_(std::move(ring)) {
        if (ring_.size() < 3) throw InputError("polygon needs at least 3 distinct vertices");
        for (const auto& v : ring_)
            if (!std::isfinite(v.x) || !std::isfinite(v.y)) throw InputError("polygon has a non-finite vertex");
        const std::size_t n = ring_.size();
        for (std::size_t i = 0; i < n; ++i) {
            if (ring_[i] == ring_[(i + 1) % n]) throw InputError("polygon has a zero-length edge");
        }
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if (adjacent) continue;
                if (detail::segments_intersect(ring_[i], ring_[(i + 1) % n], ring_[j], ring_[(j + 1) % n]))
                    throw InputError("polygon is self-intersecting");
            }
        }
        // Adjacent edges folding back onto each other also break simplicity.
        for (std::size_t i = 0; i < n; ++i) {
            const auto& a = ring_[i];
            const auto& b = ring_[(i + 1) % n];
            const auto& c = ring_[(i + 2) % n];
            if (detail::cross(a, b, c) == 0 && (b.x - a.x) * (c.x - b.x) + (b.y - a.y) * (c.y - b.y) < 0)
                throw InputError("polygon is self-intersecting");
        }
    }

    std::span<const Point2> vertices() const noexcept { return ring_; }
    std::size_t size() const noexcept { return ring_.size(); }

    friend bool operator==(const Polygon&, const Polygon&) = default;

private:
    std::vector<Point2> ring_;
};

/// Ray-casting containment test. Points on the boundary are outside.
template <PlanarPoint Q>
bool strictly_inside(const Q& q, const Polygon& polygon) noexcept {
    const Point2 p{static_cast<double>(q.x), static_cast<double>(q.y)};
    const auto ring = polygon.vertices();
    const std::size_t n = ring.size();
    bool inside = false;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point2& a = ring[i];
        const Point2& b = ring[j];
        if (detail::on_segment(p, a, b)) return false;
        if ((a.y > p.y) != (b.y > p.y)) {
            const double x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if (p.x < x_cross) inside = !inside;
        }
    }
    return inside;
}

}  // namespace desirelines
