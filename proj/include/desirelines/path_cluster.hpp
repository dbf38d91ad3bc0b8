#pragma once

// Shape clustering inside an SD-cluster: dynamic time warping distances over
// resampled paths and deterministic agglomerative clustering of the matrix.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "desirelines/core.hpp"
#include "desirelines/error.hpp"
#include "desirelines/parallel.hpp"
#include "desirelines/preprocess.hpp"
#include "desirelines/text.hpp"

namespace desirelines {

/// Accumulated-cost DTW with Euclidean local cost. `band` is an optional
/// Sakoe-Chiba half-width as a fraction of the longer sequence; values >= 1
/// leave the warping window unconstrained.
inline double dtw_distance(std::span<const Point2> a, std::span<const Point2> b, double band = 1.0) {
    if (a.empty() || b.empty()) throw std::invalid_argument("dtw_distance: empty sequence");
    const std::size_t n = a.size();
    const std::size_t m = b.size();
    const std::size_t longest = std::max(n, m);
    const std::size_t gap = n > m ? n - m : m - n;
    const std::size_t radius =
        band >= 1.0 ? longest : std::max(gap, static_cast<std::size_t>(std::ceil(std::max(band, 0.0) * longest)));
    constexpr double inf = std::numeric_limits<double>::infinity();

    std::vector<double> prev(m, inf);
    std::vector<double> cur(m, inf);
    for (std::size_t i = 0; i < n; ++i) {
        std::fill(cur.begin(), cur.end(), inf);
        const std::size_t lo = i > radius ? i - radius : 0;
        const std::size_t hi = std::min(m - 1, i + radius);
        for (std::size_t j = lo; j <= hi; ++j) {
            const double cost = euclidean(a[i], b[j]);
            if (i == 0 && j == 0) {
                cur[j] = cost;
                continue;
            }
            double best = inf;
            if (i > 0) best = std::min(best, prev[j]);
            if (j > 0) best = std::min(best, cur[j - 1]);
            if (i > 0 && j > 0) best = std::min(best, prev[j - 1]);
            cur[j] = cost + best;
        }
        std::swap(prev, cur);
    }
    return prev[m - 1];
}

inline double dtw_distance(const ResampledPath& a, const ResampledPath& b, double band = 1.0) {
    return dtw_distance(a.samples, b.samples, band);
}

/// Symmetric pairwise distances with zero diagonal, stored as the strict
/// upper triangle.
class DistanceMatrix {
public:
    DistanceMatrix() = default;
    explicit DistanceMatrix(std::vector<std::string> ids)
        : ids_(std::move(ids)), values_(ids_.size() * (ids_.size() - (ids_.empty() ? 0 : 1)) / 2, 0.0) {}

    std::size_t size() const noexcept { return ids_.size(); }
    const std::vector<std::string>& id_order() const noexcept { return ids_; }

    double at(std::size_t i, std::size_t j) const noexcept {
        if (i == j) return 0.0;
        return values_[index(i, j)];
    }

    void set(std::size_t i, std::size_t j, double v) {
        if (i == j) return;
        if (!(v >= 0) || !std::isfinite(v)) throw std::invalid_argument("distance must be finite and non-negative");
        values_[index(i, j)] = v;
    }

private:
    std::size_t index(std::size_t i, std::size_t j) const noexcept {
        if (i > j) std::swap(i, j);
        const std::size_t n = ids_.size();
        return i * n - i * (i + 1) / 2 + (j - i - 1);
    }

    std::vector<std::string> ids_;
    std::vector<double> values_;
};

inline DistanceMatrix distance_matrix(std::span<const ResampledPath> paths, unsigned threads = 1, double band = 1.0) {
    std::vector<std::string> ids;
    ids.reserve(paths.size());
    for (const auto& p : paths) {
        if (p.samples.size() != paths.front().samples.size())
            throw std::invalid_argument("distance_matrix: paths have different sample counts");
        ids.push_back(p.source_id);
    }
    DistanceMatrix m(std::move(ids));
    parallel_for(paths.size(), threads, [&](std::size_t i) {
        for (std::size_t j = i + 1; j < paths.size(); ++j) m.set(i, j, dtw_distance(paths[i], paths[j], band));
    });
    return m;
}

inline void write_distance_matrix(std::ostream& out, const DistanceMatrix& m) {
    for (std::size_t i = 0; i < m.size(); ++i) out << (i ? " " : "") << m.id_order()[i];
    out << '\n';
    for (std::size_t i = 0; i < m.size(); ++i) {
        for (std::size_t j = 0; j < m.size(); ++j) out << (j ? " " : "") << text::shortest(m.at(i, j));
        out << '\n';
    }
}

/// Member minimizing summed distance to the other members; ties go to the
/// smallest id. Returns an index into `m`.
inline std::size_t medoid_index(const DistanceMatrix& m, std::span<const std::size_t> members) {
    if (members.empty()) throw std::invalid_argument("medoid of an empty set");
    std::size_t best = members.front();
    double best_sum = std::numeric_limits<double>::infinity();
    for (const auto i : members) {
        double sum = 0;
        for (const auto j : members) sum += m.at(i, j);
        if (sum < best_sum || (sum == best_sum && id_less(m.id_order()[i], m.id_order()[best]))) {
            best_sum = sum;
            best = i;
        }
    }
    return best;
}

inline std::string medoid(const DistanceMatrix& m, std::span<const std::size_t> members) {
    return m.id_order()[medoid_index(m, members)];
}

enum class Linkage { average, complete };

inline std::string to_string(Linkage l) { return l == Linkage::average ? "average" : "complete"; }

inline Linkage parse_linkage(std::string_view s) {
    if (s == "average") return Linkage::average;
    if (s == "complete") return Linkage::complete;
    throw InputError("unknown linkage '" + std::string(s) + "'");
}

/// Default dendrogram cut: mean per-sample separation of 6 reference pixels,
/// accumulated over `k` samples.
inline double default_distance_threshold(std::size_t k) { return 6.0 * static_cast<double>(k); }

struct PathClusterParams {
    Linkage linkage{Linkage::average};
    std::optional<std::size_t> target_count;
    std::optional<double> distance_threshold{default_distance_threshold(kDefaultResampleCount)};
    std::size_t min_cluster_size{1};
    double band{1.0};

    void validate() const {
        if (target_count.has_value() == distance_threshold.has_value())
            throw InputError("path clustering needs exactly one of target_count or distance_threshold");
        if (target_count && *target_count == 0) throw InputError("target_count must be positive");
        if (distance_threshold && !(*distance_threshold > 0)) throw InputError("distance_threshold must be positive");
        if (min_cluster_size == 0) throw InputError("min_cluster_size must be positive");
        if (!(band > 0)) throw InputError("band must be positive");
    }
};

struct PathCluster {
    int sd_label{0};
    int index{1};                         // 1-based, by decreasing size
    std::vector<std::string> member_ids;  // sorted by id_less
    std::string medoid_id;

    std::size_t size() const noexcept { return member_ids.size(); }
};

namespace detail {

struct MergeKey {
    double distance;
    std::size_t low_rank;
    std::size_t high_rank;

    bool operator<(const MergeKey& o) const noexcept {
        if (distance != o.distance) return distance < o.distance;
        if (low_rank != o.low_rank) return low_rank < o.low_rank;
        return high_rank < o.high_rank;
    }
};

}  // namespace detail

/// Agglomerative clustering of `m`, cut by target count or distance threshold.
/// Merges with equal linkage distance are taken in order of the smallest pair
/// of member ids, so the dendrogram is independent of row order.
inline std::vector<PathCluster> cluster_paths(const DistanceMatrix& m, const PathClusterParams& params,
                                              int sd_label = 0) {
    params.validate();
    const std::size_t n = m.size();
    if (params.target_count && *params.target_count > n)
        throw InputError("target_count " + std::to_string(*params.target_count) + " exceeds " + std::to_string(n) +
                         " paths");
    if (n == 0) return {};

    const auto rank = id_ranks(m.id_order());
    DistanceMatrix work = m;
    std::vector<std::vector<std::size_t>> members(n);
    std::vector<std::size_t> rep(n);
    std::vector<char> active(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        members[i] = {i};
        rep[i] = rank[i];
    }
    auto key = [&](std::size_t i, std::size_t j) {
        return detail::MergeKey{work.at(i, j), std::min(rep[i], rep[j]), std::max(rep[i], rep[j])};
    };

    constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> nearest(n, kNone);
    auto rescan = [&](std::size_t i) {
        nearest[i] = kNone;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i || !active[j]) continue;
            if (nearest[i] == kNone || key(i, j) < key(i, nearest[i])) nearest[i] = j;
        }
    };
    for (std::size_t i = 0; i < n; ++i) rescan(i);

    std::size_t remaining = n;
    while (remaining > 1) {
        std::size_t a = kNone;
        for (std::size_t i = 0; i < n; ++i) {
            if (!active[i] || nearest[i] == kNone) continue;
            if (a == kNone || key(i, nearest[i]) < key(a, nearest[a])) a = i;
        }
        const std::size_t b = nearest[a];
        const double d = work.at(a, b);
        if (params.target_count ? remaining <= *params.target_count : d > *params.distance_threshold) break;

        const std::size_t keep = std::min(a, b);
        const std::size_t gone = std::max(a, b);
        const double size_keep = static_cast<double>(members[keep].size());
        const double size_gone = static_cast<double>(members[gone].size());
        for (std::size_t k = 0; k < n; ++k) {
            if (!active[k] || k == keep || k == gone) continue;
            const double dk = work.at(k, keep);
            const double dg = work.at(k, gone);
            const double merged = params.linkage == Linkage::complete
                                      ? std::max(dk, dg)
                                      : (size_keep * dk + size_gone * dg) / (size_keep + size_gone);
            work.set(k, keep, merged);
        }
        members[keep].insert(members[keep].end(), members[gone].begin(), members[gone].end());
        members[gone].clear();
        rep[keep] = std::min(rep[keep], rep[gone]);
        active[gone] = 0;
        --remaining;

        rescan(keep);
        for (std::size_t k = 0; k < n; ++k) {
            if (!active[k] || k == keep) continue;
            if (nearest[k] == keep || nearest[k] == gone) rescan(k);
            else if (key(k, keep) < key(k, nearest[k])) nearest[k] = keep;
        }
    }

    std::vector<std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < n; ++i)
        if (active[i]) groups.push_back(members[i]);

    if (params.min_cluster_size > 1) {
        std::vector<std::vector<std::size_t>> large;
        std::vector<std::size_t> orphans;
        for (auto& g : groups) {
            if (g.size() >= params.min_cluster_size) large.push_back(std::move(g));
            else orphans.insert(orphans.end(), g.begin(), g.end());
        }
        if (!large.empty()) {
            auto by_rank = [&](const std::vector<std::size_t>& g) {
                return *std::min_element(g.begin(), g.end(),
                                         [&](std::size_t x, std::size_t y) { return rank[x] < rank[y]; });
            };
            std::sort(large.begin(), large.end(),
                      [&](const auto& x, const auto& y) { return rank[by_rank(x)] < rank[by_rank(y)]; });
            std::vector<std::vector<std::size_t>> additions(large.size());
            for (const auto o : orphans) {
                std::size_t best = 0;
                double best_mean = std::numeric_limits<double>::infinity();
                for (std::size_t g = 0; g < large.size(); ++g) {
                    double sum = 0;
                    for (const auto j : large[g]) sum += m.at(o, j);
                    const double mean = sum / static_cast<double>(large[g].size());
                    if (mean < best_mean) {
                        best_mean = mean;
                        best = g;
                    }
                }
                additions[best].push_back(o);
            }
            for (std::size_t g = 0; g < large.size(); ++g)
                large[g].insert(large[g].end(), additions[g].begin(), additions[g].end());
            groups = std::move(large);
        }
    }

    for (auto& g : groups)
        std::sort(g.begin(), g.end(), [&](std::size_t x, std::size_t y) { return rank[x] < rank[y]; });
    std::sort(groups.begin(), groups.end(), [&](const auto& x, const auto& y) {
        if (x.size() != y.size()) return x.size() > y.size();
        return rank[x.front()] < rank[y.front()];
    });

    std::vector<PathCluster> out;
    out.reserve(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
        PathCluster pc;
        pc.sd_label = sd_label;
        pc.index = static_cast<int>(g + 1);
        for (const auto i : groups[g]) pc.member_ids.push_back(m.id_order()[i]);
        pc.medoid_id = medoid(m, groups[g]);
        out.push_back(std::move(pc));
    }
    return out;
}

}  // namespace desirelines
