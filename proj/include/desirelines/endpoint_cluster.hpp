#pragma once

// Source-destination clustering: DBSCAN over 4-D endpoint vectors, followed by
// declarative merge/discard directives and gate assignment.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "desirelines/core.hpp"
#include "desirelines/error.hpp"
#include "desirelines/ingest.hpp"
#include "desirelines/parallel.hpp"
#include "desirelines/preprocess.hpp"

namespace desirelines {

inline constexpr int kNoiseLabel = -1;

struct EndpointVector {
    double sx{0}, sy{0}, dx{0}, dy{0};

    friend bool operator==(const EndpointVector&, const EndpointVector&) = default;
};

inline EndpointVector endpoint_vector(const Trajectory& traj) noexcept {
    return {traj.front().x, traj.front().y, traj.back().x, traj.back().y};
}

inline double endpoint_distance(const EndpointVector& a, const EndpointVector& b) noexcept {
    const double d0 = a.sx - b.sx;
    const double d1 = a.sy - b.sy;
    const double d2 = a.dx - b.dx;
    const double d3 = a.dy - b.dy;
    return std::sqrt(d0 * d0 + d1 * d1 + d2 * d2 + d3 * d3);
}

struct ClusterParams {
    double eps{8.0};  // reference-resolution pixels
    std::size_t min_pts{25};

    void validate() const {
        if (!(eps > 0) || !std::isfinite(eps)) throw InputError("eps must be positive");
        if (min_pts < 1) throw InputError("min_pts must be at least 1");
    }

    ClusterParams scaled_to(const Resolution& r) const {
        ClusterParams p = *this;
        p.eps *= pixel_scale(r);
        return p;
    }
};

namespace detail {

class DisjointSets {
public:
    explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent_[std::max(a, b)] = std::min(a, b);
    }

private:
    std::vector<std::size_t> parent_;
};

}  // namespace detail

/// DBSCAN over endpoint vectors with a closed eps-ball that counts the point
/// itself. A border point joins the cluster of its nearest core neighbour;
/// equidistant cores are resolved by the smallest `tie_rank` (index order when
/// `tie_rank` is empty). Cluster labels are numbered 0.. by the smallest rank
/// among their members, so they do not depend on input order.
inline std::vector<int> dbscan(std::span<const EndpointVector> points, const ClusterParams& params,
                               std::span<const std::size_t> tie_rank = {}, unsigned threads = 1) {
    params.validate();
    const std::size_t n = points.size();
    std::vector<std::size_t> rank_storage;
    if (tie_rank.empty()) {
        rank_storage.resize(n);
        std::iota(rank_storage.begin(), rank_storage.end(), 0);
        tie_rank = rank_storage;
    }
    if (tie_rank.size() != n) throw std::invalid_argument("dbscan: tie_rank size mismatch");

    std::vector<std::size_t> neighbours(n, 0);
    parallel_for(n, threads, [&](std::size_t i) {
        std::size_t count = 0;
        for (std::size_t j = 0; j < n; ++j)
            if (endpoint_distance(points[i], points[j]) <= params.eps) ++count;
        neighbours[i] = count;
    });
    std::vector<char> core(n);
    for (std::size_t i = 0; i < n; ++i) core[i] = neighbours[i] >= params.min_pts;

    detail::DisjointSets sets(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!core[i]) continue;
        for (std::size_t j = i + 1; j < n; ++j)
            if (core[j] && endpoint_distance(points[i], points[j]) <= params.eps) sets.unite(i, j);
    }

    // Border points: nearest core within eps.
    constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> anchor(n, kNone);
    parallel_for(n, threads, [&](std::size_t i) {
        if (core[i]) {
            anchor[i] = i;
            return;
        }
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_j = kNone;
        for (std::size_t j = 0; j < n; ++j) {
            if (!core[j]) continue;
            const double d = endpoint_distance(points[i], points[j]);
            if (d > params.eps) continue;
            if (d < best || (d == best && tie_rank[j] < tie_rank[best_j])) {
                best = d;
                best_j = j;
            }
        }
        anchor[i] = best_j;
    });

    // Canonical labels: clusters ordered by their smallest member rank.
    std::map<std::size_t, std::size_t> min_rank_of_root;
    for (std::size_t i = 0; i < n; ++i) {
        if (anchor[i] == kNone) continue;
        const std::size_t root = sets.find(anchor[i]);
        auto [it, inserted] = min_rank_of_root.try_emplace(root, tie_rank[i]);
        if (!inserted) it->second = std::min(it->second, tie_rank[i]);
    }
    std::vector<std::pair<std::size_t, std::size_t>> by_rank;
    for (const auto& [root, r] : min_rank_of_root) by_rank.emplace_back(r, root);
    std::sort(by_rank.begin(), by_rank.end());
    std::map<std::size_t, int> label_of_root;
    for (std::size_t k = 0; k < by_rank.size(); ++k) label_of_root[by_rank[k].second] = static_cast<int>(k);

    std::vector<int> labels(n, kNoiseLabel);
    for (std::size_t i = 0; i < n; ++i)
        if (anchor[i] != kNone) labels[i] = label_of_root[sets.find(anchor[i])];
    return labels;
}

struct SDCluster {
    int label{0};
    std::vector<std::string> member_ids;  // sorted by id_less
    std::optional<std::string> source_gate;
    std::optional<std::string> dest_gate;
    EndpointVector centroid;

    std::size_t size() const noexcept { return member_ids.size(); }

    std::string name() const {
        if (source_gate && dest_gate) return *source_gate + "->" + *dest_gate;
        return "SD" + std::to_string(label);
    }
};

namespace detail {

inline bool larger_cluster_first(const SDCluster& a, const SDCluster& b) {
    if (a.size() != b.size()) return a.size() > b.size();
    return id_less(a.member_ids.front(), b.member_ids.front());
}

inline void relabel_by_size(std::vector<SDCluster>& clusters) {
    std::sort(clusters.begin(), clusters.end(), larger_cluster_first);
    for (std::size_t i = 0; i < clusters.size(); ++i) clusters[i].label = static_cast<int>(i);
}

}  // namespace detail

struct EndpointClustering {
    std::vector<SDCluster> clusters;     // labeled 0.. in decreasing size order
    std::vector<std::string> noise_ids;  // sorted by id_less
    /// SD label per input trajectory (input order), kNoiseLabel for noise.
    std::vector<int> labels;
};

/// Runs DBSCAN on the endpoint vectors of `set` and groups trajectories into
/// SD-clusters labeled by decreasing size (ties: smallest member id).
inline EndpointClustering cluster_endpoints(const TrajectorySet& set, const ClusterParams& params,
                                            unsigned threads = 1) {
    std::vector<EndpointVector> vectors;
    std::vector<std::string> ids;
    vectors.reserve(set.size());
    ids.reserve(set.size());
    for (const auto& traj : set.trajectories) {
        vectors.push_back(endpoint_vector(traj));
        ids.push_back(traj.id());
    }
    const auto ranks = id_ranks(ids);
    const auto raw = set.size() == 0 ? std::vector<int>{} : dbscan(vectors, params, ranks, threads);

    EndpointClustering out;
    std::map<int, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] == kNoiseLabel) out.noise_ids.push_back(ids[i]);
        else members[raw[i]].push_back(i);
    }
    std::sort(out.noise_ids.begin(), out.noise_ids.end(), IdLess{});
    for (auto& [label, idx] : members) {
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return ranks[a] < ranks[b]; });
        SDCluster c;
        EndpointVector sum;
        for (const auto i : idx) {
            c.member_ids.push_back(ids[i]);
            sum.sx += vectors[i].sx;
            sum.sy += vectors[i].sy;
            sum.dx += vectors[i].dx;
            sum.dy += vectors[i].dy;
        }
        const double n = static_cast<double>(idx.size());
        c.centroid = {sum.sx / n, sum.sy / n, sum.dx / n, sum.dy / n};
        out.clusters.push_back(std::move(c));
    }
    detail::relabel_by_size(out.clusters);

    std::map<std::string, int> label_of_id;
    for (const auto& c : out.clusters)
        for (const auto& id : c.member_ids) label_of_id[id] = c.label;
    out.labels.assign(set.size(), kNoiseLabel);
    for (std::size_t i = 0; i < set.size(); ++i)
        if (auto it = label_of_id.find(ids[i]); it != label_of_id.end()) out.labels[i] = it->second;
    return out;
}

struct DiscardDirective {
    int label{0};
    std::string reason;
};

/// Auditable replacement for manual merge/discard decisions on raw SD labels.
struct Directives {
    std::vector<std::vector<int>> merges;
    std::vector<DiscardDirective> discards;

    bool empty() const noexcept { return merges.empty() && discards.empty(); }

    /// Throws InputError when a label is unknown, repeated across merge sets,
    /// or both merged and discarded.
    void validate(const std::vector<SDCluster>& clusters) const {
        std::set<int> known;
        for (const auto& c : clusters) known.insert(c.label);
        std::set<int> merged;
        for (const auto& group : merges) {
            if (group.empty()) throw InputError("directives: empty merge set");
            for (const int label : group) {
                if (!known.count(label)) throw InputError("directives: unknown label " + std::to_string(label));
                if (!merged.insert(label).second)
                    throw InputError("directives: label " + std::to_string(label) + " appears in overlapping merge sets");
            }
        }
        std::set<int> dropped;
        for (const auto& d : discards) {
            if (!known.count(d.label)) throw InputError("directives: unknown label " + std::to_string(d.label));
            if (merged.count(d.label))
                throw InputError("directives: label " + std::to_string(d.label) + " is both merged and discarded");
            if (!dropped.insert(d.label).second)
                throw InputError("directives: label " + std::to_string(d.label) + " discarded twice");
        }
    }
};

inline Directives parse_directives(std::istream& in) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("directives file is not valid JSON: ") + e.what());
    }
    Directives d;
    try {
        for (const auto& [key, _] : doc.items())
            if (key != "merges" && key != "discards") throw InputError("directives file has unknown key '" + key + "'");
        for (const auto& group : doc.value("merges", nlohmann::json::array()))
            d.merges.push_back(group.get<std::vector<int>>());
        for (const auto& entry : doc.value("discards", nlohmann::json::array()))
            d.discards.push_back({entry.at("label").get<int>(), entry.value("reason", std::string("unspecified"))});
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("directives file: ") + e.what());
    }
    return d;
}

inline nlohmann::ordered_json directives_to_json(const Directives& d) {
    nlohmann::ordered_json doc;
    doc["merges"] = d.merges;
    doc["discards"] = nlohmann::ordered_json::array();
    for (const auto& x : d.discards) doc["discards"].push_back({{"label", x.label}, {"reason", x.reason}});
    return doc;
}

struct DirectiveResult {
    std::vector<SDCluster> clusters;  // relabeled 0.. by decreasing size
    std::vector<Discard> discarded;   // members of discarded clusters
};

inline DirectiveResult apply_directives(const std::vector<SDCluster>& clusters, const Directives& d) {
    d.validate(clusters);
    std::map<int, const SDCluster*> by_label;
    for (const auto& c : clusters) by_label[c.label] = &c;

    DirectiveResult out;
    std::set<int> consumed;
    for (const auto& group : d.merges) {
        std::vector<int> labels = group;
        std::sort(labels.begin(), labels.end());
        SDCluster merged;
        EndpointVector sum;
        double n = 0;
        for (const int label : labels) {
            const SDCluster& c = *by_label.at(label);
            consumed.insert(label);
            merged.member_ids.insert(merged.member_ids.end(), c.member_ids.begin(), c.member_ids.end());
            const double w = static_cast<double>(c.size());
            sum.sx += w * c.centroid.sx;
            sum.sy += w * c.centroid.sy;
            sum.dx += w * c.centroid.dx;
            sum.dy += w * c.centroid.dy;
            n += w;
        }
        std::sort(merged.member_ids.begin(), merged.member_ids.end(), IdLess{});
        merged.centroid = {sum.sx / n, sum.sy / n, sum.dx / n, sum.dy / n};
        out.clusters.push_back(std::move(merged));
    }
    for (const auto& drop : d.discards) {
        consumed.insert(drop.label);
        for (const auto& id : by_label.at(drop.label)->member_ids)
            out.discarded.push_back({id, "directive: " + drop.reason});
    }
    for (const auto& c : clusters) {
        if (consumed.count(c.label)) continue;
        SDCluster copy = c;
        copy.source_gate.reset();
        copy.dest_gate.reset();
        out.clusters.push_back(std::move(copy));
    }
    detail::relabel_by_size(out.clusters);
    std::sort(out.discarded.begin(), out.discarded.end(),
              [](const Discard& a, const Discard& b) { return id_less(a.id, b.id); });
    return out;
}

/// Nearest gate to `p` within `snap`, ties broken by gate name.
inline std::optional<std::string> nearest_gate(const Point2& p, const SceneSpec& scene, double snap) {
    std::optional<std::string> best;
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& g : scene.gates) {
        const double d = euclidean(p, g.position);
        if (d > snap) continue;
        if (d < best_d || (d == best_d && g.name < *best)) {
            best_d = d;
            best = g.name;
        }
    }
    return best;
}

inline std::vector<SDCluster> assign_gates(std::vector<SDCluster> clusters, const SceneSpec& scene, double snap) {
    for (auto& c : clusters) {
        c.source_gate = nearest_gate({c.centroid.sx, c.centroid.sy}, scene, snap);
        c.dest_gate = nearest_gate({c.centroid.dx, c.centroid.dy}, scene, snap);
    }
    return clusters;
}

}  // namespace desirelines
