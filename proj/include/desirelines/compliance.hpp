#pragma once

// Design compliance: corridor tests against designed paths, mismatch
// accounting, time-on-screen statistics and forbidden-zone events.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "desirelines/core.hpp"
#include "desirelines/endpoint_cluster.hpp"
#include "desirelines/error.hpp"
#include "desirelines/ingest.hpp"
#include "desirelines/path_cluster.hpp"
#include "desirelines/preprocess.hpp"

namespace desirelines {

enum class ClassificationMode {
    medoid,          // every member inherits the verdict of the cluster medoid
    per_trajectory,  // each member is tested on its own
};

inline std::string to_string(ClassificationMode m) {
    return m == ClassificationMode::medoid ? "medoid" : "per_trajectory";
}

inline ClassificationMode parse_classification_mode(std::string_view s) {
    if (s == "medoid") return ClassificationMode::medoid;
    if (s == "per_trajectory") return ClassificationMode::per_trajectory;
    throw InputError("unknown classification mode '" + std::string(s) + "'");
}

struct ComplianceParams {
    double deviation_threshold{12.0};  // reference pixels
    double deviation_quantile{0.9};
    std::size_t zone_min_points{3};
    ClassificationMode mode{ClassificationMode::medoid};

    void validate() const {
        if (!(deviation_threshold > 0)) throw InputError("deviation_threshold must be positive");
        if (!(deviation_quantile > 0 && deviation_quantile <= 1))
            throw InputError("deviation_quantile must lie in (0, 1]");
        if (zone_min_points < 1) throw InputError("zone_min_points must be at least 1");
    }

    ComplianceParams scaled_to(const Resolution& r) const {
        ComplianceParams p = *this;
        p.deviation_threshold *= pixel_scale(r);
        return p;
    }
};

struct Deviation {
    double max_dev{0};
    double quantile_dev{0};
    double within_fraction{1};
};

/// Distances from each sample to `design`: the maximum, the nearest-rank
/// quantile at `p.deviation_quantile`, and the fraction within the threshold.
inline Deviation trajectory_deviation(std::span<const Point2> samples, const Polyline& design,
                                      const ComplianceParams& p) {
    if (samples.empty()) throw std::invalid_argument("trajectory_deviation: no samples");
    std::vector<double> d;
    d.reserve(samples.size());
    for (const auto& s : samples) d.push_back(point_to_polyline(s, design));
    std::sort(d.begin(), d.end());
    const double n = static_cast<double>(d.size());
    const auto rank = static_cast<std::size_t>(std::ceil(p.deviation_quantile * n));
    Deviation out;
    out.max_dev = d.back();
    out.quantile_dev = d[std::clamp<std::size_t>(rank, 1, d.size()) - 1];
    const auto within = std::upper_bound(d.begin(), d.end(), p.deviation_threshold) - d.begin();
    out.within_fraction = static_cast<double>(within) / n;
    return out;
}

inline Deviation trajectory_deviation(const ResampledPath& path, const Polyline& design, const ComplianceParams& p) {
    return trajectory_deviation(path.samples, design, p);
}

struct PathVerdict {
    bool compliant{false};
    std::optional<std::size_t> matched_design;  // position in the candidate list
    Deviation deviation;
    std::string reason;  // empty when compliant
};

/// Tests `samples` against every candidate design and keeps the best match
/// (highest within-fraction, then lowest quantile deviation, then list order).
inline PathVerdict classify_path(std::span<const Point2> samples, std::span<const DesignedPath* const> designs,
                                 const ComplianceParams& p) {
    PathVerdict v;
    if (designs.empty()) {
        v.reason = "no designed path";
        v.deviation = {};
        return v;
    }
    for (std::size_t i = 0; i < designs.size(); ++i) {
        const Deviation d = trajectory_deviation(samples, designs[i]->polyline, p);
        const bool better = !v.matched_design || d.within_fraction > v.deviation.within_fraction ||
                            (d.within_fraction == v.deviation.within_fraction &&
                             d.quantile_dev < v.deviation.quantile_dev);
        if (better) {
            v.matched_design = i;
            v.deviation = d;
        }
    }
    v.compliant = v.deviation.within_fraction >= p.deviation_quantile;
    if (!v.compliant) v.reason = "outside corridor";
    return v;
}

struct ClusterCompliance {
    int sd_label{0};
    int path_index{1};
    std::size_t size{0};
    std::string medoid_id;
    bool compliant{false};  // verdict on the medoid
    std::optional<std::size_t> matched_design;
    Deviation medoid_deviation;
    std::string reason;
    std::size_t compliant_members{0};
    std::vector<std::pair<std::string, bool>> members;  // id order of the path-cluster
};

/// Classifies a path-cluster against the designs of its SD pair. `paths`
/// maps trajectory id to its resampled path.
inline ClusterCompliance classify_cluster(const PathCluster& pc,
                                          const std::unordered_map<std::string, const ResampledPath*>& paths,
                                          std::span<const DesignedPath* const> designs, const ComplianceParams& p) {
    p.validate();
    auto samples_of = [&](const std::string& id) -> std::span<const Point2> {
        auto it = paths.find(id);
        if (it == paths.end()) throw std::invalid_argument("classify_cluster: no resampled path for '" + id + "'");
        return it->second->samples;
    };
    ClusterCompliance out;
    out.sd_label = pc.sd_label;
    out.path_index = pc.index;
    out.size = pc.size();
    out.medoid_id = pc.medoid_id;
    const PathVerdict verdict = classify_path(samples_of(pc.medoid_id), designs, p);
    out.compliant = verdict.compliant;
    out.matched_design = verdict.matched_design;
    out.medoid_deviation = verdict.deviation;
    out.reason = verdict.reason;
    for (const auto& id : pc.member_ids) {
        const bool ok = p.mode == ClassificationMode::medoid ? verdict.compliant
                                                             : classify_path(samples_of(id), designs, p).compliant;
        out.members.emplace_back(id, ok);
        out.compliant_members += ok ? 1 : 0;
    }
    return out;
}

struct DurationStats {
    double mean{0};
    double median{0};
    double min{0};
    double max{0};
};

inline DurationStats duration_stats(std::span<const double> durations) {
    if (durations.empty()) throw std::invalid_argument("duration_stats: empty member set");
    std::vector<double> d(durations.begin(), durations.end());
    std::sort(d.begin(), d.end());
    double sum = 0;
    for (const double x : d) sum += x;
    const std::size_t n = d.size();
    DurationStats s;
    s.mean = sum / static_cast<double>(n);
    s.median = n % 2 ? d[n / 2] : 0.5 * (d[n / 2 - 1] + d[n / 2]);
    s.min = d.front();
    s.max = d.back();
    return s;
}

/// Time-on-screen statistics over the raw timestamps of `members`.
inline DurationStats duration_stats(const TrajectorySet& set, std::span<const std::string> members) {
    const auto index = set.index_by_id();
    std::vector<double> durations;
    durations.reserve(members.size());
    for (const auto& id : members) {
        auto it = index.find(id);
        if (it == index.end()) throw std::invalid_argument("duration_stats: unknown trajectory '" + id + "'");
        durations.push_back(set.trajectories[it->second].duration());
    }
    return duration_stats(durations);
}

struct ZoneEvent {
    std::string traj_id;
    std::string zone;
    double first_entry_t{0};

    friend bool operator==(const ZoneEvent&, const ZoneEvent&) = default;
};

/// One event per (trajectory, zone) once `zone_min_points` consecutive points
/// lie strictly inside the zone; the event time is the start of that run.
inline std::vector<ZoneEvent> forbidden_zone_events(const TrajectorySet& set, std::span<const ForbiddenZone> zones,
                                                    const ComplianceParams& p) {
    p.validate();
    std::vector<ZoneEvent> events;
    for (const auto& traj : set.trajectories) {
        for (const auto& zone : zones) {
            std::size_t run = 0;
            double run_start = 0;
            for (const auto& pt : traj.points()) {
                if (!strictly_inside(pt, zone.polygon)) {
                    run = 0;
                    continue;
                }
                if (run++ == 0) run_start = pt.t;
                if (run >= p.zone_min_points) {
                    events.push_back({traj.id(), zone.name, run_start});
                    break;
                }
            }
        }
    }
    return events;
}

/// Trajectories starting within `snap` of the source gate and ending within
/// `snap` of the destination gate, in set order, regardless of clustering.
inline std::vector<std::string> raw_sd_query(const TrajectorySet& set, const SceneSpec& scene,
                                             std::string_view source, std::string_view destination, double snap) {
    const Gate* src = scene.find_gate(source);
    const Gate* dst = scene.find_gate(destination);
    if (!src) throw InputError("unknown gate '" + std::string(source) + "'");
    if (!dst) throw InputError("unknown gate '" + std::string(destination) + "'");
    std::vector<std::string> out;
    for (const auto& traj : set.trajectories)
        if (euclidean(traj.front(), src->position) <= snap && euclidean(traj.back(), dst->position) <= snap)
            out.push_back(traj.id());
    return out;
}

struct PathClusterReport {
    int sd_label{0};
    int path_index{1};
    std::size_t size{0};
    std::string medoid_id;
    bool compliant{false};
    std::size_t compliant_members{0};
    std::optional<std::string> matched_design;
    std::string reason;
    Deviation medoid_deviation;
    DurationStats durations;
};

struct SDPairReport {
    int sd_label{0};
    std::optional<std::string> source_gate;
    std::optional<std::string> dest_gate;
    std::size_t size{0};
    std::size_t compliant{0};
    std::size_t non_compliant{0};
    double mismatch_fraction{0};
    std::size_t path_clusters{0};
};

struct ComplianceReport {
    std::vector<PathClusterReport> path_clusters;
    std::vector<SDPairReport> sd_pairs;
    std::size_t total_trajectories{0};
    std::size_t total_non_compliant{0};
    double mismatch_fraction{0};
    std::vector<ZoneEvent> zone_events;
    std::size_t wrong_way_trajectories{0};
};

inline std::string design_label(const DesignedPath& d, std::size_t ordinal) {
    return d.source + "->" + d.destination + (ordinal ? "#" + std::to_string(ordinal + 1) : "");
}

/// Aggregates classified path-clusters into per-SD and scene-wide counts.
/// Throws std::logic_error if path-cluster sizes do not add up to their
/// SD-cluster, so any accounting slip is caught.
inline ComplianceReport mismatch_report(const std::vector<SDCluster>& sd_clusters,
                                        const std::vector<ClusterCompliance>& classified, const TrajectorySet& set,
                                        const SceneSpec& scene, std::vector<ZoneEvent> zone_events = {}) {
    ComplianceReport report;
    const auto index = set.index_by_id();
    std::map<int, std::vector<const ClusterCompliance*>> by_sd;
    for (const auto& c : classified) by_sd[c.sd_label].push_back(&c);

    for (const auto& sd : sd_clusters) {
        SDPairReport pair;
        pair.sd_label = sd.label;
        pair.source_gate = sd.source_gate;
        pair.dest_gate = sd.dest_gate;
        pair.size = sd.size();
        std::vector<const DesignedPath*> designs;
        if (sd.source_gate && sd.dest_gate) designs = scene.designs_between(*sd.source_gate, *sd.dest_gate);
        std::size_t members = 0;
        for (const auto* c : by_sd[sd.label]) {
            members += c->size;
            pair.compliant += c->compliant_members;
            ++pair.path_clusters;

            PathClusterReport pc;
            pc.sd_label = c->sd_label;
            pc.path_index = c->path_index;
            pc.size = c->size;
            pc.medoid_id = c->medoid_id;
            pc.compliant = c->compliant;
            pc.compliant_members = c->compliant_members;
            if (c->matched_design) {
                const DesignedPath* d = designs.at(*c->matched_design);
                pc.matched_design = design_label(*d, *c->matched_design);
            }
            pc.reason = c->reason;
            pc.medoid_deviation = c->medoid_deviation;
            std::vector<double> durations;
            for (const auto& [id, _] : c->members) durations.push_back(set.trajectories.at(index.at(id)).duration());
            pc.durations = duration_stats(durations);
            report.path_clusters.push_back(std::move(pc));
        }
        if (members != sd.size())
            throw std::logic_error("path-clusters of SD " + std::to_string(sd.label) + " cover " +
                                   std::to_string(members) + " of " + std::to_string(sd.size()) + " members");
        pair.non_compliant = pair.size - pair.compliant;
        pair.mismatch_fraction = pair.size ? static_cast<double>(pair.non_compliant) / pair.size : 0.0;
        report.total_trajectories += pair.size;
        report.total_non_compliant += pair.non_compliant;
        report.sd_pairs.push_back(std::move(pair));
    }
    report.mismatch_fraction = report.total_trajectories
                                   ? static_cast<double>(report.total_non_compliant) / report.total_trajectories
                                   : 0.0;
    std::vector<std::string> wrong_way;
    for (const auto& e : zone_events) wrong_way.push_back(e.traj_id);
    std::sort(wrong_way.begin(), wrong_way.end());
    report.wrong_way_trajectories =
        static_cast<std::size_t>(std::unique(wrong_way.begin(), wrong_way.end()) - wrong_way.begin());
    report.zone_events = std::move(zone_events);
    return report;
}

}  // namespace desirelines
