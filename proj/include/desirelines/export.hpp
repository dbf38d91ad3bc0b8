#pragma once

// Output files for a pipeline run: assignment tables, the compliance report,
// a pixel-space GeoJSON overlay, SVG figures and the run manifest.

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "desirelines/pipeline.hpp"
#include "desirelines/text.hpp"

namespace desirelines {

using ordered_json = nlohmann::ordered_json;

/// Path-cluster colors, indexed by (path_index - 1) modulo the size.
inline constexpr std::array<const char*, 10> kPalette = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                                         "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

inline const char* palette_color(int path_index) {
    return kPalette[static_cast<std::size_t>(std::max(path_index - 1, 0)) % kPalette.size()];
}

namespace detail {

inline std::string sd_name(const SDCluster& sd) {
    return (sd.source_gate ? *sd.source_gate : std::string("?")) + "->" + (sd.dest_gate ? *sd.dest_gate : std::string("?"));
}

inline ordered_json optional_string(const std::optional<std::string>& s) {
    return s ? ordered_json(*s) : ordered_json();
}

inline void write_text(const std::filesystem::path& file, const std::string& body) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    out << body;
}

}  // namespace detail

inline std::string discards_csv(const PipelineResult& r) {
    std::ostringstream out;
    out << "traj_id,reason\n";
    for (const auto& d : r.discards) out << d.id << ',' << d.reason << '\n';
    return out.str();
}

/// Raw DBSCAN labels (before directives) of every kept trajectory; these are
/// the labels a directives file refers to.
inline std::string sd_assignments_csv(const PipelineResult& r) {
    std::ostringstream out;
    out << "traj_id,sd_label\n";
    const auto& kept = r.filtered.kept.trajectories;
    for (std::size_t i = 0; i < kept.size(); ++i) out << kept[i].id() << ',' << r.raw_clusters.labels[i] << '\n';
    return out.str();
}

inline std::string path_assignments_csv(const PipelineResult& r) {
    std::ostringstream out;
    out << "traj_id,sd_label,path_index\n";
    for (const auto& clusters : r.path_clusters)
        for (const auto& pc : clusters)
            for (const auto& id : pc.member_ids) out << id << ',' << pc.sd_label << ',' << pc.index << '\n';
    return out.str();
}

inline std::string trajectory_detail_csv(const PipelineResult& r) {
    std::ostringstream out;
    out << "traj_id,sd_label,path_index,compliant,duration_s\n";
    const auto index = r.filtered.kept.index_by_id();
    for (const auto& c : r.classified)
        for (const auto& [id, ok] : c.members)
            out << id << ',' << c.sd_label << ',' << c.path_index << ',' << (ok ? 1 : 0) << ','
                << text::fixed(r.filtered.kept.trajectories[index.at(id)].duration(), 3) << '\n';
    return out.str();
}

inline ordered_json report_to_json(const PipelineResult& r) {
    const ComplianceReport& rep = r.report;
    ordered_json doc;
    std::size_t clustered = 0;
    for (const auto& c : r.raw_clusters.clusters) clustered += c.size();
    std::map<std::string, std::size_t> discard_counts;
    for (const auto& d : r.discards) ++discard_counts[d.reason];

    doc["input_trajectories"] = r.input.size();
    doc["kept_after_filter"] = r.filtered.kept.size();
    doc["raw_sd_clusters"] = r.raw_clusters.clusters.size();
    doc["raw_clustered_trajectories"] = clustered;
    doc["sd_clusters"] = r.sd_clusters.size();
    doc["discards"] = discard_counts;
    doc["totals"] = {{"trajectories", rep.total_trajectories},
                     {"non_compliant", rep.total_non_compliant},
                     {"mismatch_fraction", rep.mismatch_fraction},
                     {"wrong_way_events", rep.zone_events.size()},
                     {"wrong_way_trajectories", rep.wrong_way_trajectories}};
    doc["sd_pairs"] = ordered_json::array();
    for (const auto& p : rep.sd_pairs)
        doc["sd_pairs"].push_back({{"sd_label", p.sd_label},
                                   {"source", detail::optional_string(p.source_gate)},
                                   {"destination", detail::optional_string(p.dest_gate)},
                                   {"size", p.size},
                                   {"path_clusters", p.path_clusters},
                                   {"compliant", p.compliant},
                                   {"non_compliant", p.non_compliant},
                                   {"mismatch_fraction", p.mismatch_fraction}});
    doc["path_clusters"] = ordered_json::array();
    for (const auto& pc : rep.path_clusters)
        doc["path_clusters"].push_back(
            {{"sd_label", pc.sd_label},
             {"path_index", pc.path_index},
             {"size", pc.size},
             {"medoid", pc.medoid_id},
             {"compliant", pc.compliant},
             {"compliant_members", pc.compliant_members},
             {"matched_design", detail::optional_string(pc.matched_design)},
             {"reason", pc.reason},
             {"medoid_deviation",
              {{"max", pc.medoid_deviation.max_dev},
               {"quantile", pc.medoid_deviation.quantile_dev},
               {"within_fraction", pc.medoid_deviation.within_fraction}}},
             {"duration_s",
              {{"mean", pc.durations.mean},
               {"median", pc.durations.median},
               {"min", pc.durations.min},
               {"max", pc.durations.max}}}});
    doc["wrong_way_events"] = ordered_json::array();
    for (const auto& e : rep.zone_events)
        doc["wrong_way_events"].push_back({{"traj_id", e.traj_id}, {"zone", e.zone}, {"first_entry_t", e.first_entry_t}});
    return doc;
}

inline std::string report_table(const PipelineResult& r) {
    const ComplianceReport& rep = r.report;
    std::ostringstream out;
    char line[256];
    out << "SD pairs\n";
    std::snprintf(line, sizeof(line), "%-6s %-22s %7s %7s %9s %9s\n", "label", "pair", "size", "paths", "non-comp",
                  "mismatch");
    out << line;
    for (std::size_t i = 0; i < rep.sd_pairs.size(); ++i) {
        const auto& p = rep.sd_pairs[i];
        std::snprintf(line, sizeof(line), "%-6d %-22s %7zu %7zu %9zu %8s%%\n", p.sd_label,
                      detail::sd_name(r.sd_clusters[i]).c_str(), p.size, p.path_clusters, p.non_compliant,
                      text::fixed(100.0 * p.mismatch_fraction, 1).c_str());
        out << line;
    }
    out << "\nPath clusters\n";
    std::snprintf(line, sizeof(line), "%-10s %7s %-10s %-16s %10s %10s %10s\n", "cluster", "size", "compliant",
                  "design", "q-dev px", "mean s", "median s");
    out << line;
    for (const auto& pc : rep.path_clusters) {
        const std::string name = std::to_string(pc.sd_label) + "." + std::to_string(pc.path_index);
        std::snprintf(line, sizeof(line), "%-10s %7zu %-10s %-16s %10s %10s %10s\n", name.c_str(), pc.size,
                      pc.compliant ? "yes" : "no", pc.matched_design ? pc.matched_design->c_str() : "-",
                      text::fixed(pc.medoid_deviation.quantile_dev, 2).c_str(),
                      text::fixed(pc.durations.mean, 2).c_str(), text::fixed(pc.durations.median, 2).c_str());
        out << line;
    }
    out << "\nTotal: " << rep.total_non_compliant << " of " << rep.total_trajectories
        << " trajectories not following a designed path (" << text::fixed(100.0 * rep.mismatch_fraction, 2)
        << "%)\n";
    out << "Wrong-way events: " << rep.zone_events.size() << " (" << rep.wrong_way_trajectories << " trajectories)\n";
    return out.str();
}

inline ordered_json geojson_overlay(const PipelineResult& r) {
    auto coords = [](std::span<const Point2> pts) {
        auto arr = ordered_json::array();
        for (const auto& p : pts) arr.push_back({p.x, p.y});
        return arr;
    };
    ordered_json doc;
    doc["type"] = "FeatureCollection";
    doc["properties"] = {
        {"coordinate_system", "image pixels, x to the right, y downwards; not geographic"},
        {"resolution", {r.scene.resolution.width, r.scene.resolution.height}},
    };
    doc["features"] = ordered_json::array();
    for (const auto& d : r.scene.designed_paths)
        doc["features"].push_back({{"type", "Feature"},
                                   {"geometry", {{"type", "LineString"}, {"coordinates", coords(d.polyline.vertices())}}},
                                   {"properties",
                                    {{"kind", "designed_path"},
                                     {"source", d.source},
                                     {"destination", d.destination},
                                     {"required_stops", d.required_stops},
                                     {"stroke", "#000000"},
                                     {"stroke-dasharray", "6 4"}}}});
    for (const auto& z : r.scene.forbidden_zones) {
        std::vector<Point2> ring(z.polygon.vertices().begin(), z.polygon.vertices().end());
        ring.push_back(ring.front());
        doc["features"].push_back({{"type", "Feature"},
                                   {"geometry", {{"type", "Polygon"}, {"coordinates", ordered_json::array({coords(ring)})}}},
                                   {"properties", {{"kind", "forbidden_zone"}, {"name", z.name}, {"fill", "#d62728"}}}});
    }
    std::map<int, const SDCluster*> sd_by_label;
    for (const auto& sd : r.sd_clusters) sd_by_label[sd.label] = &sd;
    for (const auto& c : r.classified) {
        const ResampledPath* medoid = r.resampled_path(c.medoid_id);
        if (!medoid) continue;
        const SDCluster& sd = *sd_by_label.at(c.sd_label);
        doc["features"].push_back({{"type", "Feature"},
                                   {"geometry", {{"type", "LineString"}, {"coordinates", coords(medoid->samples)}}},
                                   {"properties",
                                    {{"kind", "medoid"},
                                     {"sd_label", c.sd_label},
                                     {"path_index", c.path_index},
                                     {"size", c.size},
                                     {"compliant", c.compliant},
                                     {"source", detail::optional_string(sd.source_gate)},
                                     {"destination", detail::optional_string(sd.dest_gate)},
                                     {"stroke", palette_color(c.path_index)}}}});
    }
    return doc;
}

namespace detail {

inline std::string svg_points(std::span<const TrackPoint> pts) {
    std::string s;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (i) s += ' ';
        s += text::fixed(pts[i].x, 2) + "," + text::fixed(pts[i].y, 2);
    }
    return s;
}

inline std::string svg_path_data(std::span<const Point2> pts) {
    std::string s;
    for (std::size_t i = 0; i < pts.size(); ++i)
        s += (i ? " L" : "M") + text::fixed(pts[i].x, 2) + " " + text::fixed(pts[i].y, 2);
    return s;
}

}  // namespace detail

/// Member trajectories of one SD-cluster, one <polyline> per member colored
/// by path-cluster; designs and zones are drawn as <path> overlays.
inline std::string sd_cluster_svg(const PipelineResult& r, std::size_t sd_pos) {
    const SDCluster& sd = r.sd_clusters.at(sd_pos);
    const double w = r.scene.resolution.width;
    const double h = r.scene.resolution.height;
    const auto index = r.filtered.kept.index_by_id();
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << text::shortest(w) << "\" height=\""
        << text::shortest(h) << "\" viewBox=\"0 0 " << text::shortest(w) << ' ' << text::shortest(h) << "\">\n";
    out << "<title>SD " << sd.label << " " << detail::sd_name(sd) << " (" << sd.size() << " trajectories)</title>\n";
    out << "<rect x=\"0\" y=\"0\" width=\"" << text::shortest(w) << "\" height=\"" << text::shortest(h)
        << "\" fill=\"#202020\"/>\n";
    for (const auto& z : r.scene.forbidden_zones) {
        std::vector<Point2> ring(z.polygon.vertices().begin(), z.polygon.vertices().end());
        out << "<path class=\"zone\" d=\"" << detail::svg_path_data(ring)
            << " Z\" fill=\"#d62728\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
    }
    for (const auto& pc : r.path_clusters.at(sd_pos)) {
        out << "<g class=\"path-cluster\" data-index=\"" << pc.index << "\" stroke=\"" << palette_color(pc.index)
            << "\" stroke-opacity=\"0.4\" fill=\"none\" stroke-width=\"1\">\n";
        for (const auto& id : pc.member_ids)
            out << "<polyline points=\"" << detail::svg_points(r.filtered.kept.trajectories[index.at(id)].points())
                << "\"/>\n";
        out << "</g>\n";
    }
    if (sd.source_gate && sd.dest_gate)
        for (const auto* d : r.scene.designs_between(*sd.source_gate, *sd.dest_gate))
            out << "<path class=\"design\" d=\"" << detail::svg_path_data(d->polyline.vertices())
                << "\" fill=\"none\" stroke=\"#ffffff\" stroke-width=\"3\" stroke-dasharray=\"8 5\"/>\n";
    out << "</svg>\n";
    return out.str();
}

/// Stacked histogram of time on screen for one SD pair, stacked by path-cluster.
inline std::string duration_svg(const PipelineResult& r, std::size_t sd_pos) {
    const SDCluster& sd = r.sd_clusters.at(sd_pos);
    const auto index = r.filtered.kept.index_by_id();
    const auto& clusters = r.path_clusters.at(sd_pos);
    constexpr double kBin = 5.0;
    constexpr double kWidth = 640, kHeight = 360, kLeft = 50, kRight = 20, kTop = 30, kBottom = 40;

    std::vector<std::vector<double>> durations(clusters.size());
    double longest = 0;
    for (std::size_t c = 0; c < clusters.size(); ++c)
        for (const auto& id : clusters[c].member_ids) {
            const double d = r.filtered.kept.trajectories[index.at(id)].duration();
            durations[c].push_back(d);
            longest = std::max(longest, d);
        }
    const std::size_t bins = static_cast<std::size_t>(std::floor(longest / kBin)) + 1;
    std::vector<std::vector<std::size_t>> counts(clusters.size(), std::vector<std::size_t>(bins, 0));
    std::vector<std::size_t> totals(bins, 0);
    for (std::size_t c = 0; c < clusters.size(); ++c)
        for (const double d : durations[c]) {
            const auto b = std::min(bins - 1, static_cast<std::size_t>(std::floor(d / kBin)));
            ++counts[c][b];
            ++totals[b];
        }
    const std::size_t peak = std::max<std::size_t>(1, *std::max_element(totals.begin(), totals.end()));
    const double plot_w = kWidth - kLeft - kRight;
    const double plot_h = kHeight - kTop - kBottom;
    const double bar_w = plot_w / static_cast<double>(bins);

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"360\" viewBox=\"0 0 640 360\">\n";
    out << "<title>Time on screen, SD " << sd.label << " " << detail::sd_name(sd) << "</title>\n";
    out << "<rect x=\"0\" y=\"0\" width=\"640\" height=\"360\" fill=\"#ffffff\"/>\n";
    for (std::size_t b = 0; b < bins; ++b) {
        double y = kTop + plot_h;
        for (std::size_t c = 0; c < clusters.size(); ++c) {
            if (!counts[c][b]) continue;
            const double bh = plot_h * static_cast<double>(counts[c][b]) / static_cast<double>(peak);
            y -= bh;
            out << "<rect x=\"" << text::fixed(kLeft + b * bar_w, 2) << "\" y=\"" << text::fixed(y, 2)
                << "\" width=\"" << text::fixed(bar_w * 0.9, 2) << "\" height=\"" << text::fixed(bh, 2)
                << "\" fill=\"" << palette_color(clusters[c].index) << "\"/>\n";
        }
    }
    out << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + plot_h << "\" x2=\"" << kLeft + plot_w << "\" y2=\""
        << kTop + plot_h << "\" stroke=\"#000000\"/>\n";
    out << "<text x=\"" << kLeft << "\" y=\"" << kHeight - 10 << "\" font-size=\"12\">time on screen (s), bins of "
        << text::fixed(kBin, 0) << " s, 0 to " << text::fixed(static_cast<double>(bins) * kBin, 0) << "</text>\n";
    out << "<text x=\"" << kLeft << "\" y=\"20\" font-size=\"12\">peak count " << peak << "</text>\n";
    for (std::size_t c = 0; c < clusters.size(); ++c) {
        const auto stats = duration_stats(durations[c]);
        out << "<text x=\"" << kWidth - 200 << "\" y=\"" << 20 + 14 * c << "\" font-size=\"11\" fill=\""
            << palette_color(clusters[c].index) << "\">path " << clusters[c].index << ": mean "
            << text::fixed(stats.mean, 1) << " s (n=" << clusters[c].size() << ")</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

inline ordered_json manifest_json(const PipelineResult& r, const RunConfig& cfg) {
    ordered_json doc;
    doc["tool"] = "desirelines";
    doc["version"] = kVersion;
    doc["config"] = config_to_json(cfg);
    doc["inputs"] = ordered_json::object();
    for (const auto& [name, sum] : r.input_checksums) doc["inputs"][name] = {{"sha256", sum}};
    doc["scene_resolution"] = {r.scene.resolution.width, r.scene.resolution.height};
    doc["effective"] = {
        {"pixel_scale", r.params.pixel_scale},
        {"filter_min_path_length", r.params.filter.min_path_length},
        {"eps", r.params.endpoint.eps},
        {"min_pts", r.params.endpoint.min_pts},
        {"distance_threshold",
         r.params.path.distance_threshold ? ordered_json(*r.params.path.distance_threshold) : ordered_json()},
        {"deviation_threshold", r.params.compliance.deviation_threshold},
        {"gate_snap_radius", r.params.gate_snap_radius},
    };
    doc["warnings"] = r.warnings;
    return doc;
}

/// Writes every artifact of a run (according to `r.stopped_after`) into
/// `cfg.out_dir` and returns the written paths relative to it.
inline std::vector<std::string> write_outputs(const PipelineResult& r, const RunConfig& cfg) {
    namespace fs = std::filesystem;
    std::vector<std::string> written;
    auto put = [&](const std::string& rel, const std::string& body) {
        const fs::path file = cfg.out_dir / rel;
        fs::create_directories(file.parent_path());
        detail::write_text(file, body);
        written.push_back(rel);
    };
    return detail::in_stage("export", [&] {
        fs::create_directories(cfg.out_dir);
        put("manifest.json", manifest_json(r, cfg).dump(2) + "\n");
        put("discards.csv", discards_csv(r));
        put("sd_clusters.csv", sd_assignments_csv(r));
        if (r.stopped_after == PipelineStop::endpoints) return written;

        put("path_clusters.csv", path_assignments_csv(r));
        if (cfg.exports.distance_matrices)
            for (std::size_t s = 0; s < r.distance_matrices.size(); ++s) {
                std::ostringstream out;
                write_distance_matrix(out, r.distance_matrices[s]);
                put("distances/sd_" + std::to_string(r.sd_clusters[s].label) + ".txt", out.str());
            }
        if (r.stopped_after == PipelineStop::paths) return written;

        put("trajectories.csv", trajectory_detail_csv(r));
        put("report.json", report_to_json(r).dump(2) + "\n");
        put("report.txt", report_table(r));
        if (cfg.exports.geojson) put("overlay.geojson", geojson_overlay(r).dump(2) + "\n");
        if (cfg.exports.svg)
            for (std::size_t s = 0; s < r.sd_clusters.size(); ++s) {
                const std::string label = std::to_string(r.sd_clusters[s].label);
                put("figures/sd_" + label + ".svg", sd_cluster_svg(r, s));
                put("figures/durations_sd_" + label + ".svg", duration_svg(r, s));
            }
        return written;
    });
}

}  // namespace desirelines
