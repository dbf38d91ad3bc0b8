#pragma once

// End-to-end analysis: ingest -> preprocess -> endpoint clustering -> path
// clustering -> compliance. Pixel-valued parameters in a RunConfig are stated
// at the 640x360 reference resolution and rescaled to the scene.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "desirelines/compliance.hpp"
#include "desirelines/core.hpp"
#include "desirelines/endpoint_cluster.hpp"
#include "desirelines/error.hpp"
#include "desirelines/ingest.hpp"
#include "desirelines/parallel.hpp"
#include "desirelines/path_cluster.hpp"
#include "desirelines/preprocess.hpp"
#include "desirelines/text.hpp"

namespace desirelines {

inline constexpr const char* kVersion = "1.0.0";

struct ExportToggles {
    bool geojson{true};
    bool svg{true};
    bool distance_matrices{false};
};

struct RunConfig {
    std::filesystem::path trajectories;
    std::filesystem::path scene;
    std::optional<std::filesystem::path> directives;

    std::size_t resample_k{kDefaultResampleCount};
    double bounds_margin{kDefaultBoundsMargin};
    FilterParams filter;
    ClusterParams endpoint;
    /// When neither cut is set the default distance threshold for
    /// `resample_k` is used.
    PathClusterParams path{Linkage::average, std::nullopt, std::nullopt, 1, 1.0};
    ComplianceParams compliance;

    std::filesystem::path out_dir{"out"};
    ExportToggles exports;
    unsigned threads{1};

    PathClusterParams reference_path_params() const {
        PathClusterParams p = path;
        if (!p.target_count && !p.distance_threshold) p.distance_threshold = default_distance_threshold(resample_k);
        return p;
    }
};

namespace detail {

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
    std::filesystem::path p(value);
    return p.is_absolute() ? p : base / p;
}

template <typename T>
void read_if(const nlohmann::json& j, const char* key, T& target) {
    if (j.contains(key) && !j.at(key).is_null()) target = j.at(key).get<T>();
}

inline void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw InputError(where + " must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw InputError("unknown key '" + key + "' in " + where);
    }
}

}  // namespace detail

/// Reads a RunConfig document. Relative paths resolve against `base_dir`.
inline RunConfig config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
    RunConfig cfg;
    try {
        detail::check_keys(doc,
                           {"trajectories", "scene", "directives", "resample_k", "bounds_margin", "filter",
                            "endpoint_cluster", "path_cluster", "compliance", "out", "exports", "threads"},
                           "config");
        if (doc.contains("trajectories")) cfg.trajectories = detail::resolve(base_dir, doc.at("trajectories"));
        if (doc.contains("scene")) cfg.scene = detail::resolve(base_dir, doc.at("scene"));
        if (doc.contains("directives") && !doc.at("directives").is_null())
            cfg.directives = detail::resolve(base_dir, doc.at("directives"));
        if (doc.contains("out")) cfg.out_dir = detail::resolve(base_dir, doc.at("out"));
        detail::read_if(doc, "resample_k", cfg.resample_k);
        detail::read_if(doc, "bounds_margin", cfg.bounds_margin);
        detail::read_if(doc, "threads", cfg.threads);
        if (doc.contains("filter")) {
            const auto& f = doc.at("filter");
            detail::check_keys(f, {"min_points", "min_path_length", "max_time_gap", "min_duration"}, "filter");
            detail::read_if(f, "min_points", cfg.filter.min_points);
            detail::read_if(f, "min_path_length", cfg.filter.min_path_length);
            detail::read_if(f, "max_time_gap", cfg.filter.max_time_gap);
            detail::read_if(f, "min_duration", cfg.filter.min_duration);
        }
        if (doc.contains("endpoint_cluster")) {
            const auto& e = doc.at("endpoint_cluster");
            detail::check_keys(e, {"eps", "min_pts"}, "endpoint_cluster");
            detail::read_if(e, "eps", cfg.endpoint.eps);
            detail::read_if(e, "min_pts", cfg.endpoint.min_pts);
        }
        if (doc.contains("path_cluster")) {
            const auto& p = doc.at("path_cluster");
            detail::check_keys(p, {"linkage", "target_count", "distance_threshold", "min_cluster_size", "band"},
                               "path_cluster");
            if (p.contains("linkage")) cfg.path.linkage = parse_linkage(p.at("linkage").get<std::string>());
            if (p.contains("target_count") && !p.at("target_count").is_null())
                cfg.path.target_count = p.at("target_count").get<std::size_t>();
            if (p.contains("distance_threshold") && !p.at("distance_threshold").is_null())
                cfg.path.distance_threshold = p.at("distance_threshold").get<double>();
            detail::read_if(p, "min_cluster_size", cfg.path.min_cluster_size);
            detail::read_if(p, "band", cfg.path.band);
        }
        if (doc.contains("compliance")) {
            const auto& c = doc.at("compliance");
            detail::check_keys(c, {"deviation_threshold", "deviation_quantile", "zone_min_points", "mode"},
                               "compliance");
            detail::read_if(c, "deviation_threshold", cfg.compliance.deviation_threshold);
            detail::read_if(c, "deviation_quantile", cfg.compliance.deviation_quantile);
            detail::read_if(c, "zone_min_points", cfg.compliance.zone_min_points);
            if (c.contains("mode")) cfg.compliance.mode = parse_classification_mode(c.at("mode").get<std::string>());
        }
        if (doc.contains("exports")) {
            const auto& x = doc.at("exports");
            detail::check_keys(x, {"geojson", "svg", "distance_matrices"}, "exports");
            detail::read_if(x, "geojson", cfg.exports.geojson);
            detail::read_if(x, "svg", cfg.exports.svg);
            detail::read_if(x, "distance_matrices", cfg.exports.distance_matrices);
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("config: ") + e.what());
    }
    return cfg;
}

inline RunConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw InputError("cannot open config file " + file.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InputError("config file is not valid JSON: " + std::string(e.what()));
    }
    return config_from_json(doc, file.parent_path());
}

/// Analysis parameters only; output location and thread count do not change
/// results and are left out so that manifests stay byte-identical.
inline nlohmann::ordered_json config_to_json(const RunConfig& cfg) {
    nlohmann::ordered_json doc;
    doc["trajectories"] = cfg.trajectories.string();
    doc["scene"] = cfg.scene.string();
    doc["directives"] = cfg.directives ? nlohmann::ordered_json(cfg.directives->string()) : nlohmann::ordered_json();
    doc["resample_k"] = cfg.resample_k;
    doc["bounds_margin"] = cfg.bounds_margin;
    doc["filter"] = {{"min_points", cfg.filter.min_points},
                     {"min_path_length", cfg.filter.min_path_length},
                     {"max_time_gap", cfg.filter.max_time_gap},
                     {"min_duration", cfg.filter.min_duration}};
    doc["endpoint_cluster"] = {{"eps", cfg.endpoint.eps}, {"min_pts", cfg.endpoint.min_pts}};
    const auto path = cfg.reference_path_params();
    doc["path_cluster"] = {
        {"linkage", to_string(path.linkage)},
        {"target_count", path.target_count ? nlohmann::ordered_json(*path.target_count) : nlohmann::ordered_json()},
        {"distance_threshold",
         path.distance_threshold ? nlohmann::ordered_json(*path.distance_threshold) : nlohmann::ordered_json()},
        {"min_cluster_size", path.min_cluster_size},
        {"band", path.band}};
    doc["compliance"] = {{"deviation_threshold", cfg.compliance.deviation_threshold},
                         {"deviation_quantile", cfg.compliance.deviation_quantile},
                         {"zone_min_points", cfg.compliance.zone_min_points},
                         {"mode", to_string(cfg.compliance.mode)}};
    doc["exports"] = {{"geojson", cfg.exports.geojson},
                      {"svg", cfg.exports.svg},
                      {"distance_matrices", cfg.exports.distance_matrices}};
    return doc;
}

inline std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 failed");
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof(buf), "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

inline std::string read_file(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw InputError("cannot open " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Parameters after rescaling to the scene resolution.
struct EffectiveParams {
    double pixel_scale{1};
    FilterParams filter;
    ClusterParams endpoint;
    PathClusterParams path;
    ComplianceParams compliance;
    double gate_snap_radius{kDefaultGateSnapRadius};
};

enum class PipelineStop { endpoints, paths, full };

struct PipelineResult {
    SceneSpec scene;
    TrajectorySet input;  // normalized to the scene resolution
    EffectiveParams params;
    std::vector<std::string> warnings;
    std::map<std::string, std::string> input_checksums;

    FilterResult filtered;
    EndpointClustering raw_clusters;
    std::optional<Directives> directives;
    std::vector<SDCluster> sd_clusters;  // after directives, with gates
    std::vector<Discard> discards;       // every discard channel

    std::vector<ResampledPath> resampled;  // kept trajectories, input order
    std::vector<std::vector<PathCluster>> path_clusters;  // per sd_clusters entry
    std::vector<DistanceMatrix> distance_matrices;        // per sd_clusters entry

    std::vector<ClusterCompliance> classified;
    ComplianceReport report;
    PipelineStop stopped_after{PipelineStop::full};

    const ResampledPath* resampled_path(const std::string& id) const {
        for (const auto& r : resampled)
            if (r.source_id == id) return &r;
        return nullptr;
    }
};

namespace detail {

template <typename F>
auto in_stage(const char* stage, F&& body) -> decltype(body()) {
    try {
        return body();
    } catch (const StageError&) {
        throw;
    } catch (const InputError& e) {
        throw StageError(stage, e.what(), true);
    } catch (const std::exception& e) {
        throw StageError(stage, e.what(), false);
    }
}

}  // namespace detail

/// Runs the analysis stages in memory. Errors surface as StageError naming
/// the failing stage.
inline PipelineResult run_pipeline(const RunConfig& cfg, PipelineStop stop = PipelineStop::full) {
    PipelineResult r;
    r.stopped_after = stop;
    const unsigned threads = std::max(1u, cfg.threads);

    detail::in_stage("config", [&] {
        if (cfg.resample_k < 2) throw InputError("resample_k must be at least 2");
        if (!(cfg.bounds_margin >= 0)) throw InputError("bounds_margin must be >= 0");
        cfg.filter.validate();
        cfg.endpoint.validate();
        cfg.reference_path_params().validate();
        cfg.compliance.validate();
        return 0;
    });

    detail::in_stage("ingest", [&] {
        const std::string scene_bytes = read_file(cfg.scene);
        r.input_checksums["scene"] = sha256_hex(scene_bytes);
        r.scene = parse_scene_string(scene_bytes);
        const std::string traj_bytes = read_file(cfg.trajectories);
        r.input_checksums["trajectories"] = sha256_hex(traj_bytes);
        std::istringstream in(traj_bytes);
        r.input = parse_trajectories(in, r.scene, cfg.bounds_margin);
        if (cfg.directives) {
            const std::string dir_bytes = read_file(*cfg.directives);
            r.input_checksums["directives"] = sha256_hex(dir_bytes);
            std::istringstream din(dir_bytes);
            r.directives = parse_directives(din);
        }
        return 0;
    });

    const Resolution& res = r.scene.resolution;
    r.params.pixel_scale = pixel_scale(res);
    r.params.filter = cfg.filter.scaled_to(res);
    r.params.endpoint = cfg.endpoint.scaled_to(res);
    r.params.path = cfg.reference_path_params();
    if (r.params.path.distance_threshold) *r.params.path.distance_threshold *= r.params.pixel_scale;
    r.params.compliance = cfg.compliance.scaled_to(res);
    r.params.gate_snap_radius = r.scene.gate_snap_radius;
    if (is_anisotropic(res))
        r.warnings.push_back("scene resolution " + text::shortest(res.width) + "x" + text::shortest(res.height) +
                             " is not a uniform scaling of 640x360; pixel tolerances use the mean factor " +
                             text::shortest(r.params.pixel_scale));

    detail::in_stage("preprocess", [&] {
        r.filtered = filter_broken(r.input, r.params.filter, threads);
        r.discards = r.filtered.discarded;
        return 0;
    });

    detail::in_stage("endpoint_cluster", [&] {
        r.raw_clusters = cluster_endpoints(r.filtered.kept, r.params.endpoint, threads);
        for (const auto& id : r.raw_clusters.noise_ids) r.discards.push_back({id, "dbscan_noise"});
        std::vector<SDCluster> clusters = r.raw_clusters.clusters;
        if (r.directives) {
            auto applied = apply_directives(clusters, *r.directives);
            clusters = std::move(applied.clusters);
            r.discards.insert(r.discards.end(), applied.discarded.begin(), applied.discarded.end());
        }
        r.sd_clusters = assign_gates(std::move(clusters), r.scene, r.params.gate_snap_radius);
        return 0;
    });
    if (stop == PipelineStop::endpoints) return r;

    detail::in_stage("path_cluster", [&] {
        const auto& kept = r.filtered.kept.trajectories;
        r.resampled.resize(kept.size(), ResampledPath{});
        parallel_for(kept.size(), threads, [&](std::size_t i) { r.resampled[i] = resample(kept[i], cfg.resample_k); });
        std::unordered_map<std::string, std::size_t> pos;
        for (std::size_t i = 0; i < r.resampled.size(); ++i) pos.emplace(r.resampled[i].source_id, i);
        for (const auto& sd : r.sd_clusters) {
            std::vector<ResampledPath> paths;
            paths.reserve(sd.size());
            for (const auto& id : sd.member_ids) paths.push_back(r.resampled.at(pos.at(id)));
            DistanceMatrix m = distance_matrix(paths, threads, r.params.path.band);
            r.path_clusters.push_back(cluster_paths(m, r.params.path, sd.label));
            if (cfg.exports.distance_matrices) r.distance_matrices.push_back(std::move(m));
        }
        return 0;
    });
    if (stop == PipelineStop::paths) return r;

    detail::in_stage("compliance", [&] {
        std::unordered_map<std::string, const ResampledPath*> by_id;
        for (const auto& p : r.resampled) by_id.emplace(p.source_id, &p);
        for (std::size_t s = 0; s < r.sd_clusters.size(); ++s) {
            const auto& sd = r.sd_clusters[s];
            std::vector<const DesignedPath*> designs;
            if (sd.source_gate && sd.dest_gate) designs = r.scene.designs_between(*sd.source_gate, *sd.dest_gate);
            for (const auto& pc : r.path_clusters[s])
                r.classified.push_back(classify_cluster(pc, by_id, designs, r.params.compliance));
        }
        // Wrong-way events are counted over trajectories retained in SD-clusters.
        TrajectorySet retained;
        retained.resolution = r.filtered.kept.resolution;
        std::unordered_map<std::string, bool> in_cluster;
        for (const auto& sd : r.sd_clusters)
            for (const auto& id : sd.member_ids) in_cluster[id] = true;
        for (const auto& t : r.filtered.kept.trajectories)
            if (in_cluster.count(t.id())) retained.trajectories.push_back(t);
        auto events = forbidden_zone_events(retained, r.scene.forbidden_zones, r.params.compliance);
        r.report = mismatch_report(r.sd_clusters, r.classified, r.filtered.kept, r.scene, std::move(events));
        return 0;
    });
    return r;
}

}  // namespace desirelines
