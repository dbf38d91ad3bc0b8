// desirelines: command-line front end for the trajectory analysis pipeline.
//
// Exit status: 0 success, 1 input or validation error, 2 internal error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "desirelines/desirelines.hpp"

namespace fs = std::filesystem;
using namespace desirelines;

namespace {

constexpr int kExitInput = 1;
constexpr int kExitInternal = 2;

struct Overrides {
    std::optional<std::string> config;
    std::optional<std::string> trajectories;
    std::optional<std::string> scene;
    std::optional<std::string> directives;
    std::optional<std::string> out;
    std::optional<unsigned> threads;

    std::optional<std::size_t> k;
    std::optional<std::size_t> min_points;
    std::optional<double> min_path_length;
    std::optional<double> max_time_gap;
    std::optional<double> min_duration;
    std::optional<double> eps;
    std::optional<std::size_t> min_pts;
    std::optional<std::string> linkage;
    std::optional<std::size_t> target_count;
    std::optional<double> distance_threshold;
    std::optional<std::size_t> min_cluster_size;
    std::optional<double> band;
    std::optional<double> tau;
    std::optional<double> quantile;
    std::optional<std::size_t> zone_min_points;
    std::optional<std::string> mode;
    bool no_svg{false};
    bool no_geojson{false};
    bool dump_distances{false};
};

void add_common(CLI::App* app, Overrides& o) {
    app->add_option("--config", o.config, "Run configuration (JSON)");
    app->add_option("--trajectories", o.trajectories, "Trajectory file");
    app->add_option("--scene", o.scene, "Scene design file (JSON)");
    app->add_option("--directives", o.directives, "Merge/discard directives (JSON)");
    app->add_option("--out", o.out, "Output directory");
    app->add_option("--threads", o.threads, "Worker threads (results do not depend on it)");
}

void add_analysis(CLI::App* app, Overrides& o) {
    app->add_option("--k", o.k, "Samples per resampled path");
    app->add_option("--min-points", o.min_points, "Filter: minimum points");
    app->add_option("--min-path-length", o.min_path_length, "Filter: minimum path length (px at 640x360)");
    app->add_option("--max-time-gap", o.max_time_gap, "Filter: maximum gap between observations (s)");
    app->add_option("--min-duration", o.min_duration, "Filter: minimum time on screen (s)");
    app->add_option("--eps", o.eps, "DBSCAN radius (px at 640x360)");
    app->add_option("--min-pts", o.min_pts, "DBSCAN minimum neighbourhood size");
    app->add_option("--linkage", o.linkage, "average | complete");
    app->add_option("--target-count", o.target_count, "Path clusters per SD-cluster");
    app->add_option("--distance-threshold", o.distance_threshold, "Dendrogram cut (DTW units at 640x360)");
    app->add_option("--min-cluster-size", o.min_cluster_size, "Smallest path-cluster kept on its own");
    app->add_option("--band", o.band, "Sakoe-Chiba band as a fraction of K (1 = unconstrained)");
    app->add_option("--tau", o.tau, "Corridor half-width (px at 640x360)");
    app->add_option("--quantile", o.quantile, "Fraction of samples required inside the corridor");
    app->add_option("--zone-min-points", o.zone_min_points, "Consecutive points inside a zone for an event");
    app->add_option("--mode", o.mode, "medoid | per_trajectory");
    app->add_flag("--no-svg", o.no_svg, "Skip SVG figures");
    app->add_flag("--no-geojson", o.no_geojson, "Skip the GeoJSON overlay");
    app->add_flag("--dump-distances", o.dump_distances, "Write DTW distance matrices");
}

RunConfig build_config(const Overrides& o) {
    RunConfig cfg = o.config ? load_config(*o.config) : RunConfig{};
    if (o.trajectories) cfg.trajectories = *o.trajectories;
    if (o.scene) cfg.scene = *o.scene;
    if (o.directives) cfg.directives = fs::path(*o.directives);
    if (o.out) cfg.out_dir = *o.out;
    if (o.threads) cfg.threads = *o.threads;
    if (o.k) cfg.resample_k = *o.k;
    if (o.min_points) cfg.filter.min_points = *o.min_points;
    if (o.min_path_length) cfg.filter.min_path_length = *o.min_path_length;
    if (o.max_time_gap) cfg.filter.max_time_gap = *o.max_time_gap;
    if (o.min_duration) cfg.filter.min_duration = *o.min_duration;
    if (o.eps) cfg.endpoint.eps = *o.eps;
    if (o.min_pts) cfg.endpoint.min_pts = *o.min_pts;
    if (o.linkage) cfg.path.linkage = parse_linkage(*o.linkage);
    if (o.target_count) {
        cfg.path.target_count = *o.target_count;
        cfg.path.distance_threshold.reset();
    }
    if (o.distance_threshold) {
        cfg.path.distance_threshold = *o.distance_threshold;
        cfg.path.target_count.reset();
    }
    if (o.min_cluster_size) cfg.path.min_cluster_size = *o.min_cluster_size;
    if (o.band) cfg.path.band = *o.band;
    if (o.tau) cfg.compliance.deviation_threshold = *o.tau;
    if (o.quantile) cfg.compliance.deviation_quantile = *o.quantile;
    if (o.zone_min_points) cfg.compliance.zone_min_points = *o.zone_min_points;
    if (o.mode) cfg.compliance.mode = parse_classification_mode(*o.mode);
    if (o.no_svg) cfg.exports.svg = false;
    if (o.no_geojson) cfg.exports.geojson = false;
    if (o.dump_distances) cfg.exports.distance_matrices = true;
    if (cfg.trajectories.empty()) throw InputError("no trajectory file given (--trajectories or config)");
    if (cfg.scene.empty()) throw InputError("no scene file given (--scene or config)");
    return cfg;
}

void print_warnings(const PipelineResult& r) {
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
}

void print_endpoint_summary(const PipelineResult& r) {
    std::size_t clustered = 0;
    for (const auto& c : r.raw_clusters.clusters) clustered += c.size();
    std::cout << "input " << r.input.size() << ", kept " << r.filtered.kept.size() << ", raw SD-clusters "
              << r.raw_clusters.clusters.size() << " with " << clustered << " trajectories, noise "
              << r.raw_clusters.noise_ids.size() << '\n';
    std::cout << "label  size  source          destination\n";
    for (const auto& c : r.raw_clusters.clusters) {
        const auto src = nearest_gate({c.centroid.sx, c.centroid.sy}, r.scene, r.params.gate_snap_radius);
        const auto dst = nearest_gate({c.centroid.dx, c.centroid.dy}, r.scene, r.params.gate_snap_radius);
        char line[160];
        std::snprintf(line, sizeof(line), "%-6d %5zu %-15s %-15s\n", c.label, c.size(), src ? src->c_str() : "-",
                      dst ? dst->c_str() : "-");
        std::cout << line;
    }
}

int run_analysis(const Overrides& o, PipelineStop stop) {
    const RunConfig cfg = build_config(o);
    const PipelineResult r = run_pipeline(cfg, stop);
    print_warnings(r);
    write_outputs(r, cfg);
    if (stop == PipelineStop::endpoints) print_endpoint_summary(r);
    else if (stop == PipelineStop::paths) {
        for (std::size_t s = 0; s < r.sd_clusters.size(); ++s)
            std::cout << "SD " << r.sd_clusters[s].label << " (" << r.sd_clusters[s].size() << "): "
                      << r.path_clusters[s].size() << " path-clusters\n";
    } else {
        std::cout << report_table(r);
    }
    std::cout << "outputs written to " << cfg.out_dir.string() << '\n';
    return 0;
}

int run_report(const Overrides& o, const std::optional<std::string>& manifest_file) {
    if (!manifest_file) return run_analysis(o, PipelineStop::full);
    std::ifstream in(*manifest_file);
    if (!in) throw InputError("cannot open manifest " + *manifest_file);
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InputError("manifest is not valid JSON: " + std::string(e.what()));
    }
    if (!manifest.contains("config")) throw InputError("manifest has no 'config' section");
    RunConfig cfg = config_from_json(manifest.at("config"), fs::path(*manifest_file).parent_path());
    cfg.out_dir = o.out ? fs::path(*o.out) : fs::path(*manifest_file).parent_path();
    if (o.threads) cfg.threads = *o.threads;
    const PipelineResult r = run_pipeline(cfg);
    const nlohmann::json inputs = manifest.value("inputs", nlohmann::json::object());
    for (const auto& [name, entry] : inputs.items()) {
        auto it = r.input_checksums.find(name);
        if (it == r.input_checksums.end() || it->second != entry.value("sha256", std::string()))
            throw InputError("input '" + name + "' does not match the checksum recorded in the manifest");
    }
    print_warnings(r);
    write_outputs(r, cfg);
    std::cout << report_table(r);
    return 0;
}

int run_synth(const std::string& spec_file, const std::optional<std::uint64_t>& seed, const std::string& out_dir) {
    std::ifstream in(spec_file);
    if (!in) throw InputError("cannot open synth spec " + spec_file);
    synth::SynthSpec spec = synth::parse_synth_spec(in);
    if (seed) spec.seed = *seed;
    const auto generated = synth::generate(spec);
    fs::create_directories(out_dir);
    std::ofstream traj(fs::path(out_dir) / "trajectories.csv");
    write_trajectories(traj, generated.trajectories);
    std::ofstream truth(fs::path(out_dir) / "ground_truth.csv");
    synth::write_ground_truth(truth, generated.truth);
    std::ofstream scene(fs::path(out_dir) / "scene.json");
    scene << scene_to_json(spec.scene).dump(2) << '\n';
    std::cout << "generated " << generated.trajectories.size() << " trajectories in " << out_dir << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Desire-line analysis of tracked cyclist trajectories"};
    app.require_subcommand(1);

    Overrides o;
    auto* run = app.add_subcommand("run", "Full pipeline: clustering, compliance report and figures");
    auto* endpoints = app.add_subcommand("cluster-endpoints", "Filter and cluster source-destination endpoints");
    auto* paths = app.add_subcommand("cluster-paths", "Endpoint clustering followed by DTW path clustering");
    auto* report = app.add_subcommand("report", "Compliance report, optionally replayed from a run manifest");
    for (auto* sub : {run, endpoints, paths, report}) {
        add_common(sub, o);
        add_analysis(sub, o);
    }
    std::optional<std::string> manifest;
    report->add_option("--manifest", manifest, "Replay the run recorded in this manifest");

    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic scene with ground truth");
    std::string synth_spec;
    std::optional<std::uint64_t> synth_seed;
    std::string synth_out = "synth";
    std::optional<unsigned> synth_threads;
    synth_cmd->add_option("--config,--spec", synth_spec, "Synthetic scene description (JSON)")->required();
    synth_cmd->add_option("--seed", synth_seed, "Override the seed given in the file");
    synth_cmd->add_option("--out", synth_out, "Output directory");
    synth_cmd->add_option("--threads", synth_threads, "Accepted for uniformity; generation is sequential");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitInput;
    }

    try {
        if (*run) return run_analysis(o, PipelineStop::full);
        if (*endpoints) return run_analysis(o, PipelineStop::endpoints);
        if (*paths) return run_analysis(o, PipelineStop::paths);
        if (*report) return run_report(o, manifest);
        if (*synth_cmd) return run_synth(synth_spec, synth_seed, synth_out);
    } catch (const StageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.input_error() ? kExitInput : kExitInternal;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kExitInternal;
    }
    return kExitInternal;
}
