#include <gtest/gtest.h>

#include <cstdlib>
#include <regex>

#include "support.hpp"

using namespace desirelines;
namespace fs = std::filesystem;

namespace {

std::size_t count_kind(const nlohmann::ordered_json& geo, const std::string& kind) {
    std::size_t n = 0;
    for (const auto& f : geo["features"]) n += f["properties"]["kind"] == kind;
    return n;
}

std::size_t count_substr(const std::string& s, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) ++n;
    return n;
}

int cli(const std::string& args) {
    const int status = std::system((std::string(DESIRELINES_CLI) + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Pipeline, RecoversShortcutAndMismatch) {
    const auto cfg = testsupport::write_synth_inputs(testsupport::recovery_spec(42), testsupport::scratch_dir("recover"));
    const auto r = run_pipeline(cfg);
    ASSERT_EQ(r.sd_clusters.size(), 3u);
    EXPECT_EQ(r.report.mismatch_fraction, 0.10);
    EXPECT_EQ(r.report.total_non_compliant, 30u);
    EXPECT_EQ(r.report.wrong_way_trajectories, 30u);
    EXPECT_TRUE(r.warnings.empty());
}

TEST(Pipeline, FullyCompliantWorld) {
    auto spec = testsupport::recovery_spec(5);
    spec.bundles.pop_back();
    const auto cfg = testsupport::write_synth_inputs(spec, testsupport::scratch_dir("compliant"));
    const auto r = run_pipeline(cfg);
    EXPECT_EQ(r.report.mismatch_fraction, 0.0);
    EXPECT_EQ(r.report.total_trajectories, 270u);
    EXPECT_TRUE(r.report.zone_events.empty());
    for (const auto& pc : r.report.path_clusters) EXPECT_TRUE(pc.matched_design.has_value());
}

TEST(Pipeline, ConservationHolds) {
    const auto cfg = testsupport::write_synth_inputs(testsupport::recovery_spec(8), testsupport::scratch_dir("conserve"));
    auto r = run_pipeline(cfg);
    EXPECT_EQ(r.filtered.kept.size() + r.filtered.discarded.size(), r.input.size());
    std::size_t clustered = 0;
    for (const auto& sd : r.sd_clusters) clustered += sd.size();
    EXPECT_EQ(clustered + r.raw_clusters.noise_ids.size(), r.filtered.kept.size());
    for (const auto& p : r.report.sd_pairs) EXPECT_EQ(p.compliant + p.non_compliant, p.size);
}

TEST(Pipeline, DirectivesDiscardAndRecordReason) {
    const auto dir = testsupport::scratch_dir("directives");
    auto cfg = testsupport::write_synth_inputs(testsupport::recovery_spec(42), dir);
    std::ofstream(dir / "directives.json") << R"({"discards": [{"label": 2, "reason": "review"}]})";
    cfg.directives = dir / "directives.json";
    const auto r = run_pipeline(cfg);
    EXPECT_EQ(r.sd_clusters.size(), 2u);
    EXPECT_EQ(r.discards.size(), 90u);
    EXPECT_EQ(r.discards.front().reason, "directive: review");
    EXPECT_EQ(r.report.total_trajectories, 210u);
}

TEST(Pipeline, StageErrorsNameTheStage) {
    const auto dir = testsupport::scratch_dir("errors");
    auto cfg = testsupport::write_synth_inputs(testsupport::recovery_spec(1), dir);
    cfg.scene = dir / "missing.json";
    try {
        run_pipeline(cfg);
        FAIL();
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "ingest");
        EXPECT_TRUE(e.input_error());
    }
    cfg = testsupport::write_synth_inputs(testsupport::recovery_spec(1), dir);
    cfg.endpoint.eps = -1;
    try {
        run_pipeline(cfg);
        FAIL();
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "config");
    }
}

TEST(Pipeline, AnisotropicResolutionWarns) {
    auto spec = testsupport::recovery_spec(2);
    spec.scene.resolution = {1280, 360};
    const auto dir = testsupport::scratch_dir("aniso");
    std::ofstream(dir / "scene.json") << scene_to_json(spec.scene).dump();
    std::ofstream(dir / "t.csv") << "#resolution=1280x360\ntraj_id,t,x,y\n1,0,10,10\n";
    RunConfig cfg;
    cfg.scene = dir / "scene.json";
    cfg.trajectories = dir / "t.csv";
    const auto r = run_pipeline(cfg);
    ASSERT_EQ(r.warnings.size(), 1u);
    EXPECT_DOUBLE_EQ(r.params.endpoint.eps, 8 * 1.5);
}

TEST(Export, GeoJsonFeatureCounts) {
    const auto scene = testsupport::three_path_scene();
    // No clusters at all.
    {
        const auto dir = testsupport::scratch_dir("geo0");
        std::ofstream(dir / "scene.json") << scene_to_json(scene).dump();
        std::ofstream(dir / "t.csv") << "traj_id,t,x,y\n";
        RunConfig cfg;
        cfg.scene = dir / "scene.json";
        cfg.trajectories = dir / "t.csv";
        const auto geo = geojson_overlay(run_pipeline(cfg));
        EXPECT_EQ(count_kind(geo, "medoid"), 0u);
        EXPECT_EQ(count_kind(geo, "designed_path"), 3u);
        EXPECT_EQ(count_kind(geo, "forbidden_zone"), 1u);
    }
    // One bundle, one medoid.
    {
        synth::SynthSpec spec{scene, {testsupport::design_bundle(scene, "C", "D", 40, 2)}, 3, 30};
        const auto r = run_pipeline(testsupport::write_synth_inputs(spec, testsupport::scratch_dir("geo1")));
        EXPECT_EQ(count_kind(geojson_overlay(r), "medoid"), 1u);
    }
    // Two bundles in one SD pair: two medoids with K vertices each.
    {
        const auto r = run_pipeline(
            testsupport::write_synth_inputs(testsupport::recovery_spec(4), testsupport::scratch_dir("geo2")));
        const auto geo = geojson_overlay(r);
        EXPECT_EQ(count_kind(geo, "medoid"), 4u);
        for (const auto& f : geo["features"])
            if (f["properties"]["kind"] == "medoid") EXPECT_EQ(f["geometry"]["coordinates"].size(), 64u);
    }
}

TEST(Export, SvgHasOnePolylinePerMember) {
    const auto r =
        run_pipeline(testsupport::write_synth_inputs(testsupport::recovery_spec(6), testsupport::scratch_dir("svg")));
    for (std::size_t s = 0; s < r.sd_clusters.size(); ++s)
        EXPECT_EQ(count_substr(sd_cluster_svg(r, s), "<polyline"), r.sd_clusters[s].size());
}

TEST(Export, PaletteIsStable) {
    EXPECT_STREQ(palette_color(1), "#1f77b4");
    EXPECT_STREQ(palette_color(2), "#ff7f0e");
    EXPECT_STREQ(palette_color(11), palette_color(1));
}

TEST(Export, WritesExpectedFilesAndReplays) {
    const auto dir = testsupport::scratch_dir("outputs");
    auto cfg = testsupport::write_synth_inputs(testsupport::recovery_spec(9), dir);
    cfg.exports.distance_matrices = true;
    const auto written = write_outputs(run_pipeline(cfg), cfg);
    for (const auto* f : {"manifest.json", "discards.csv", "sd_clusters.csv", "path_clusters.csv", "trajectories.csv",
                          "report.json", "report.txt", "overlay.geojson", "figures/sd_0.svg",
                          "figures/durations_sd_0.svg", "distances/sd_0.txt"})
        EXPECT_TRUE(fs::exists(cfg.out_dir / f)) << f;
    EXPECT_EQ(written.size(), 4u + 3 + 4 + 2 * 3);

    const auto report = testsupport::slurp(cfg.out_dir / "report.json");
    const auto replay = dir / "replay";
    ASSERT_EQ(cli("report --manifest " + (cfg.out_dir / "manifest.json").string() + " --out " + replay.string()), 0);
    EXPECT_EQ(testsupport::slurp(replay / "report.json"), report);

    // A changed input no longer matches the manifest checksums.
    std::ofstream(cfg.trajectories, std::ios::app) << "999,0,10,10\n";
    EXPECT_EQ(cli("report --manifest " + (cfg.out_dir / "manifest.json").string() + " --out " + replay.string()), 1);
}

TEST(Cli, ExitCodes) {
    const auto dir = testsupport::scratch_dir("cli");
    const auto cfg = testsupport::write_synth_inputs(testsupport::recovery_spec(11), dir);
    const std::string inputs = "--trajectories " + cfg.trajectories.string() + " --scene " + cfg.scene.string();
    EXPECT_EQ(cli("run " + inputs + " --out " + (dir / "o").string()), 0);
    EXPECT_EQ(cli("cluster-endpoints " + inputs + " --out " + (dir / "e").string()), 0);
    EXPECT_EQ(cli("cluster-paths " + inputs + " --out " + (dir / "p").string()), 0);
    EXPECT_EQ(cli("run --trajectories nope.csv --scene " + cfg.scene.string() + " --out " + (dir / "x").string()), 1);
    EXPECT_EQ(cli("run " + inputs + " --eps -3 --out " + (dir / "x").string()), 1);
    EXPECT_EQ(cli("run " + inputs + " --linkage single"), 1);
    EXPECT_EQ(cli("frobnicate"), 1);
    EXPECT_TRUE(fs::exists(dir / "e" / "sd_clusters.csv"));
    EXPECT_FALSE(fs::exists(dir / "e" / "report.json"));
}

TEST(Cli, SynthThenRun) {
    const auto dir = testsupport::scratch_dir("cli_synth");
    ASSERT_EQ(cli("synth --spec " + std::string(DESIRELINES_DATA_DIR) + "/synth_three_paths.json --seed 3 --out " +
                  (dir / "gen").string()),
              0);
    EXPECT_TRUE(fs::exists(dir / "gen" / "ground_truth.csv"));
    ASSERT_EQ(cli("run --trajectories " + (dir / "gen" / "trajectories.csv").string() + " --scene " +
                  (dir / "gen" / "scene.json").string() + " --out " + (dir / "out").string()),
              0);
    const auto report = nlohmann::json::parse(testsupport::slurp(dir / "out" / "report.json"));
    EXPECT_EQ(report["raw_sd_clusters"], 3);
}

TEST(Config, ShippedExampleLoads) {
    const fs::path data(DESIRELINES_DATA_DIR);
    const auto cfg = load_config(data / "example.config.json");
    EXPECT_EQ(cfg.trajectories, data / "synth_out/trajectories.csv");
    EXPECT_FALSE(cfg.directives);
    EXPECT_EQ(cfg.reference_path_params().distance_threshold, 384.0);
    EXPECT_EQ(cfg.endpoint.min_pts, 25u);
    std::ifstream in(data / "example.directives.json");
    EXPECT_EQ(parse_directives(in).discards.size(), 1u);
    EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"eps": 3})"), data), InputError);
    EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"filter": {"min_len": 3}})"), data), InputError);
}

TEST(Config, JsonRoundTrip) {
    RunConfig cfg;
    cfg.trajectories = "/tmp/t.csv";
    cfg.scene = "/tmp/s.json";
    cfg.endpoint.eps = 9.5;
    cfg.path.linkage = Linkage::complete;
    cfg.path.target_count = 3;
    cfg.compliance.mode = ClassificationMode::per_trajectory;
    const auto back = config_from_json(nlohmann::json::parse(config_to_json(cfg).dump()), "/");
    EXPECT_EQ(config_to_json(back), config_to_json(cfg));
}
