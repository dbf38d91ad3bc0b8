#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "desirelines/ingest.hpp"
#include "support.hpp"

using namespace desirelines;

namespace {

SceneSpec minimal_scene(double fps = 30) {
    return parse_scene_string(R"({"resolution": [640, 360], "fps": )" + std::to_string(fps) + R"(,
      "gates": [{"name": "in", "x": 0, "y": 100, "kind": "entry"}, {"name": "out", "x": 600, "y": 100, "kind": "exit"}],
      "designed_paths": [{"source": "in", "destination": "out", "polyline": [[0,100],[600,100]], "required_stops": 0}]
    })");
}

TrajectorySet parse(const std::string& body, const SceneSpec& scene) {
    std::istringstream in(body);
    return parse_trajectories(in, scene);
}

}  // namespace

TEST(ParseScene, MinimalDocument) {
    const auto scene = minimal_scene();
    EXPECT_EQ(scene.designed_paths.size(), 1u);
    EXPECT_EQ(scene.gates.size(), 2u);
    EXPECT_DOUBLE_EQ(scene.gate_snap_radius, 15.0);
}

TEST(ParseScene, UnknownGateIsNamed) {
    try {
        parse_scene_string(R"({"resolution": [640, 360],
          "gates": [{"name": "in", "x": 0, "y": 0}],
          "designed_paths": [{"source": "in", "destination": "X", "polyline": [[0,0],[10,0]]}]})");
        FAIL() << "expected InputError";
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find("'X'"), std::string::npos);
    }
}

TEST(ParseScene, RejectsStructuralErrors) {
    // duplicate gate
    EXPECT_THROW(parse_scene_string(R"({"resolution": [640, 360],
      "gates": [{"name": "g", "x": 0, "y": 0}, {"name": "g", "x": 1, "y": 1}]})"),
                 InputError);
    // open polygon
    EXPECT_THROW(parse_scene_string(R"({"resolution": [640, 360],
      "forbidden_zones": [{"name": "z", "polygon": [[0,0],[10,0],[10,10],[0,10]]}]})"),
                 InputError);
    // self-intersecting polygon
    EXPECT_THROW(parse_scene_string(R"({"resolution": [640, 360],
      "forbidden_zones": [{"name": "z", "polygon": [[0,0],[10,10],[10,0],[0,10],[0,0]]}]})"),
                 InputError);
    // path not snapped to its gate
    EXPECT_THROW(parse_scene_string(R"({"resolution": [640, 360],
      "gates": [{"name": "a", "x": 0, "y": 0}, {"name": "b", "x": 100, "y": 0}],
      "designed_paths": [{"source": "a", "destination": "b", "polyline": [[40,0],[100,0]]}]})"),
                 InputError);
    // exit-only gate used as a source
    EXPECT_THROW(parse_scene_string(R"({"resolution": [640, 360],
      "gates": [{"name": "a", "x": 0, "y": 0, "kind": "exit"}, {"name": "b", "x": 100, "y": 0}],
      "designed_paths": [{"source": "a", "destination": "b", "polyline": [[0,0],[100,0]]}]})"),
                 InputError);
    EXPECT_THROW(parse_scene_string(R"({"resolution": [640, 360], "colour": 1})"), InputError);
    EXPECT_THROW(parse_scene_string("{not json"), InputError);
}

TEST(ParseScene, ShippedDybbolsbroScene) {
    std::ifstream in(std::string(DESIRELINES_DATA_DIR) + "/dybbolsbro.scene.json");
    ASSERT_TRUE(in);
    const auto scene = parse_scene(in);
    EXPECT_EQ(scene.gates.size(), 8u);
    EXPECT_EQ(scene.designed_paths.size(), 12u);
    EXPECT_EQ(scene.resolution, (Resolution{640, 360}));
    // Every ordered pair of distinct sides has exactly one design.
    std::set<std::pair<char, char>> pairs;
    for (const auto& p : scene.designed_paths) pairs.insert({p.source[0], p.destination[0]});
    EXPECT_EQ(pairs.size(), 12u);
    EXPECT_EQ(scene.designs_between("E_in", "S_out").front()->required_stops, 2);
    EXPECT_EQ(scene.designs_between("N_in", "S_out").front()->required_stops, 1);
}

TEST(SceneJson, RoundTrip) {
    const auto scene = testsupport::three_path_scene();
    const auto again = parse_scene_string(scene_to_json(scene).dump());
    EXPECT_EQ(again.gates.size(), scene.gates.size());
    ASSERT_EQ(again.designed_paths.size(), scene.designed_paths.size());
    for (std::size_t i = 0; i < scene.designed_paths.size(); ++i)
        EXPECT_EQ(again.designed_paths[i].polyline, scene.designed_paths[i].polyline);
    EXPECT_EQ(again.forbidden_zones.front().polygon, scene.forbidden_zones.front().polygon);
}

TEST(ParseTrajectories, HeaderOnlyGivesEmptySet) {
    const auto set = parse("#resolution=640x360\ntraj_id,frame,x,y\n", minimal_scene());
    EXPECT_EQ(set.size(), 0u);
}

TEST(ParseTrajectories, FramesBecomeSeconds) {
    const auto set = parse("#resolution=640x360\ntraj_id,frame,x,y\n7,30,10,10\n7,0,5,5\n", minimal_scene(30));
    ASSERT_EQ(set.size(), 1u);
    const auto& t = set.trajectories[0];
    EXPECT_EQ(t.id(), "7");
    ASSERT_EQ(t.size(), 2u);
    EXPECT_DOUBLE_EQ(t.points()[0].t, 0.0);
    EXPECT_DOUBLE_EQ(t.points()[1].t, 1.0);
    EXPECT_EQ(t.points()[0].x, 5.0);  // sorted by time
}

TEST(ParseTrajectories, RescalesToSceneResolution) {
    const auto set = parse("#resolution=1280x720\ntraj_id,t,x,y\na,0,1280,720\na,1,320,90\n", minimal_scene());
    const auto pts = set.trajectories[0].points();
    EXPECT_DOUBLE_EQ(pts[0].x, 640);
    EXPECT_DOUBLE_EQ(pts[0].y, 360);
    EXPECT_DOUBLE_EQ(pts[1].x, 160);
    EXPECT_DOUBLE_EQ(pts[1].y, 45);
}

TEST(ParseTrajectories, ErrorsCarryLineNumbers) {
    const auto scene = minimal_scene();
    try {
        parse("#resolution=640x360\ntraj_id,t,x,y\na,0,1,1\na,1,oops,1\n", scene);
        FAIL();
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos) << e.what();
    }
    EXPECT_THROW(parse("traj_id,t,x,y\na,0,1,1\na,0,2,2\n", scene), InputError);          // duplicate time
    EXPECT_THROW(parse("traj_id,time,x,y\n", scene), InputError);                          // unknown header
    EXPECT_THROW(parse("traj_id,frame,t,x,y\n", scene), InputError);                       // mixed columns
    EXPECT_THROW(parse("traj_id,frame,x,y\na,1.5,0,0\n", scene), InputError);              // fractional frame
    EXPECT_THROW(parse("traj_id,t,x,y\na,0,1,1,9\n", scene), InputError);                  // extra column
    EXPECT_THROW(parse("traj_id,t,x,y\na,0,5000,1\n", scene), InputError);                 // out of frame
    EXPECT_THROW(parse("", scene), InputError);                                            // no header
}

TEST(ParseTrajectories, CountsDistinctIds) {
    std::ostringstream body;
    body << "traj_id,t,x,y\n";
    for (int row = 0; row < 50; ++row) body << (row % 7) << ',' << row << ",1,1\n";
    EXPECT_EQ(parse(body.str(), minimal_scene()).size(), 7u);
}

TEST(Normalize, IdentityAndScaling) {
    TrajectorySet set;
    set.resolution = {1280, 720};
    set.trajectories.emplace_back("p", std::vector<TrackPoint>{{1280, 720, 0}, {320, 90, 2}});
    const auto same = normalize(set, {1280, 720});
    EXPECT_EQ(same, set);
    const auto half = normalize(set, {640, 360});
    EXPECT_EQ(half.trajectories[0].points()[0], (TrackPoint{640, 360, 0}));
    EXPECT_EQ(half.trajectories[0].points()[1], (TrackPoint{160, 45, 2}));
}

TEST(Normalize, RoundTripRecoversCoordinates) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 1);
    TrajectorySet set;
    set.resolution = {1920, 1080};
    for (int i = 0; i < 20; ++i) {
        std::vector<TrackPoint> pts;
        for (int k = 0; k < 10; ++k) pts.push_back({u(rng) * 1920, u(rng) * 1080, double(k)});
        set.trajectories.emplace_back(std::to_string(i), pts);
    }
    const auto back = normalize(normalize(set, {640, 360}), set.resolution);
    for (std::size_t i = 0; i < set.size(); ++i)
        for (std::size_t k = 0; k < 10; ++k) {
            const auto& a = set.trajectories[i].points()[k];
            const auto& b = back.trajectories[i].points()[k];
            EXPECT_NEAR(b.x, a.x, 1e-9 * std::abs(a.x));
            EXPECT_NEAR(b.y, a.y, 1e-9 * std::abs(a.y));
            EXPECT_EQ(b.t, a.t);
        }
}

TEST(ParseTrajectories, SerializeRoundTripIsIdentity) {
    const auto scene = testsupport::three_path_scene();
    synth::SynthSpec spec = testsupport::recovery_spec(99);
    for (auto& b : spec.bundles) b.count = 3;
    const auto set = synth::generate(spec).trajectories;
    std::ostringstream out;
    write_trajectories(out, set);
    const auto first = parse(out.str(), scene);
    EXPECT_EQ(first, set);
    std::ostringstream again;
    write_trajectories(again, first);
    EXPECT_EQ(again.str(), out.str());
}
