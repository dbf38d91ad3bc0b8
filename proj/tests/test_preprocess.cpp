#include <gtest/gtest.h>

#include <random>

#include "desirelines/preprocess.hpp"
#include "support.hpp"

using namespace desirelines;
using testsupport::make_trajectory;

namespace {

std::vector<Point2> straight(std::size_t n, double length) {
    std::vector<Point2> pts;
    for (std::size_t i = 0; i < n; ++i) pts.push_back({10 + length * i / (n - 1), 50});
    return pts;
}

TrajectorySet mixed_set() {
    TrajectorySet set;
    set.resolution = {640, 360};
    set.trajectories.push_back(make_trajectory("ok", straight(60, 200)));
    set.trajectories.push_back(make_trajectory("few", straight(5, 200)));
    set.trajectories.push_back(make_trajectory("short", straight(60, 20)));
    set.trajectories.push_back(Trajectory("gap", {{0, 0, 0}, {10, 0, 0.1}, {20, 0, 0.2}, {30, 0, 0.3}, {40, 0, 0.4},
                                                  {50, 0, 0.5}, {60, 0, 0.6}, {70, 0, 5.0}, {80, 0, 5.1}, {90, 0, 5.2}}));
    set.trajectories.push_back(make_trajectory("brief", straight(20, 200)));  // 19/30 s
    return set;
}

}  // namespace

TEST(FilterBroken, ReasonsInCriterionOrder) {
    const auto r = filter_broken(mixed_set(), FilterParams{});
    ASSERT_EQ(r.kept.size(), 1u);
    EXPECT_EQ(r.kept.trajectories[0].id(), "ok");
    const std::vector<Discard> expected{
        {"few", "min_points"}, {"short", "min_path_length"}, {"gap", "max_time_gap"}, {"brief", "min_duration"}};
    EXPECT_EQ(r.discarded, expected);
}

TEST(FilterBroken, PartitionsAndIsIdempotent) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0, 300);
    std::uniform_int_distribution<int> len(2, 40);
    TrajectorySet set;
    set.resolution = {640, 360};
    for (int i = 0; i < 200; ++i) {
        std::vector<TrackPoint> pts;
        double t = 0;
        const int n = len(rng);
        for (int k = 0; k < n; ++k) {
            pts.push_back({u(rng), u(rng) * 1.2, t});
            t += u(rng) < 15 ? 2.5 : 1.0 / 30;
        }
        set.trajectories.emplace_back(std::to_string(i), pts);
    }
    const auto once = filter_broken(set, FilterParams{}, 4);
    EXPECT_EQ(once.kept.size() + once.discarded.size(), set.size());
    std::set<std::string> seen;
    for (const auto& t : once.kept.trajectories) seen.insert(t.id());
    for (const auto& d : once.discarded) EXPECT_TRUE(seen.insert(d.id).second);
    EXPECT_EQ(seen.size(), set.size());
    const auto twice = filter_broken(once.kept, FilterParams{}, 1);
    EXPECT_EQ(twice.kept, once.kept);
    EXPECT_TRUE(twice.discarded.empty());
    EXPECT_EQ(filter_broken(set, FilterParams{}, 1).discarded, once.discarded);
}

TEST(FilterBroken, ScalesPixelThresholdsOnly) {
    const auto p = FilterParams{}.scaled_to({1280, 720});
    EXPECT_DOUBLE_EQ(p.min_path_length, 80.0);
    EXPECT_EQ(p.min_points, 10u);
    EXPECT_DOUBLE_EQ(p.max_time_gap, 2.0);
    EXPECT_THROW(FilterParams{.min_points = 0}.validate(), InputError);
}

TEST(Resample, LShapeAgainstCumulativeArc) {
    // L of total length 20: (0,0)->(10,0)->(10,10)
    const std::vector<Point2> pts{{0, 0}, {10, 0}, {10, 10}};
    const auto s = resample_points(pts, 5);
    const std::vector<Point2> expected{{0, 0}, {5, 0}, {10, 0}, {10, 5}, {10, 10}};
    ASSERT_EQ(s.size(), 5u);
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_NEAR(s[i].x, expected[i].x, 1e-12);
        EXPECT_NEAR(s[i].y, expected[i].y, 1e-12);
    }
}

TEST(Resample, StraightLineIsUniform) {
    const auto s = resample_points(straight(7, 630), 64);
    ASSERT_EQ(s.size(), 64u);
    for (std::size_t i = 0; i < 64; ++i) EXPECT_NEAR(s[i].x, 10 + 10.0 * i, 1e-9);
}

TEST(Resample, RejectsDegenerateGeometry) {
    EXPECT_THROW(resample_points(std::vector<Point2>{{1, 1}}, 64), InputError);
    EXPECT_THROW(resample_points(std::vector<Point2>{{1, 1}, {1, 1}, {1, 1}}, 64), InputError);
    EXPECT_THROW(resample_points(std::vector<Point2>{{0, 0}, {1, 1}}, 1), InputError);
    try {
        resample(Trajectory("still", {{5, 5, 0}, {5, 5, 1}}));
        FAIL();
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find("degenerate geometry"), std::string::npos);
    }
}

TEST(Resample, EndpointsExactAndSpacingEqual) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0, 600);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Point2> pts;
        for (int i = 0; i < 12; ++i) pts.push_back({u(rng), u(rng) * 0.6});
        const auto s = resample_points(pts, 64);
        EXPECT_EQ(s.front(), pts.front());
        EXPECT_EQ(s.back(), pts.back());
        // Each sample lies on the input curve at the expected cumulative arc.
        std::vector<double> cum{0};
        for (std::size_t i = 1; i < pts.size(); ++i) cum.push_back(cum.back() + euclidean(pts[i - 1], pts[i]));
        for (std::size_t j = 1; j + 1 < s.size(); ++j) {
            const double target = cum.back() * j / 63.0;
            const auto seg = std::upper_bound(cum.begin(), cum.end(), target) - cum.begin() - 1;
            const double f = (target - cum[seg]) / (cum[seg + 1] - cum[seg]);
            EXPECT_NEAR(s[j].x, pts[seg].x + f * (pts[seg + 1].x - pts[seg].x), 1e-7);
            EXPECT_NEAR(s[j].y, pts[seg].y + f * (pts[seg + 1].y - pts[seg].y), 1e-7);
        }
    }
}

TEST(Resample, InvariantUnderCollinearDensification) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0, 300);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Point2> pts, dense;
        for (int i = 0; i < 6; ++i) pts.push_back({u(rng), u(rng)});
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
            dense.push_back(pts[i]);
            dense.push_back({(pts[i].x + pts[i + 1].x) / 2, (pts[i].y + pts[i + 1].y) / 2});
        }
        dense.push_back(pts.back());
        const auto a = resample_points(pts, 64);
        const auto b = resample_points(dense, 64);
        for (std::size_t j = 0; j < 64; ++j) EXPECT_LT(euclidean(a[j], b[j]), 1e-7);
    }
}
