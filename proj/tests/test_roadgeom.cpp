#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "capguard/roadgeom.hpp"

#include <cmath>

using namespace capguard::roadgeom;

namespace {

RoadSegment const_segment(double length, double k, double w) {
    RoadSegment seg;
    seg.id = 0;
    seg.length = length;
    seg.knot_s = {0.0, length};
    seg.knot_k = {k, k};
    seg.knot_w = {w, w};
    return seg;
}

}  // namespace

TEST_CASE("generation is deterministic byte-for-byte") {
    auto a = generate_segments(1, 7);
    auto b = generate_segments(1, 7);
    CHECK(roads_to_json(a, 7).dump() == roads_to_json(b, 7).dump());
}

TEST_CASE("222 segments satisfy all type invariants") {
    auto segs = generate_segments(222, 1);
    REQUIRE(segs.size() == 222);
    for (const auto& seg : segs) {
        CHECK_NOTHROW(seg.validate());
        CHECK(seg.length >= 80.0);
        CHECK(seg.length <= 300.0);
        for (std::size_t i = 1; i < seg.knot_s.size(); ++i) {
            double gap = seg.knot_s[i] - seg.knot_s[i - 1];
            CHECK(gap >= 20.0 - 1e-12);
            CHECK(gap <= 60.0 + 1e-12);
        }
        for (double w : seg.knot_w) {
            CHECK(w >= 2.62);
            CHECK(w <= 5.67);
        }
    }
}

TEST_CASE("grouping threshold is straddled") {
    auto segs = generate_segments(1000, 3);
    int above = 0;
    for (const auto& seg : segs)
        if (segment_features(seg).k_abs_max > 0.003) ++above;
    double frac = above / 1000.0;
    CHECK(frac >= 0.3);
    CHECK(frac <= 0.7);
}

TEST_CASE("invalid config errors name the field") {
    SegmentGenConfig cfg;
    cfg.width_lo = 1.0;  // below the 2.0 m type bound
    CHECK_THROWS_WITH_AS(generate_segments(1, 1, cfg),
                         "SegmentGenConfig: invalid width_lo/width_hi", std::invalid_argument);
    SegmentGenConfig cfg2;
    cfg2.k_curvy_hi = 0.06;
    CHECK_THROWS_WITH_AS(generate_segments(1, 1, cfg2), "SegmentGenConfig: invalid k_curvy_hi",
                         std::invalid_argument);
}

TEST_CASE("segment_features examples") {
    auto f1 = segment_features(const_segment(100.0, 0.0, 3.31));
    CHECK(f1.w_min == 3.31);
    CHECK(f1.w_max == 3.31);
    CHECK(f1.k_min == 0.0);
    CHECK(f1.k_max == 0.0);
    CHECK(f1.k_abs_max == 0.0);

    RoadSegment seg2;
    seg2.length = 100.0;
    seg2.knot_s = {0.0, 50.0, 100.0};
    seg2.knot_k = {0.0, -0.02, 0.01};
    seg2.knot_w = {3.0, 3.47, 3.2};
    auto f2 = segment_features(seg2);
    CHECK(f2.k_min == -0.02);
    CHECK(f2.k_max == 0.01);
    CHECK(f2.k_abs_max == 0.02);
    CHECK(f2.w_min == 3.0);
    CHECK(f2.w_max == 3.47);
}

TEST_CASE("eval_geometry examples") {
    auto straight = const_segment(100.0, 0.0, 3.31);
    auto p = eval_geometry(straight, 50.0);
    CHECK(p.x == doctest::Approx(50.0).epsilon(1e-9));
    CHECK(p.y == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(p.heading == 0.0);

    auto arc = const_segment(200.0, 0.01, 3.31);
    CHECK(eval_geometry(arc, 100.0).heading == doctest::Approx(1.0).epsilon(1e-12));

    auto quarter = eval_geometry(arc, 157.08);
    CHECK(std::fabs(quarter.x - 100.0) < 0.1);
    CHECK(std::fabs(quarter.y - 100.0) < 0.1);

    CHECK_THROWS_AS(eval_geometry(arc, -1.0), std::domain_error);
    CHECK_THROWS_AS(eval_geometry(arc, 200.1), std::domain_error);
}

TEST_CASE("arc-length consistency within 0.5 percent") {
    auto segs = generate_segments(5, 11);
    for (const auto& seg : segs) {
        double prev_x = 0.0, prev_y = 0.0, acc = 0.0;
        int n = 200;
        for (int i = 1; i <= n; ++i) {
            double s = std::min(seg.length * i / n, seg.length);
            auto p = eval_geometry(seg, s);
            acc += std::hypot(p.x - prev_x, p.y - prev_y);
            prev_x = p.x;
            prev_y = p.y;
        }
        CHECK(std::fabs(acc - seg.length) / seg.length < 0.005);
    }
}

TEST_CASE("k_abs_max bounds sampled curvature") {
    auto segs = generate_segments(20, 5);
    for (const auto& seg : segs) {
        double kam = segment_features(seg).k_abs_max;
        for (double s = 0.0; s <= seg.length; s += 0.5)
            CHECK(kam >= std::fabs(eval_curvature(seg, s)) - 1e-12);
    }
}

TEST_CASE("json round-trip is exact") {
    auto segs = generate_segments(10, 9);
    for (const auto& seg : segs) {
        auto j = to_json(seg);
        auto back = segment_from_json(j);
        CHECK(to_json(back).dump() == j.dump());
        CHECK(back.length == seg.length);
        CHECK(back.knot_k == seg.knot_k);
        CHECK(back.knot_w == seg.knot_w);
        CHECK(back.knot_s == seg.knot_s);
    }
}

TEST_CASE("segment svg renders") {
    auto seg = generate_segments(1, 2)[0];
    auto svg = segment_svg(seg);
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("polyline") != std::string::npos);
}
