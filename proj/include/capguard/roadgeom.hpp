#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace capguard::roadgeom {

// Piecewise-linear curvature and width profiles over arc length.
// Knot s values strictly increase, first = 0, last = length.
struct RoadSegment {
    std::uint64_t id = 0;
    double length = 0.0;
    std::vector<double> knot_s;
    std::vector<double> knot_k;
    std::vector<double> knot_w;

    void validate() const;  // throws std::invalid_argument on violation
};

struct SegmentFeatures {
    double w_min = 0.0;
    double w_max = 0.0;
    double k_min = 0.0;      // most negative curvature
    double k_max = 0.0;      // most positive curvature
    double k_abs_max = 0.0;  // max(|k_min|, |k_max|)
};

struct SegmentGenConfig {
    double length_lo = 80.0, length_hi = 300.0;
    double width_lo = 2.62, width_hi = 5.67;
    double knot_gap_lo = 20.0, knot_gap_hi = 60.0;
    double p_straight = 0.45;          // probability of the low-curvature class
    double k_straight = 0.0008;        // |k| bound for the low-curvature class
    double k_curvy_lo = 0.008;         // magnitude range for the curvy class
    double k_curvy_hi = 0.040;
    double magnitude_bias = 0.7;       // exponent < 1 pushes magnitudes upward

    void validate() const;  // throws naming the offending field
};

std::vector<RoadSegment> generate_segments(int count, std::uint64_t seed,
                                           const SegmentGenConfig& cfg = {});

SegmentFeatures segment_features(const RoadSegment& seg);

struct GeomPoint {
    double k = 0.0;
    double w = 0.0;
    double x = 0.0;
    double y = 0.0;
    double heading = 0.0;
};

// Curvature/width by linear interpolation; pose by integrating heading' = k(s)
// (closed form per knot interval) and trapezoidal position steps <= 0.1 m.
GeomPoint eval_geometry(const RoadSegment& seg, double s);

double eval_curvature(const RoadSegment& seg, double s);
double eval_width(const RoadSegment& seg, double s);

nlohmann::json to_json(const RoadSegment& seg);
RoadSegment segment_from_json(const nlohmann::json& j);

nlohmann::json roads_to_json(const std::vector<RoadSegment>& segs, std::uint64_t seed);
std::vector<RoadSegment> roads_from_json(const nlohmann::json& j);

void save_roads(const std::vector<RoadSegment>& segs, std::uint64_t seed,
                const std::string& path);
std::vector<RoadSegment> load_roads(const std::string& path);

// Centerline + lane boundary polylines as a standalone SVG document.
std::string segment_svg(const RoadSegment& seg);

}  // namespace capguard::roadgeom
