#include "capguard/roadgeom.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "capguard/rng.hpp"

namespace capguard::roadgeom {

void RoadSegment::validate() const {
    if (!(length > 0.0)) throw std::invalid_argument("RoadSegment: length must be > 0");
    std::size_t n = knot_s.size();
    if (n < 2 || knot_k.size() != n || knot_w.size() != n)
        throw std::invalid_argument("RoadSegment: profiles need >= 2 knots with matching sizes");
    if (knot_s.front() != 0.0) throw std::invalid_argument("RoadSegment: first knot s must be 0");
    if (knot_s.back() != length) throw std::invalid_argument("RoadSegment: last knot s must equal length");
    for (std::size_t i = 1; i < n; ++i)
        if (!(knot_s[i] > knot_s[i - 1]))
            throw std::invalid_argument("RoadSegment: knot s values must strictly increase");
    for (double w : knot_w)
        if (w < 2.0 || w > 6.0) throw std::invalid_argument("RoadSegment: width outside [2.0, 6.0] m");
    for (double k : knot_k)
        if (std::fabs(k) > 0.05) throw std::invalid_argument("RoadSegment: |curvature| exceeds 0.05 /m");
}

void SegmentGenConfig::validate() const {
    auto fail = [](const char* field) {
        throw std::invalid_argument(std::string("SegmentGenConfig: invalid ") + field);
    };
    if (!(length_lo > 0.0) || !(length_lo <= length_hi)) fail("length_lo/length_hi");
    if (width_lo < 2.0 || width_hi > 6.0 || width_lo > width_hi) fail("width_lo/width_hi");
    if (!(knot_gap_lo > 0.0) || knot_gap_lo > knot_gap_hi) fail("knot_gap_lo/knot_gap_hi");
    if (p_straight < 0.0 || p_straight > 1.0) fail("p_straight");
    if (k_straight < 0.0 || k_straight > 0.05) fail("k_straight");
    if (k_curvy_lo < 0.0 || k_curvy_lo > k_curvy_hi) fail("k_curvy_lo");
    if (k_curvy_hi > 0.05) fail("k_curvy_hi");
    if (!(magnitude_bias > 0.0)) fail("magnitude_bias");
}

std::vector<RoadSegment> generate_segments(int count, std::uint64_t seed,
                                           const SegmentGenConfig& cfg) {
    if (count < 1) throw std::invalid_argument("generate_segments: count must be >= 1");
    cfg.validate();
    std::vector<RoadSegment> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        rng::Stream rs(rng::mix(seed, static_cast<std::uint64_t>(i)));
        RoadSegment seg;
        seg.id = static_cast<std::uint64_t>(i);
        seg.length = rs.uniform(cfg.length_lo, cfg.length_hi);
        seg.knot_s.push_back(0.0);
        while (seg.length - seg.knot_s.back() > cfg.knot_gap_hi) {
            double remaining = seg.length - seg.knot_s.back();
            double gap = rs.uniform(cfg.knot_gap_lo,
                                    std::min(cfg.knot_gap_hi, remaining - cfg.knot_gap_lo));
            seg.knot_s.push_back(seg.knot_s.back() + gap);
        }
        seg.knot_s.push_back(seg.length);
        std::size_t n = seg.knot_s.size();
        seg.knot_w.resize(n);
        for (auto& w : seg.knot_w) w = rs.uniform(cfg.width_lo, cfg.width_hi);
        seg.knot_k.resize(n);
        if (rs.uniform01() < cfg.p_straight) {
            for (auto& k : seg.knot_k) k = rs.uniform(-cfg.k_straight, cfg.k_straight);
        } else {
            double mag = cfg.k_curvy_lo +
                         (cfg.k_curvy_hi - cfg.k_curvy_lo) *
                             std::pow(rs.uniform01(), cfg.magnitude_bias);
            double sign = rs.uniform01() < 0.5 ? 1.0 : -1.0;
            for (auto& k : seg.knot_k) k = sign * mag * rs.uniform(0.6, 1.0);
            // ease in from near-zero curvature at the segment entry
            seg.knot_k[0] = rs.uniform(-cfg.k_straight, cfg.k_straight);
        }
        seg.validate();
        out.push_back(std::move(seg));
    }
    return out;
}

SegmentFeatures segment_features(const RoadSegment& seg) {
    SegmentFeatures f;
    f.w_min = *std::min_element(seg.knot_w.begin(), seg.knot_w.end());
    f.w_max = *std::max_element(seg.knot_w.begin(), seg.knot_w.end());
    f.k_min = *std::min_element(seg.knot_k.begin(), seg.knot_k.end());
    f.k_max = *std::max_element(seg.knot_k.begin(), seg.knot_k.end());
    f.k_abs_max = std::max(std::fabs(f.k_min), std::fabs(f.k_max));
    return f;
}

namespace {

double interp_profile(const std::vector<double>& xs, const std::vector<double>& ys, double s) {
    if (s <= xs.front()) return ys.front();
    if (s >= xs.back()) return ys.back();
    auto it = std::upper_bound(xs.begin(), xs.end(), s);
    std::size_t hi = static_cast<std::size_t>(it - xs.begin());
    std::size_t lo = hi - 1;
    double t = (s - xs[lo]) / (xs[hi] - xs[lo]);
    return ys[lo] + (ys[hi] - ys[lo]) * t;
}

// Exact integral of the piecewise-linear curvature from 0 to s.
double heading_at(const RoadSegment& seg, double s) {
    double theta = 0.0;
    for (std::size_t i = 0; i + 1 < seg.knot_s.size(); ++i) {
        double a = seg.knot_s[i], b = seg.knot_s[i + 1];
        double ka = seg.knot_k[i], kb = seg.knot_k[i + 1];
        double hi = std::min(s, b);
        if (hi <= a) break;
        double u = hi - a;
        double slope = (kb - ka) / (b - a);
        theta += ka * u + 0.5 * slope * u * u;
        if (hi < b) break;
    }
    return theta;
}

}  // namespace

double eval_curvature(const RoadSegment& seg, double s) {
    return interp_profile(seg.knot_s, seg.knot_k, s);
}

double eval_width(const RoadSegment& seg, double s) {
    return interp_profile(seg.knot_s, seg.knot_w, s);
}

GeomPoint eval_geometry(const RoadSegment& seg, double s) {
    if (s < 0.0 || s > seg.length)
        throw std::domain_error("eval_geometry: s outside [0, length]");
    GeomPoint p;
    p.k = eval_curvature(seg, s);
    p.w = eval_width(seg, s);
    p.heading = heading_at(seg, s);
    int steps = std::max(1, static_cast<int>(std::ceil(s / 0.1)));
    double h = s / steps;
    if (s == 0.0) return p;
    double x = 0.0, y = 0.0;
    double c_prev = 1.0, s_prev = 0.0;  // cos/sin of heading at 0
    for (int j = 1; j <= steps; ++j) {
        double th = heading_at(seg, h * j);
        double c = std::cos(th), sn = std::sin(th);
        x += 0.5 * (c_prev + c) * h;
        y += 0.5 * (s_prev + sn) * h;
        c_prev = c;
        s_prev = sn;
    }
    p.x = x;
    p.y = y;
    return p;
}

nlohmann::json to_json(const RoadSegment& seg) {
    nlohmann::json ck = nlohmann::json::array();
    nlohmann::json wk = nlohmann::json::array();
    for (std::size_t i = 0; i < seg.knot_s.size(); ++i) {
        ck.push_back({seg.knot_s[i], seg.knot_k[i]});
        wk.push_back({seg.knot_s[i], seg.knot_w[i]});
    }
    return nlohmann::json{{"id", seg.id},
                          {"length_m", seg.length},
                          {"curvature_knots", ck},
                          {"width_knots", wk}};
}

RoadSegment segment_from_json(const nlohmann::json& j) {
    RoadSegment seg;
    seg.id = j.at("id").get<std::uint64_t>();
    seg.length = j.at("length_m").get<double>();
    for (const auto& kv : j.at("curvature_knots")) {
        seg.knot_s.push_back(kv.at(0).get<double>());
        seg.knot_k.push_back(kv.at(1).get<double>());
    }
    for (const auto& kv : j.at("width_knots")) seg.knot_w.push_back(kv.at(1).get<double>());
    if (j.at("width_knots").size() != seg.knot_s.size())
        throw std::invalid_argument("segment_from_json: knot count mismatch");
    seg.validate();
    return seg;
}

nlohmann::json roads_to_json(const std::vector<RoadSegment>& segs, std::uint64_t seed) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : segs) arr.push_back(to_json(s));
    return nlohmann::json{{"schema", "capguard-roads-v1"},
                          {"seed", seed},
                          {"count", segs.size()},
                          {"segments", arr}};
}

std::vector<RoadSegment> roads_from_json(const nlohmann::json& j) {
    if (j.at("schema").get<std::string>() != "capguard-roads-v1")
        throw std::runtime_error("roads_from_json: unknown schema " +
                                 j.at("schema").get<std::string>());
    std::vector<RoadSegment> out;
    for (const auto& sj : j.at("segments")) out.push_back(segment_from_json(sj));
    return out;
}

void save_roads(const std::vector<RoadSegment>& segs, std::uint64_t seed,
                const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_roads: cannot open " + path);
    f << roads_to_json(segs, seed).dump(2) << "\n";
}

std::vector<RoadSegment> load_roads(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_roads: cannot open " + path);
    nlohmann::json j;
    f >> j;
    return roads_from_json(j);
}

std::string segment_svg(const RoadSegment& seg) {
    std::vector<double> cx, cy, lx, ly, rx, ry;
    for (double s = 0.0; s <= seg.length; s += 1.0) {
        GeomPoint p = eval_geometry(seg, std::min(s, seg.length));
        double nx = -std::sin(p.heading), ny = std::cos(p.heading);
        cx.push_back(p.x);
        cy.push_back(p.y);
        lx.push_back(p.x + nx * p.w / 2);
        ly.push_back(p.y + ny * p.w / 2);
        rx.push_back(p.x - nx * p.w / 2);
        ry.push_back(p.y - ny * p.w / 2);
    }
    double xmin = 1e30, xmax = -1e30, ymin = 1e30, ymax = -1e30;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        xmin = std::min({xmin, lx[i], rx[i]});
        xmax = std::max({xmax, lx[i], rx[i]});
        ymin = std::min({ymin, ly[i], ry[i]});
        ymax = std::max({ymax, ly[i], ry[i]});
    }
    double pad = 5.0;
    std::ostringstream ss;
    ss << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" << (xmin - pad) << " "
       << (ymin - pad) << " " << (xmax - xmin + 2 * pad) << " " << (ymax - ymin + 2 * pad)
       << "\">\n";
    auto polyline = [&ss](const std::vector<double>& xs, const std::vector<double>& ys,
                          const char* style) {
        ss << "<polyline fill=\"none\" " << style << " points=\"";
        for (std::size_t i = 0; i < xs.size(); ++i) ss << xs[i] << "," << ys[i] << " ";
        ss << "\"/>\n";
    };
    polyline(lx, ly, "stroke=\"black\" stroke-width=\"0.2\"");
    polyline(rx, ry, "stroke=\"black\" stroke-width=\"0.2\"");
    polyline(cx, cy, "stroke=\"gray\" stroke-width=\"0.1\" stroke-dasharray=\"2,2\"");
    ss << "</svg>\n";
    return ss.str();
}

}  // namespace capguard::roadgeom
