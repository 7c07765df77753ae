#include "capguard/gate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "capguard/dataset.hpp"
#include "capguard/stats.hpp"

namespace capguard::gate {

const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Admit: return "Admit";
        case Verdict::RejectClearance: return "RejectClearance";
        case Verdict::RejectCutoff: return "RejectCutoff";
        case Verdict::RejectUnbounded: return "RejectUnbounded";
    }
    return "?";
}

double clearance(double w_min, double w_veh) {
    if (!(w_min > w_veh))
        throw std::invalid_argument(
            "clearance: narrowest width " + stats::fmt_g9(w_min) +
            " m does not exceed the vehicle width " + stats::fmt_g9(w_veh) + " m");
    return 0.5 * (w_min - w_veh);
}

UpperBound conformal_bound(const quantnet::QuantileModel& model,
                           const conformal::CalibrationResult& calib) {
    // The closure borrows both arguments; keep them alive while gating.
    return [&model, &calib](const std::vector<double>& x) {
        return conformal::predict_interval(model, calib, x);
    };
}

std::vector<double> default_accels() { return {2.5, 3.0, 3.5, 4.0, 4.5}; }

GateDecision evaluate_candidates(const roadgeom::RoadSegment& seg, double v_q_kmh,
                                 const std::vector<double>& accels,
                                 const vehiclesim::DegradationState& deg,
                                 const UpperBound& bound, int direction,
                                 const vehiclesim::VehicleParams& params) {
    if (accels.empty())
        throw std::invalid_argument("gate: candidate acceleration set is empty");
    if (!bound) throw std::invalid_argument("gate: no risk-bound predictor given");
    deg.validate();

    GateDecision decision;
    decision.clearance = clearance(roadgeom::segment_features(seg).w_min,
                                   params.w_veh);

    for (double a : accels) {
        CandidateDecision cand;
        cand.maneuver.type = vehiclesim::ManeuverType::LaneChange;
        cand.maneuver.r_q = direction;
        cand.maneuver.v_q_kmh = v_q_kmh;
        cand.maneuver.a_lat_max = a;
        cand.maneuver.validate();

        const auto x = dataset::make_features(seg, cand.maneuver, deg);
        bool certified = false;
        try {
            const auto iv = bound(std::vector<double>(x.begin(), x.end()));
            if (iv.unbounded || !std::isfinite(iv.hi)) {
                cand.eps_hat = std::numeric_limits<double>::infinity();
            } else {
                cand.eps_hat = std::max(0.0, iv.hi);
                certified = true;
            }
        } catch (const std::exception& e) {
            cand.eps_hat = std::numeric_limits<double>::infinity();
            cand.note = e.what();
        }

        if (!certified)
            cand.verdict = Verdict::RejectUnbounded;
        else if (cand.eps_hat >= vehiclesim::kEpsCut)
            cand.verdict = Verdict::RejectCutoff;  // dominates even a wide lane
        else if (cand.eps_hat > decision.clearance)
            cand.verdict = Verdict::RejectClearance;
        else
            cand.verdict = Verdict::Admit;
        decision.candidates.push_back(std::move(cand));
    }

    for (std::size_t i = 0; i < decision.candidates.size(); ++i) {
        const auto& cand = decision.candidates[i];
        if (cand.verdict != Verdict::Admit) continue;
        // Strict > keeps the earliest of equal accelerations.
        if (decision.chosen_index < 0 ||
            cand.maneuver.a_lat_max >
                decision.candidates[static_cast<std::size_t>(decision.chosen_index)]
                    .maneuver.a_lat_max)
            decision.chosen_index = static_cast<int>(i);
    }
    if (decision.chosen_index >= 0) {
        decision.chosen =
            decision.candidates[static_cast<std::size_t>(decision.chosen_index)]
                .maneuver;
    } else {
        decision.mrm = true;
        decision.chosen.type = vehiclesim::ManeuverType::MRM;
        decision.chosen.r_q = 0;
        decision.chosen.v_q_kmh = 0.0;
    }
    return decision;
}

GateDecision evaluate_candidates(const roadgeom::RoadSegment& seg, double v_q_kmh,
                                 const std::vector<double>& accels,
                                 const vehiclesim::DegradationState& deg,
                                 const quantnet::QuantileModel& model,
                                 const conformal::CalibrationResult& calib,
                                 int direction,
                                 const vehiclesim::VehicleParams& params) {
    return evaluate_candidates(seg, v_q_kmh, accels, deg,
                               conformal_bound(model, calib), direction, params);
}

std::string decision_table_csv(const GateDecision& decision) {
    std::ostringstream out;
    out << "a_max, eps_hat, verdict, chosen\n";
    for (std::size_t i = 0; i < decision.candidates.size(); ++i) {
        const auto& cand = decision.candidates[i];
        out << stats::fmt_g9(cand.maneuver.a_lat_max) << ", "
            << stats::fmt_g9(cand.eps_hat) << ", " << verdict_name(cand.verdict)
            << ", " << (static_cast<int>(i) == decision.chosen_index ? 1 : 0)
            << "\n";
    }
    return out.str();
}

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace

std::string decision_svg(const roadgeom::RoadSegment& seg,
                         const GateDecision& decision) {
    if (decision.candidates.empty())
        throw std::invalid_argument("decision_svg: decision has no candidates");
    const std::size_t shown =
        decision.chosen_index >= 0 ? static_cast<std::size_t>(decision.chosen_index)
                                   : 0;
    const auto& cand = decision.candidates[shown];
    const auto ref = vehiclesim::plan_reference(seg, cand.maneuver);

    const double cut = vehiclesim::kEpsCut;
    double d_lo = 0.0, d_hi = 0.0;
    for (double d : ref.d_ref) {
        d_lo = std::min(d_lo, d);
        d_hi = std::max(d_hi, d);
    }
    const double pad = cut + 0.3;
    d_lo -= pad;
    d_hi += pad;

    const double width = 640.0, height = 360.0;
    const double ml = 50.0, mr = 16.0, mt = 22.0, mb = 40.0;
    const auto X = [&](double t) {
        return ml + (width - ml - mr) * (t / ref.t_end);
    };
    const auto Y = [&](double d) {
        return mt + (height - mt - mb) * ((d_hi - d) / (d_hi - d_lo));
    };

    const auto path_along = [&](double offset) {
        std::string pts;
        for (std::size_t i = 0; i < ref.t.size(); ++i) {
            pts += num(X(ref.t[i]));
            pts += ',';
            pts += num(Y(ref.d_ref[i] + offset));
            pts += ' ';
        }
        return pts;
    };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << width
        << " " << height << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
        << "<rect width=\"" << width << "\" height=\"" << height
        << "\" fill=\"white\"/>\n";

    // Certified envelope around the reference, when finite.
    if (std::isfinite(cand.eps_hat)) {
        svg << "<polygon fill=\"#88aadd\" fill-opacity=\"0.35\" stroke=\"none\" "
               "points=\"";
        for (std::size_t i = 0; i < ref.t.size(); ++i)
            svg << num(X(ref.t[i])) << ',' << num(Y(ref.d_ref[i] + cand.eps_hat))
                << ' ';
        for (std::size_t i = ref.t.size(); i-- > 0;)
            svg << num(X(ref.t[i])) << ',' << num(Y(ref.d_ref[i] - cand.eps_hat))
                << ' ';
        svg << "\"/>\n";
    }

    // Clearance and cutoff margins as guides parallel to the reference.
    for (int sign : {-1, 1}) {
        svg << "<polyline fill=\"none\" stroke=\"#cc7722\" stroke-dasharray=\"6 3\" "
               "points=\""
            << path_along(sign * decision.clearance) << "\"/>\n";
        svg << "<polyline fill=\"none\" stroke=\"#aa2222\" stroke-dasharray=\"2 3\" "
               "points=\""
            << path_along(sign * cut) << "\"/>\n";
    }

    // The reference itself.
    svg << "<polyline fill=\"none\" stroke=\"#224488\" stroke-width=\"1.6\" "
           "points=\""
        << path_along(0.0) << "\"/>\n";

    // Axes.
    svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
        << "\" y2=\"" << height - mb << "\" stroke=\"#333\"/>\n"
        << "<line x1=\"" << ml << "\" y1=\"" << height - mb << "\" x2=\""
        << width - mr << "\" y2=\"" << height - mb << "\" stroke=\"#333\"/>\n"
        << "<text x=\"" << (ml + width - mr) / 2 << "\" y=\"" << height - 10
        << "\" text-anchor=\"middle\">time [s]</text>\n"
        << "<text x=\"14\" y=\"" << (mt + height - mb) / 2
        << "\" transform=\"rotate(-90 14 " << (mt + height - mb) / 2
        << ")\" text-anchor=\"middle\">lateral offset [m]</text>\n";

    std::string caption;
    if (decision.mrm) {
        caption = "no candidate admitted: minimal-risk stop; showing a = " +
                  stats::fmt_g9(cand.maneuver.a_lat_max) + " m/s^2";
    } else {
        caption = "chosen a = " + stats::fmt_g9(cand.maneuver.a_lat_max) +
                  " m/s^2, bound " + stats::fmt_g9(cand.eps_hat) + " m";
    }
    caption += ", clearance " + stats::fmt_g9(decision.clearance) + " m";
    svg << "<text x=\"" << ml + 6 << "\" y=\"" << mt - 7 << "\">" << caption
        << "</text>\n</svg>\n";
    return svg.str();
}

}  // namespace capguard::gate
