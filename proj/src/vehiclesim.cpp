#include "capguard/vehiclesim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "capguard/stats.hpp"

namespace capguard::vehiclesim {

namespace {

constexpr double kLead = 2.0;         // straight lead-in before a lane change, s
constexpr double kMrmDecel = 2.0;     // m/s^2
constexpr double kWheelRadius = 0.3;  // m
constexpr double kGainK1 = 0.35;      // 1/m, lateral error gain
constexpr double kGainK2 = 1.2;       // heading error gain
constexpr double kRearShare = 0.3;    // rear feedback share

struct Quintic {
    double d = 0.0, dd = 0.0, ddd = 0.0;
};

// Minimum-jerk lateral profile d(tau) = h (10 tau^3 - 15 tau^4 + 6 tau^5).
Quintic quintic(double h, double T, double t) {
    if (t <= 0.0) return {0.0, 0.0, 0.0};
    if (t >= T) return {h, 0.0, 0.0};
    double tau = t / T;
    double t2 = tau * tau, t3 = t2 * tau, t4 = t3 * tau, t5 = t4 * tau;
    Quintic q;
    q.d = h * (10.0 * t3 - 15.0 * t4 + 6.0 * t5);
    q.dd = h / T * (30.0 * t2 - 60.0 * t3 + 30.0 * t4);
    q.ddd = h / (T * T) * (60.0 * tau - 180.0 * t2 + 120.0 * t3);
    return q;
}

// Backward pass limiting the profile's step-to-step change to max_step while
// never exceeding the original magnitude demand.
void backward_envelope(std::vector<double>& prof, double max_step) {
    for (std::size_t i = prof.size() - 1; i-- > 0;) {
        double hi = prof[i + 1] + max_step;
        double lo = prof[i + 1] - max_step;
        prof[i] = std::min(std::max(prof[i], lo), hi);
    }
}

// Stretched lane-change duration and start time so the plan's peak steering
// angle and rate demands fit within the degraded limits (with headroom),
// centred on the nominal maneuver midpoint and clamped to the run window.
void plan_times(double T, double v0, double t_end, double fa, double fr, double gain, double h,
                double lead, double* Tp_out, double* t0_out) {
    const double eps = 1e-9;
    double rate_need = gain * 60.0 * std::fabs(h) / (v0 * v0);               // / Tp^3
    double ang_need = (10.0 / std::sqrt(3.0)) * gain * std::fabs(h) / (v0 * v0);  // / Tp^2
    double Tr = std::cbrt(rate_need / std::max(kPlanHeadroom * fr, eps));
    double Ta = std::sqrt(ang_need / std::max(kPlanHeadroom * fa, eps));
    double Tp = std::max({T, Tr, Ta});
    double tmid = lead + 0.5 * T;
    Tp = std::min({Tp, 2.0 * tmid, 2.0 * (t_end - tmid)});
    Tp = std::max(Tp, T);
    *Tp_out = Tp;
    *t0_out = tmid - 0.5 * Tp;
}

inline double clamp(double x, double lim) { return std::min(std::max(x, -lim), lim); }

}  // namespace

const char* maneuver_name(ManeuverType t) {
    switch (t) {
        case ManeuverType::LaneFollow: return "lane_follow";
        case ManeuverType::LaneChange: return "lane_change";
        case ManeuverType::MRM: return "mrm";
    }
    return "unknown";
}

void ManeuverTemplate::validate() const {
    if (type == ManeuverType::LaneChange) {
        if (r_q != -1 && r_q != 1)
            throw std::invalid_argument("ManeuverTemplate: lane change requires r_q in {-1, 1}");
    } else if (r_q != 0) {
        throw std::invalid_argument("ManeuverTemplate: non-lane-change requires r_q = 0");
    }
    if (v_q_kmh < 0.0 || v_q_kmh > 70.0)
        throw std::invalid_argument("ManeuverTemplate: v_q outside [0, 70] km/h");
    if (a_lat_max < 1.0 || a_lat_max > 6.0)
        throw std::invalid_argument("ManeuverTemplate: a_lat_max outside [1.0, 6.0]");
    if (type == ManeuverType::MRM && v_q_kmh != 0.0)
        throw std::invalid_argument("ManeuverTemplate: MRM requires v_q = 0");
}

void DegradationState::validate() const {
    for (const auto* arr : {&angle, &rate, &torque})
        for (double f : *arr)
            if (f < 0.0 || f > 1.0)
                throw std::invalid_argument("DegradationState: factor outside [0, 1]");
}

void VehicleParams::validate() const {
    for (double v : {mass, yaw_inertia, lf, lr, cf, cr, delta_max, delta_rate_max, torque_max,
                     w_veh})
        if (!(v > 0.0)) throw std::invalid_argument("VehicleParams: all fields must be positive");
}

double degradation_factor(double nominal_limit, double lo, double hi) {
    if (!(nominal_limit > 0.0))
        throw std::domain_error("degradation_factor: nominal limit must be positive");
    if (lo > hi) throw std::invalid_argument("degradation_factor: lo > hi");
    return std::min(1.0, std::max(std::fabs(lo), std::fabs(hi)) / nominal_limit);
}

AxleLimits effective_axle_limits(const DegradationState& deg, const VehicleParams& params) {
    deg.validate();
    AxleLimits lim;
    lim.front_angle = params.delta_max * std::min(deg.angle[0], deg.angle[1]);
    lim.rear_angle = params.delta_max * std::min(deg.angle[2], deg.angle[3]);
    lim.front_rate = params.delta_rate_max * std::min(deg.rate[0], deg.rate[1]);
    lim.rear_rate = params.delta_rate_max * std::min(deg.rate[2], deg.rate[3]);
    lim.front_torque = params.torque_max * (deg.torque[0] + deg.torque[1]);
    lim.rear_torque = params.torque_max * (deg.torque[2] + deg.torque[3]);
    return lim;
}

double ReferenceTrajectory::offset_at(double time) const {
    if (maneuver.type != ManeuverType::LaneChange) return 0.0;
    return quintic(h, T, time - lead).d;
}

double ReferenceTrajectory::speed_at(double time) const {
    if (maneuver.type == ManeuverType::MRM) return std::max(0.0, v0 - decel * time);
    return v0;
}

ReferenceTrajectory plan_reference(const roadgeom::RoadSegment& seg, const ManeuverTemplate& m,
                                   double entry_speed_kmh) {
    seg.validate();
    m.validate();
    ReferenceTrajectory ref;
    ref.maneuver = m;
    double entry_kmh = entry_speed_kmh >= 0.0 ? entry_speed_kmh : m.v_q_kmh;
    if (m.type == ManeuverType::MRM) {
        if (!(entry_kmh > 0.0))
            throw std::invalid_argument("plan_reference: MRM needs a positive entry speed");
        ref.v0 = entry_kmh / 3.6;
        ref.decel = kMrmDecel;
        ref.t_end = ref.v0 / kMrmDecel;
        double stop_dist = ref.v0 * ref.v0 / (2.0 * kMrmDecel);
        if (stop_dist > seg.length)
            throw std::runtime_error("plan_reference: maneuver infeasible, stopping distance " +
                                     stats::fmt_g9(stop_dist) + " m exceeds segment length");
    } else {
        if (!(m.v_q_kmh > 0.0))
            throw std::invalid_argument("plan_reference: requires positive target speed");
        ref.v0 = m.v_q_kmh / 3.6;
        ref.t_end = seg.length / ref.v0;
        if (m.type == ManeuverType::LaneChange) {
            ref.lead = kLead;
            double s_start = std::min(ref.v0 * ref.lead, seg.length);
            ref.h = roadgeom::eval_width(seg, s_start) * static_cast<double>(m.r_q);
            ref.T = std::sqrt(10.0 * std::fabs(ref.h) / (std::sqrt(3.0) * m.a_lat_max));
            if (ref.lead + ref.T > ref.t_end)
                throw std::runtime_error(
                    "plan_reference: maneuver infeasible, duration " + stats::fmt_g9(ref.T) +
                    " s plus lead exceeds segment traversal time " + stats::fmt_g9(ref.t_end) +
                    " s");
        }
    }
    for (double t = 0.0; t <= ref.t_end + 1e-12; t += 0.02) {
        ref.t.push_back(t);
        ref.v_ref.push_back(ref.speed_at(t));
        ref.d_ref.push_back(ref.offset_at(t));
    }
    return ref;
}

SimOutcome simulate_tracking(const roadgeom::RoadSegment& seg, const ReferenceTrajectory& ref,
                             const DegradationState& deg, const VehicleParams& params,
                             bool record_trace) {
    params.validate();
    const AxleLimits lim = effective_axle_limits(deg, params);
    const double fa = lim.front_angle, fr = lim.front_rate;
    const double ra = lim.rear_angle, rr = lim.rear_rate;
    const double v0 = ref.v0;
    const double L = params.wheelbase();
    const double kus = params.understeer();
    const bool is_lc = ref.maneuver.type == ManeuverType::LaneChange;
    const bool is_mrm = ref.maneuver.type == ManeuverType::MRM;

    // Planned horizon and, for lane changes, the feasibility-stretched plan.
    const int n_plan = static_cast<int>(ref.t_end / kSimDt);
    double Tp = 0.0, t0p = 0.0;
    if (is_lc) {
        double gain0 = L + kus * v0 * v0;
        plan_times(ref.T, v0, ref.t_end, fa, fr, gain0, ref.h, ref.lead, &Tp, &t0p);
    }

    // Time-indexed plan arrays at the planned speed profile.
    std::vector<double> d_label(n_plan), d_track(n_plan), dd_track(n_plan), ff(n_plan);
    {
        double s_plan = 0.0;
        for (int i = 0; i < n_plan; ++i) {
            double t = i * kSimDt;
            double vp = ref.speed_at(t);
            double k_road = roadgeom::eval_curvature(seg, std::min(s_plan, seg.length));
            double k_ref = k_road;
            if (is_lc) {
                d_label[i] = quintic(ref.h, ref.T, t - ref.lead).d;
                Quintic q = quintic(ref.h, Tp, t - t0p);
                d_track[i] = q.d;
                dd_track[i] = q.dd;
                k_ref += q.ddd / (v0 * v0);
            }
            double gain = L + kus * vp * vp;
            ff[i] = clamp(gain * k_ref, fa);
            s_plan += vp * kSimDt;
        }
        backward_envelope(ff, kPlanHeadroom * fr * kSimDt);
    }

    const double t_cap = 3.0 * ref.t_end + 10.0;
    const int n_max = static_cast<int>(t_cap / kSimDt) + 1;

    double beta = 0.0, r = 0.0, th = 0.0, d = 0.0, delta_f = 0.0, delta_r = 0.0;
    double v = v0, s = 0.0;
    double eps_max = 0.0;
    SimOutcome out;
    std::vector<TraceRow> trace;

    for (int i = 0; i < n_max; ++i) {
        double t = i * kSimDt;
        if (!std::isfinite(beta) || !std::isfinite(r) || !std::isfinite(th) ||
            !std::isfinite(d) || !std::isfinite(v) || !std::isfinite(s))
            throw SimulationFault("simulate_tracking: non-finite state at t = " +
                                      stats::fmt_g9(t) + " s",
                                  std::move(trace));
        if (record_trace && i % 2 == 0) trace.push_back({t, s, d, delta_f, delta_r, v});

        double dl = i < n_plan ? d_label[i] : (is_lc ? ref.h : 0.0);
        double e_lbl = std::fabs(d - dl);
        if (e_lbl > eps_max) {
            eps_max = e_lbl;
            if (eps_max >= kEpsCut) {
                out.eps_lat_max = kEpsCut;
                out.clipped = true;
                out.completed = false;
                out.trace = std::move(trace);
                return out;
            }
        }

        if (s >= seg.length) {
            out.completed = true;
            break;
        }
        if (is_mrm && v <= 0.02 && t >= ref.t_end) {
            out.completed = true;
            break;
        }
        if (!is_mrm && v < 0.5) break;  // stalled (severe torque loss); not completed

        // Lateral control: feasibility-shaped feedforward + fixed-gain feedback
        // on the tracked plan. Feedback is never slew-limited; the actuator
        // integrator below enforces the physical rate limits.
        double dt_i = i < n_plan ? d_track[i] : (is_lc ? ref.h : 0.0);
        double ddt_i = i < n_plan ? dd_track[i] : 0.0;
        double ff_i;
        if (i < n_plan) {
            ff_i = ff[i];
        } else {
            double gain = L + kus * v * v;
            ff_i = clamp(gain * roadgeom::eval_curvature(seg, std::min(s, seg.length)), fa);
        }
        double e_d = d - dt_i;
        double e_psi = th - ddt_i / v0;
        double f_cmd = clamp(ff_i - kGainK1 * e_d - kGainK2 * e_psi, fa);
        double f_rate = clamp((f_cmd - delta_f) / kSimDt, fr);
        delta_f = clamp(delta_f + f_rate * kSimDt, fa);
        double r_cmd = clamp(-kRearShare * (kGainK1 * e_d + kGainK2 * e_psi), ra);
        double r_rate = clamp((r_cmd - delta_r) / kSimDt, rr);
        delta_r = clamp(delta_r + r_rate * kSimDt, ra);

        // Longitudinal control: proportional acceleration demand, resistance
        // feedforward. Demand shifts freely between axles, so only the summed
        // degraded torque capacity binds.
        double v_ref_t = ref.speed_at(t);
        double f_res = 200.0 + 0.4 * v * v;
        double a_des = clamp(0.8 * (v_ref_t - v), 2.5);
        double f_needed = params.mass * a_des + f_res;
        double f_drive =
            clamp(f_needed, (lim.front_torque + lim.rear_torque) / kWheelRadius);

        // Linear single-track dynamics in road-relative coordinates.
        double vd = std::max(v, 1.0);
        double k_road_now = roadgeom::eval_curvature(seg, std::min(s, seg.length));
        double Ff = params.cf * (delta_f - beta - params.lf * r / vd);
        double Fr = params.cr * (delta_r - beta + params.lr * r / vd);
        beta += ((Ff + Fr) / (params.mass * vd) - r) * kSimDt;
        r += (params.lf * Ff - params.lr * Fr) / params.yaw_inertia * kSimDt;
        th += (r - k_road_now * v) * kSimDt;
        d += v * (th + beta) * kSimDt;
        s += v * kSimDt;
        v = std::max(0.0, v + (f_drive - f_res) / params.mass * kSimDt);
    }

    out.eps_lat_max = std::min(eps_max, kEpsCut);
    out.clipped = false;
    out.trace = std::move(trace);
    return out;
}

std::string trace_csv(const std::vector<TraceRow>& trace) {
    std::ostringstream ss;
    ss << "t,s,e_d,delta_f,delta_r,v\n";
    for (const auto& row : trace)
        ss << stats::fmt_g9(row.t) << ',' << stats::fmt_g9(row.s) << ',' << stats::fmt_g9(row.e_d)
           << ',' << stats::fmt_g9(row.delta_f) << ',' << stats::fmt_g9(row.delta_r) << ','
           << stats::fmt_g9(row.v) << '\n';
    return ss.str();
}

}  // namespace capguard::vehiclesim
