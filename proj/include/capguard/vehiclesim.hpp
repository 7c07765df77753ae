#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "capguard/roadgeom.hpp"

namespace capguard::vehiclesim {

enum class ManeuverType { LaneFollow, LaneChange, MRM };

const char* maneuver_name(ManeuverType t);

struct ManeuverTemplate {
    ManeuverType type = ManeuverType::LaneFollow;
    int r_q = 0;              // direction: -1, 0, +1
    double v_q_kmh = 0.0;     // target speed
    double a_lat_max = 2.5;   // m/s^2

    void validate() const;
};

// 12 remaining-performance factors in [0,1]; wheel order fl, fr, rl, rr.
struct DegradationState {
    std::array<double, 4> angle{1.0, 1.0, 1.0, 1.0};
    std::array<double, 4> rate{1.0, 1.0, 1.0, 1.0};
    std::array<double, 4> torque{1.0, 1.0, 1.0, 1.0};

    static DegradationState nominal() { return {}; }
    void validate() const;
};

struct VehicleParams {
    double mass = 1600.0;            // kg
    double yaw_inertia = 2400.0;     // kg m^2
    double lf = 1.25;                // CG to front axle, m
    double lr = 1.35;                // CG to rear axle, m
    double cf = 90000.0;             // front cornering stiffness, N/rad
    double cr = 100000.0;            // rear cornering stiffness, N/rad
    double delta_max = 0.5235987755982988;      // 30 deg, rad
    double delta_rate_max = 0.6981317007977318; // 40 deg/s, rad/s
    double torque_max = 500.0;       // per wheel, N m
    double w_veh = 1.96;             // vehicle width, m

    double wheelbase() const { return lf + lr; }
    // understeer gradient K so that steady-state steer = (L + K v^2) * k
    double understeer() const {
        return mass * (cr * lr - cf * lf) / (cf * cr * wheelbase());
    }
    void validate() const;
};

struct AxleLimits {
    double front_angle = 0.0;
    double rear_angle = 0.0;
    double front_rate = 0.0;
    double rear_rate = 0.0;
    double front_torque = 0.0;  // per axle
    double rear_torque = 0.0;
};

// Remaining-performance factor of one actuator limit: min(1, max(|lo|,|hi|)/nominal).
double degradation_factor(double nominal_limit, double lo, double hi);

// Per-wheel factors -> per-axle limits: min rule for angle/rate, sum for torque.
AxleLimits effective_axle_limits(const DegradationState& deg, const VehicleParams& params);

struct ReferenceTrajectory {
    ManeuverTemplate maneuver;
    double v0 = 0.0;        // entry speed, m/s
    double t_end = 0.0;     // planned horizon, s
    double h = 0.0;         // signed lane-change offset, m
    double T = 0.0;         // nominal lane-change duration, s
    double lead = 0.0;      // straight lead-in before the lane change, s
    double decel = 0.0;     // MRM deceleration, m/s^2
    // 50 Hz samples of the reference: time, target speed, lateral offset.
    std::vector<double> t, v_ref, d_ref;

    double offset_at(double time) const;   // quintic evaluated exactly
    double speed_at(double time) const;
};

// Plans the maneuver reference on the segment. For MRM an entry speed (km/h)
// must be supplied since the template's v_q is 0 by definition.
ReferenceTrajectory plan_reference(const roadgeom::RoadSegment& seg, const ManeuverTemplate& m,
                                   double entry_speed_kmh = -1.0);

struct TraceRow {
    double t = 0.0, s = 0.0, e_d = 0.0, delta_f = 0.0, delta_r = 0.0, v = 0.0;
};

struct SimOutcome {
    double eps_lat_max = 0.0;
    bool clipped = false;
    bool completed = false;
    std::vector<TraceRow> trace;  // 50 Hz, only when requested
};

class SimulationFault : public std::runtime_error {
  public:
    SimulationFault(const std::string& msg, std::vector<TraceRow> prefix)
        : std::runtime_error(msg), trace_prefix(std::move(prefix)) {}
    std::vector<TraceRow> trace_prefix;
};

inline constexpr double kEpsCut = 0.675;   // label cutoff, m
inline constexpr double kSimDt = 0.01;     // integration step, s
inline constexpr double kPlanHeadroom = 0.85;  // envelope share of degraded limits

// Version tag recorded in dataset provenance; bump on any change that can
// alter labels.
inline constexpr const char* kSimVersion = "capguard-sim-1.0";

// Closed-loop tracking under degraded limits; label clipped at kEpsCut.
SimOutcome simulate_tracking(const roadgeom::RoadSegment& seg, const ReferenceTrajectory& ref,
                             const DegradationState& deg, const VehicleParams& params,
                             bool record_trace = false);

std::string trace_csv(const std::vector<TraceRow>& trace);

}  // namespace capguard::vehiclesim
