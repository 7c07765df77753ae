#pragma once

#include <functional>
#include <string>
#include <vector>

#include "capguard/conformal.hpp"
#include "capguard/quantnet.hpp"
#include "capguard/roadgeom.hpp"
#include "capguard/vehiclesim.hpp"

namespace capguard::gate {

// Maneuver feasibility gate: runs each candidate maneuver through the
// calibrated risk predictor and admits it only when the certified deviation
// bound fits inside both the physical clearance and the label cutoff.

enum class Verdict {
    Admit,
    RejectClearance,  // bound exceeds the lane's lateral margin
    RejectCutoff,     // bound reaches the clipped-label region
    RejectUnbounded,  // calibration could not certify a finite bound
};

const char* verdict_name(Verdict v);

struct CandidateDecision {
    vehiclesim::ManeuverTemplate maneuver;
    double eps_hat = 0.0;  // certified upper bound on deviation, m (+inf when unbounded)
    Verdict verdict = Verdict::Admit;
    std::string note;  // predictor failure message, empty otherwise
};

struct GateDecision {
    std::vector<CandidateDecision> candidates;  // in input acceleration order
    vehiclesim::ManeuverTemplate chosen;        // admitted candidate, or the MRM fallback
    int chosen_index = -1;                      // into candidates; -1 under MRM
    bool mrm = false;                           // true iff nothing was admitted
    double clearance = 0.0;                     // m, from the segment's narrowest width
};

// Conservative lateral margin: half the gap between the narrowest
// cross-section and the vehicle. Throws when the vehicle does not fit.
double clearance(double w_min, double w_veh);

// Risk-bound source: feature vector -> calibrated interval. The default
// wraps a trained model plus its calibration; tests can stub fixed bounds.
using UpperBound =
    std::function<conformal::PredictionInterval(const std::vector<double>&)>;

UpperBound conformal_bound(const quantnet::QuantileModel& model,
                           const conformal::CalibrationResult& calib);

// The candidate lateral-acceleration sweep: {2.5, 3.0, 3.5, 4.0, 4.5} m/s^2.
std::vector<double> default_accels();

// Evaluate a lane change at entry speed v_q over the candidate accelerations.
// Verdicts in precedence order: a predictor failure or an unbounded interval
// rejects as uncertifiable; a bound at or past the cutoff rejects regardless
// of clearance; a bound past the clearance rejects; otherwise admit. The
// chosen maneuver is the admitted candidate with the largest acceleration
// (shortest maneuver); with none, the minimal-risk stop (direction 0,
// target speed 0) is chosen and `mrm` is set.
GateDecision evaluate_candidates(const roadgeom::RoadSegment& seg, double v_q_kmh,
                                 const std::vector<double>& accels,
                                 const vehiclesim::DegradationState& deg,
                                 const UpperBound& bound, int direction = 1,
                                 const vehiclesim::VehicleParams& params = {});

GateDecision evaluate_candidates(const roadgeom::RoadSegment& seg, double v_q_kmh,
                                 const std::vector<double>& accels,
                                 const vehiclesim::DegradationState& deg,
                                 const quantnet::QuantileModel& model,
                                 const conformal::CalibrationResult& calib,
                                 int direction = 1,
                                 const vehiclesim::VehicleParams& params = {});

// Decision table: "a_max, eps_hat, verdict, chosen" with one row per
// candidate in input order.
std::string decision_table_csv(const GateDecision& decision);

// Reference lateral-offset trajectory with the certified envelope shaded and
// the clearance / cutoff margins drawn as parallel guides. Plots the chosen
// maneuver; under an MRM fallback it plots the first candidate to show what
// was rejected.
std::string decision_svg(const roadgeom::RoadSegment& seg,
                         const GateDecision& decision);

}  // namespace capguard::gate
