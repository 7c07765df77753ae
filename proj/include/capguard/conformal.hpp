#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "capguard/dataset.hpp"
#include "capguard/featdiag.hpp"
#include "capguard/quantnet.hpp"

namespace capguard::conformal {

inline constexpr const char* kCalibrationSchema = "capguard-calibration-v1";

// Offset sentinel when the calibration group is too small for the requested
// error rate (m > n): the interval upper bound is +infinity.
inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

// Calibration groups smaller than this get a warning attached to the result.
inline constexpr std::int64_t kSmallGroupCount = 20;

enum class Mode { Marginal, Equalized };

// How far y falls outside the raw quantile band [q_lo, q_hi]; negative
// inside it. The split-calibration offset is an order statistic of these.
double conformity_score(double q_lo, double q_hi, double y);

// The m-th smallest score with m = ceil((n + 1)(1 - alpha)), the offset
// that turns raw quantile bands into finite-sample-valid intervals.
// Returns kUnbounded when m > n (calibration set too small). The product
// is snapped to the nearest integer within 1e-9 before the ceiling so
// exact-integer cases are not bumped up by float noise.
double conformal_quantile(std::vector<double> scores, double alpha);

struct CalibrationResult {
    double alpha = 0.1;
    Mode mode = Mode::Marginal;
    featdiag::GroupingSpec grouping;       // Kind::None in marginal mode
    std::vector<double> offsets;           // Q_g by group id; marginal: one entry
    std::vector<std::int64_t> counts;      // calibration samples per group
    std::vector<std::string> warnings;     // small-group notices, not persisted

    double offset(int group) const;        // throws on a group never calibrated
    bool unbounded(int group) const;
};

// Score-level calibration over explicit group ids (each in
// [0, grouping.group_count())); every group must appear. The model overload
// below reduces to this.
CalibrationResult calibrate_scores(const std::vector<double>& scores,
                                   const std::vector<int>& groups, double alpha,
                                   const featdiag::GroupingSpec& grouping);

// Run the model over the calibration set, score each sample, and compute
// per-group offsets (one pooled offset when grouping is None).
CalibrationResult calibrate(const quantnet::QuantileModel& model,
                            const dataset::Dataset& cal, double alpha,
                            const featdiag::GroupingSpec& grouping);

struct PredictionInterval {
    double lo = 0.0;  // floored at 0: the label is a magnitude
    double hi = 0.0;  // +infinity when unbounded
    int group = 0;
    bool unbounded = false;
};

// Apply a group's offset to a raw quantile pair. A positive offset widens
// the band on both sides, a negative one shrinks it; if the shrink would
// cross over, the interval collapses to the band midpoint rather than
// inverting. The low end is floored at zero.
PredictionInterval make_interval(double q_lo, double q_hi, int group,
                                 const CalibrationResult& calib);

// Full path: model prediction, group assignment, offset application.
PredictionInterval predict_interval(const quantnet::QuantileModel& model,
                                    const CalibrationResult& calib,
                                    const std::vector<double>& x);

struct CoverageReport {
    double coverage = 0.0;                      // marginal fraction covered
    std::vector<double> group_coverage;         // by group id
    std::vector<std::int64_t> group_n;          // test samples per group
    // (level, length) pairs sorted by level; levels 0.10/0.25/0.50/0.75/0.90
    // over finite interval lengths. Empty when every interval is unbounded.
    std::vector<std::pair<double, double>> length_percentiles;
    double mean_length = 0.0;                   // over finite intervals
    std::int64_t n = 0;
    std::int64_t n_unbounded = 0;               // excluded from length stats

    // 90th-percentile interval length; +infinity when nothing finite was
    // measured, so an all-unbounded candidate never wins selection.
    double p90_length() const;
};

// Raw quantile pair (q_lo, q_hi) for a feature vector: the seam that lets
// tests drive the interval/coverage machinery with crafted predictors.
using QuantilePredictor =
    std::function<std::pair<double, double>(const std::vector<double>&)>;

CoverageReport evaluate_with(const QuantilePredictor& predictor,
                             const CalibrationResult& calib,
                             const std::vector<std::vector<double>>& X,
                             const std::vector<double>& y,
                             std::vector<double>* lengths_out = nullptr);

// Coverage and interval-length metrics of a calibrated model on a test set.
// When lengths_out is given, it receives every finite interval length (for
// histogram export).
CoverageReport evaluate(const quantnet::QuantileModel& model,
                        const CalibrationResult& calib,
                        const dataset::Dataset& test,
                        std::vector<double>* lengths_out = nullptr);

struct SelectionResult {
    std::size_t index = 0;
    bool conformant = true;  // false: nothing met the tolerance, closest taken
};

// The paper's rule: keep candidates with |coverage - target| <= tolerance,
// then pick the smallest 90th-percentile interval length; with no survivor,
// fall back to the closest coverage and flag it.
SelectionResult select_model(const std::vector<CoverageReport>& candidates,
                             double target_coverage, double tolerance);

// Versioned JSON persistence (warnings are transient and not stored).
void save_calibration(const CalibrationResult& calib, const std::string& path);
CalibrationResult load_calibration(const std::string& path);

// "metric, group, value" rows: coverage, counts, mean and percentile lengths.
std::string coverage_report_csv(const CoverageReport& report);

// Equal-width histogram of finite interval lengths: "bin_lo, bin_hi, count".
std::string interval_length_histogram_csv(const std::vector<double>& lengths,
                                          int bins);

// Self-contained bar-chart rendering of the same histogram.
std::string interval_length_histogram_svg(const std::vector<double>& lengths,
                                          int bins);

}  // namespace capguard::conformal
