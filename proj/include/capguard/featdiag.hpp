#pragma once

#include <string>
#include <utility>
#include <vector>

#include "capguard/dataset.hpp"

namespace capguard::featdiag {

// Plug-in mutual information over equal-frequency bins. Columns with at most
// `bins` distinct values keep their native categories; a constant column
// yields 0 nats with the degenerate flag set.
struct MiResult {
    double nats = 0.0;
    bool degenerate = false;
};

MiResult mutual_information(const std::vector<double>& x, const std::vector<double>& y,
                            int bins = 16);

// Plug-in MI of a prebinned joint histogram (counts >= 0); the estimator the
// binning path reduces to.
double mi_from_joint_counts(const std::vector<std::vector<double>>& counts);

// Greedy minimum-redundancy ranking (difference variant): first pick
// maximizes MI(f; y); each later pick maximizes MI(f; y) minus the mean MI
// against the already selected features. Ties break toward the lower index.
// Returns feature indices in pick order.
std::vector<int> mrmr_rank(const std::vector<std::vector<double>>& features,
                           const std::vector<double>& y, int bins = 16);

struct BpResult {
    double F = 0.0;
    double p = 1.0;
};

// Heteroscedasticity F-test: OLS of y on [1, X], then OLS of the squared
// residuals on the same design; F = (R2/k) / ((1-R2)/(n-k-1)).
BpResult breusch_pagan(const std::vector<std::vector<double>>& features,
                       const std::vector<double>& y);

// Per-column split of the same joint fit: one OLS of y on [1, X], one
// auxiliary OLS of e^2 on [1, X]; each column's F is the square of its
// auxiliary t-statistic — the variance signal it carries with the other
// columns held fixed — with p from F(1, n-k-1). A column that merely
// co-varies with the real variance drivers scores near zero here, where a
// one-column-at-a-time fit would credit it with their signal.
//
// When rows come in dependent groups (several maneuvers simulated on the
// same segment under the same degradation draw), pass a cluster id per row:
// the coefficient variances then come from a cluster-robust sandwich, and p
// uses F(1, n_clusters - 1). Without it, a column that is constant within
// such groups gets its F inflated by the within-group residual correlation.
std::vector<BpResult> breusch_pagan_per_column(
    const std::vector<std::vector<double>>& features, const std::vector<double>& y,
    const std::vector<int>& clusters = {});

struct BfResult {
    double F = 0.0;
    double p = 1.0;
};

// Spread comparison across groups: one-way ANOVA on |y - median(group)|.
BfResult brown_forsythe(const std::vector<double>& y, const std::vector<int>& groups);

// Binary degradation dummy over the 12 factor columns (order: four steering
// angles, four steering rates, four torques): 1 iff at least n_w of the
// eight steering-angle/rate factors are <= l_d. Torque columns are counted
// out deliberately — their effect on the label is negligible.
std::vector<int> make_dummy(const std::vector<std::vector<double>>& deg_columns,
                            int n_w, double l_d);

struct GroupingSpec {
    enum class Kind { None, CurvatureThreshold, Dummy };
    Kind kind = Kind::None;
    double k_thresh = 0.003;  // 1/m, CurvatureThreshold only
    int n_w = 2;              // Dummy only
    double l_d = 0.1;         // Dummy only

    void validate() const;
    std::string describe() const;  // e.g. "curvature:0.003"
    int group_count() const { return kind == Kind::None ? 1 : 2; }
};

// Group id in {0, 1} for one sample under the spec; None maps everything
// to group 0. The vector overload takes a feature vector in dataset column
// order (needs at least the 19 standard columns).
int assign_group(const dataset::Sample& s, const GroupingSpec& spec);
int assign_group(const std::vector<double>& x, const GroupingSpec& spec);

struct DiagnosticsRow {
    std::string feature;
    double mi_nats = 0.0;
    bool mi_degenerate = false;
    int mrmr_rank = 0;  // 1..n for ranked features, 0 for appended dummy rows
    double bp_F = 0.0;
    double bp_p = 1.0;
    double bf_F = 0.0;
};

struct DiagnosticsReport {
    std::vector<DiagnosticsRow> rows;  // one per feature, then one per dummy config
    int bins = 16;
    std::string mrmr_variant = "MID";
};

// Scores every feature against the label: MI, greedy rank, per-feature
// heteroscedasticity F/p from one joint fit over all non-constant features
// (so each column is scored on its own variance signal, not on what it
// borrows from correlated columns), and the spread test with groups split at
// the feature's median. Each (n_w, l_d) pair appends a row for the
// corresponding degradation dummy, scored as an addition to that same joint
// design.
DiagnosticsReport diagnose(const dataset::Dataset& ds, int bins = 16,
                           const std::vector<std::pair<int, double>>& dummy_configs = {
                               {2, 0.1}});

std::string report_csv(const DiagnosticsReport& report);

}  // namespace capguard::featdiag
