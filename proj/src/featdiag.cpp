#include "capguard/featdiag.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

#include "capguard/stats.hpp"

namespace capguard::featdiag {

namespace {

// Equal-frequency bin index per row. Ties all take the bin of their first
// occurrence in sorted order, so equal values never straddle a bin edge;
// columns with at most `bins` distinct values keep native categories.
// `used` reports the nominal bin count (1 for a constant column).
std::vector<int> bins_of(const std::vector<double>& col, int bins, int* used) {
    const std::size_t n = col.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return col[a] < col[b]; });
    std::size_t distinct = n > 0 ? 1 : 0;
    for (std::size_t r = 1; r < n; ++r)
        if (col[order[r]] != col[order[r - 1]]) ++distinct;

    std::vector<int> bin(n, 0);
    if (distinct <= 1) {
        *used = static_cast<int>(distinct);
        return bin;
    }
    if (distinct <= static_cast<std::size_t>(bins)) {
        int cat = 0;
        bin[order[0]] = 0;
        for (std::size_t r = 1; r < n; ++r) {
            if (col[order[r]] != col[order[r - 1]]) ++cat;
            bin[order[r]] = cat;
        }
        *used = cat + 1;
        return bin;
    }
    int prev = 0;
    for (std::size_t r = 0; r < n; ++r) {
        int b = static_cast<int>(r * static_cast<std::size_t>(bins) / n);
        if (r > 0 && col[order[r]] == col[order[r - 1]]) b = prev;
        bin[order[r]] = b;
        prev = b;
    }
    *used = bins;
    return bin;
}

void check_mi_inputs(const std::vector<double>& x, const std::vector<double>& y, int bins) {
    if (bins < 2) throw std::invalid_argument("mutual_information: bins must be >= 2");
    if (x.size() != y.size())
        throw std::invalid_argument("mutual_information: column lengths differ");
    if (x.size() < static_cast<std::size_t>(10) * static_cast<std::size_t>(bins))
        throw std::invalid_argument("mutual_information: need at least 10*bins samples");
}

bool is_constant(const std::vector<double>& v) {
    for (const double x : v)
        if (x != v.front()) return false;
    return true;
}

// [1, X] design shared by the heteroscedasticity fits; `who` prefixes error
// messages with the calling operation.
Eigen::MatrixXd build_design(const std::vector<std::vector<double>>& features,
                             const std::vector<double>& y, const char* who) {
    const int k = static_cast<int>(features.size());
    if (k < 1) throw std::invalid_argument(std::string(who) + ": need at least one feature");
    const std::size_t n = y.size();
    for (const auto& f : features)
        if (f.size() != n)
            throw std::invalid_argument(std::string(who) + ": column lengths differ");
    if (n <= static_cast<std::size_t>(k) + 2)
        throw std::invalid_argument(std::string(who) + ": need n > n_features + 2");

    Eigen::MatrixXd X(n, k + 1);
    X.col(0).setOnes();
    for (int j = 0; j < k; ++j)
        X.col(j + 1) = Eigen::Map<const Eigen::VectorXd>(features[j].data(), n);
    return X;
}

void require_full_rank(const Eigen::MatrixXd& X, const char* who) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-8);
    if (qr.rank() < X.cols()) {
        const auto& perm = qr.colsPermutation().indices();
        std::ostringstream os;
        os << who << ": design matrix is rank deficient; collinear columns:";
        for (Eigen::Index r = qr.rank(); r < X.cols(); ++r) {
            if (perm[r] == 0) os << " intercept";
            else os << ' ' << perm[r] - 1;
        }
        throw std::invalid_argument(os.str());
    }
}

}  // namespace

double mi_from_joint_counts(const std::vector<std::vector<double>>& counts) {
    const std::size_t rows = counts.size();
    if (rows == 0) return 0.0;
    const std::size_t cols = counts.front().size();
    double total = 0.0;
    std::vector<double> row_sum(rows, 0.0), col_sum(cols, 0.0);
    for (std::size_t i = 0; i < rows; ++i) {
        if (counts[i].size() != cols)
            throw std::invalid_argument("mi_from_joint_counts: ragged count matrix");
        for (std::size_t j = 0; j < cols; ++j) {
            if (counts[i][j] < 0.0)
                throw std::invalid_argument("mi_from_joint_counts: negative count");
            row_sum[i] += counts[i][j];
            col_sum[j] += counts[i][j];
            total += counts[i][j];
        }
    }
    if (total <= 0.0) return 0.0;
    double mi = 0.0;
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) {
            const double c = counts[i][j];
            if (c > 0.0) mi += c / total * std::log(c * total / (row_sum[i] * col_sum[j]));
        }
    return std::max(0.0, mi);
}

MiResult mutual_information(const std::vector<double>& x, const std::vector<double>& y,
                            int bins) {
    check_mi_inputs(x, y, bins);
    int bx = 0, by = 0;
    auto ix = bins_of(x, bins, &bx);
    auto iy = bins_of(y, bins, &by);
    if (bx < 2 || by < 2) return {0.0, true};
    std::vector<std::vector<double>> counts(bx, std::vector<double>(by, 0.0));
    for (std::size_t i = 0; i < x.size(); ++i) counts[ix[i]][iy[i]] += 1.0;
    return {mi_from_joint_counts(counts), false};
}

std::vector<int> mrmr_rank(const std::vector<std::vector<double>>& features,
                           const std::vector<double>& y, int bins) {
    const int k = static_cast<int>(features.size());
    if (k < 1) throw std::invalid_argument("mrmr_rank: need at least one feature");
    for (const auto& f : features)
        if (f.size() != y.size())
            throw std::invalid_argument("mrmr_rank: column lengths differ");

    std::vector<double> rel(k);
    for (int i = 0; i < k; ++i) rel[i] = mutual_information(features[i], y, bins).nats;

    // Pairwise feature MI, filled lazily: only pairs against picked features
    // are ever needed.
    std::vector<std::vector<double>> red(k, std::vector<double>(k, -1.0));
    auto redundancy = [&](int a, int b) {
        if (red[a][b] < 0.0) {
            double m = mutual_information(features[a], features[b], bins).nats;
            red[a][b] = red[b][a] = m;
        }
        return red[a][b];
    };

    std::vector<int> order;
    std::vector<char> picked(k, 0);
    for (int step = 0; step < k; ++step) {
        int best = -1;
        double best_score = 0.0;
        for (int c = 0; c < k; ++c) {
            if (picked[c]) continue;
            double score = rel[c];
            for (int s : order) score -= redundancy(c, s) / static_cast<double>(order.size());
            if (best < 0 || score > best_score) {
                best = c;
                best_score = score;
            }
        }
        picked[best] = 1;
        order.push_back(best);
    }
    return order;
}

BpResult breusch_pagan(const std::vector<std::vector<double>>& features,
                       const std::vector<double>& y) {
    const int k = static_cast<int>(features.size());
    const std::size_t n = y.size();
    Eigen::MatrixXd X = build_design(features, y, "breusch_pagan");
    require_full_rank(X, "breusch_pagan");

    Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
    Eigen::MatrixXd xtx = X.transpose() * X;
    xtx.diagonal().array() += 1e-10;  // jitter for conditioning, not rank repair
    auto ldlt = xtx.ldlt();
    Eigen::VectorXd beta = ldlt.solve(X.transpose() * yv);
    Eigen::VectorXd e = yv - X * beta;

    // A numerically perfect fit leaves only rounding noise in the residuals;
    // there is no variance left to test.
    const double sst_main = (yv.array() - yv.mean()).square().sum();
    if (e.squaredNorm() <= 1e-18 * sst_main) return {0.0, 1.0};

    Eigen::VectorXd e2 = e.array().square();
    Eigen::VectorXd gamma = ldlt.solve(X.transpose() * e2);
    Eigen::VectorXd fitted = X * gamma;

    const double mean_e2 = e2.mean();
    const double sst = (e2.array() - mean_e2).square().sum();
    // Constant squared residuals never vary beyond rounding either.
    if (!(sst > 1e-12 * static_cast<double>(n) * mean_e2 * mean_e2)) return {0.0, 1.0};
    const double sse = (e2 - fitted).squaredNorm();
    double r2 = 1.0 - sse / sst;
    r2 = std::min(1.0, std::max(0.0, r2));

    const double df2 = static_cast<double>(n) - k - 1;
    if (1.0 - r2 <= 0.0) return {std::numeric_limits<double>::infinity(), 0.0};
    const double F = (r2 / k) / ((1.0 - r2) / df2);
    return {F, stats::f_tail(F, k, df2)};
}

std::vector<BpResult> breusch_pagan_per_column(
    const std::vector<std::vector<double>>& features, const std::vector<double>& y,
    const std::vector<int>& clusters) {
    const int k = static_cast<int>(features.size());
    const std::size_t n = y.size();
    Eigen::MatrixXd X = build_design(features, y, "breusch_pagan_per_column");
    require_full_rank(X, "breusch_pagan_per_column");

    int n_clusters = 0;
    if (!clusters.empty()) {
        if (clusters.size() != n)
            throw std::invalid_argument(
                "breusch_pagan_per_column: cluster ids must cover every row");
        for (int c : clusters) {
            if (c < 0)
                throw std::invalid_argument(
                    "breusch_pagan_per_column: negative cluster id");
            n_clusters = std::max(n_clusters, c + 1);
        }
        std::vector<char> seen(n_clusters, 0);
        for (int c : clusters) seen[c] = 1;
        int live = 0;
        for (char s : seen) live += s;
        n_clusters = live;
        if (n_clusters < 2)
            throw std::invalid_argument(
                "breusch_pagan_per_column: need at least two clusters");
    }

    Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
    Eigen::MatrixXd xtx = X.transpose() * X;
    xtx.diagonal().array() += 1e-10;  // jitter for conditioning, not rank repair
    auto ldlt = xtx.ldlt();
    Eigen::VectorXd beta = ldlt.solve(X.transpose() * yv);
    Eigen::VectorXd e = yv - X * beta;

    const double sst_main = (yv.array() - yv.mean()).square().sum();
    if (e.squaredNorm() <= 1e-18 * sst_main)
        return std::vector<BpResult>(k, BpResult{0.0, 1.0});

    Eigen::VectorXd e2 = e.array().square();
    Eigen::VectorXd gamma = ldlt.solve(X.transpose() * e2);
    const double mean_e2 = e2.mean();
    const double sst = (e2.array() - mean_e2).square().sum();
    if (!(sst > 1e-12 * static_cast<double>(n) * mean_e2 * mean_e2))
        return std::vector<BpResult>(k, BpResult{0.0, 1.0});

    Eigen::VectorXd u = e2 - X * gamma;
    Eigen::MatrixXd ginv = ldlt.solve(Eigen::MatrixXd::Identity(k + 1, k + 1));

    Eigen::VectorXd var_diag(k + 1);
    double df2 = 0.0;
    if (clusters.empty()) {
        const double s2 = u.squaredNorm() / (static_cast<double>(n) - k - 1);
        var_diag = s2 * ginv.diagonal();
        df2 = static_cast<double>(n) - k - 1;
    } else {
        // Sandwich with per-cluster score sums: arbitrary correlation inside
        // a cluster, independence across clusters.
        std::map<int, Eigen::VectorXd> score;
        for (std::size_t i = 0; i < n; ++i) {
            auto [it, fresh] = score.try_emplace(clusters[i],
                                                 Eigen::VectorXd::Zero(k + 1));
            it->second += X.row(i).transpose() * u[i];
        }
        Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k + 1, k + 1);
        for (const auto& [id, s] : score) meat += s * s.transpose();
        const double g = static_cast<double>(n_clusters);
        const double correction = g / (g - 1.0) * (static_cast<double>(n) - 1.0) /
                                  (static_cast<double>(n) - k - 1);
        var_diag = correction * (ginv * meat * ginv).diagonal();
        df2 = g - 1.0;
    }

    std::vector<BpResult> out(k);
    for (int j = 0; j < k; ++j) {
        const double var_j = var_diag[j + 1];
        if (!(var_j > 0.0)) {
            out[j] = {std::numeric_limits<double>::infinity(), 0.0};
            continue;
        }
        const double F = gamma[j + 1] * gamma[j + 1] / var_j;
        out[j] = {F, stats::f_tail(F, 1.0, df2)};
    }
    return out;
}

BfResult brown_forsythe(const std::vector<double>& y, const std::vector<int>& groups) {
    const std::size_t n = y.size();
    if (groups.size() != n)
        throw std::invalid_argument("brown_forsythe: column lengths differ");
    int g_max = -1;
    for (int g : groups) {
        if (g < 0) throw std::invalid_argument("brown_forsythe: negative group id");
        g_max = std::max(g_max, g);
    }
    std::vector<std::vector<double>> members(g_max + 1);
    for (std::size_t i = 0; i < n; ++i) members[groups[i]].push_back(y[i]);

    std::vector<std::vector<double>*> live;
    for (auto& m : members)
        if (!m.empty()) live.push_back(&m);
    const int g_eff = static_cast<int>(live.size());
    if (g_eff < 2 || n <= static_cast<std::size_t>(g_eff)) return {0.0, 1.0};

    // |y - group median|, then a plain one-way ANOVA across groups.
    double grand = 0.0;
    std::vector<std::vector<double>> z(g_eff);
    std::vector<double> z_mean(g_eff, 0.0);
    for (int j = 0; j < g_eff; ++j) {
        const double med = stats::quantile(*live[j], 0.5);
        z[j].reserve(live[j]->size());
        for (double v : *live[j]) z[j].push_back(std::fabs(v - med));
        for (double v : z[j]) z_mean[j] += v;
        grand += z_mean[j];
        z_mean[j] /= static_cast<double>(z[j].size());
    }
    grand /= static_cast<double>(n);

    double between = 0.0, within = 0.0;
    for (int j = 0; j < g_eff; ++j) {
        between += static_cast<double>(z[j].size()) * (z_mean[j] - grand) * (z_mean[j] - grand);
        for (double v : z[j]) within += (v - z_mean[j]) * (v - z_mean[j]);
    }
    const double df1 = g_eff - 1;
    const double df2 = static_cast<double>(n) - g_eff;
    if (!(between > 0.0)) return {0.0, 1.0};
    if (!(within > 0.0)) return {std::numeric_limits<double>::infinity(), 0.0};
    const double F = (between / df1) / (within / df2);
    return {F, stats::f_tail(F, df1, df2)};
}

std::vector<int> make_dummy(const std::vector<std::vector<double>>& deg_columns,
                            int n_w, double l_d) {
    if (deg_columns.size() != 12)
        throw std::invalid_argument("make_dummy: expected 12 degradation columns");
    if (n_w < 1 || n_w > 12)
        throw std::invalid_argument("make_dummy: n_w must be in [1, 12]");
    if (!(l_d > 0.0 && l_d < 1.0))
        throw std::invalid_argument("make_dummy: l_d must be in (0, 1)");
    const std::size_t n = deg_columns.front().size();
    for (const auto& c : deg_columns)
        if (c.size() != n) throw std::invalid_argument("make_dummy: column lengths differ");

    std::vector<int> out(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        int hit = 0;
        for (int c = 0; c < 8; ++c)  // steering angle + rate only
            if (deg_columns[c][i] <= l_d) ++hit;
        out[i] = hit >= n_w ? 1 : 0;
    }
    return out;
}

void GroupingSpec::validate() const {
    switch (kind) {
        case Kind::None:
            return;
        case Kind::CurvatureThreshold:
            if (!(k_thresh > 0.0))
                throw std::invalid_argument("GroupingSpec: k_thresh must be > 0");
            return;
        case Kind::Dummy:
            if (n_w < 1 || n_w > 12)
                throw std::invalid_argument("GroupingSpec: n_w must be in [1, 12]");
            if (!(l_d > 0.0 && l_d < 1.0))
                throw std::invalid_argument("GroupingSpec: l_d must be in (0, 1)");
            return;
    }
    throw std::invalid_argument("GroupingSpec: unknown kind");
}

std::string GroupingSpec::describe() const {
    switch (kind) {
        case Kind::None: return "none";
        case Kind::CurvatureThreshold: return "curvature:" + stats::fmt_g9(k_thresh);
        case Kind::Dummy:
            return "dummy:" + std::to_string(n_w) + "," + stats::fmt_g9(l_d);
    }
    return "unknown";
}

namespace {

int assign_group_impl(const double* x, std::size_t n, const GroupingSpec& spec) {
    spec.validate();
    if (n < dataset::kFeatureCount)
        throw std::invalid_argument("assign_group: feature vector too short");
    switch (spec.kind) {
        case GroupingSpec::Kind::None:
            return 0;
        case GroupingSpec::Kind::CurvatureThreshold:
            return x[18] > spec.k_thresh ? 1 : 0;
        case GroupingSpec::Kind::Dummy: {
            int hit = 0;
            for (int c = 6; c < 14; ++c)  // steering angle + rate factors
                if (x[c] <= spec.l_d) ++hit;
            return hit >= spec.n_w ? 1 : 0;
        }
    }
    return 0;
}

}  // namespace

int assign_group(const dataset::Sample& s, const GroupingSpec& spec) {
    return assign_group_impl(s.x.data(), s.x.size(), spec);
}

int assign_group(const std::vector<double>& x, const GroupingSpec& spec) {
    return assign_group_impl(x.data(), x.size(), spec);
}

DiagnosticsReport diagnose(const dataset::Dataset& ds, int bins,
                           const std::vector<std::pair<int, double>>& dummy_configs) {
    const std::size_t n = ds.samples.size();
    std::vector<std::vector<double>> cols(dataset::kFeatureCount,
                                          std::vector<double>(n));
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (int j = 0; j < dataset::kFeatureCount; ++j) cols[j][i] = ds.samples[i].x[j];
        y[i] = ds.samples[i].y;
    }

    DiagnosticsReport report;
    report.bins = bins;

    auto order = mrmr_rank(cols, y, bins);
    std::vector<int> rank_of(dataset::kFeatureCount, 0);
    for (std::size_t pos = 0; pos < order.size(); ++pos)
        rank_of[order[pos]] = static_cast<int>(pos) + 1;

    // One joint heteroscedasticity fit over the non-constant features, so
    // every column is scored on its own variance signal rather than on what
    // it shares with the real drivers. Constant columns carry no signal and
    // would make the design singular, so they score zero directly.
    std::vector<int> live;
    std::vector<std::vector<double>> design;
    for (int j = 0; j < dataset::kFeatureCount; ++j) {
        if (!is_constant(cols[j])) {
            live.push_back(j);
            design.push_back(cols[j]);
        }
    }

    // Rows that share segment geometry and degradation factors are maneuvers
    // simulated on the same scenario block; their residuals move together,
    // so the variance fit clusters on that identity. Maneuver-specific
    // columns (turn direction, speed, acceleration) are left out of the key.
    static constexpr int kBlockCols[] = {1, 2, 3, 6, 7, 8, 9, 10, 11, 12, 13,
                                         14, 15, 16, 17, 18};
    std::map<std::vector<double>, int> block_ids;
    std::vector<int> clusters(n);
    std::vector<double> key(std::size(kBlockCols));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < std::size(kBlockCols); ++c)
            key[c] = cols[kBlockCols[c]][i];
        clusters[i] = block_ids.try_emplace(key, static_cast<int>(block_ids.size()))
                          .first->second;
    }
    if (block_ids.size() < 2) clusters.clear();  // single block: no grouping info

    std::vector<BpResult> bp_of(dataset::kFeatureCount, BpResult{0.0, 1.0});
    if (!design.empty()) {
        auto per = breusch_pagan_per_column(design, y, clusters);
        for (std::size_t i = 0; i < live.size(); ++i) bp_of[live[i]] = per[i];
    }

    for (int j = 0; j < dataset::kFeatureCount; ++j) {
        DiagnosticsRow row;
        row.feature = dataset::kFeatureNames[j];
        row.mrmr_rank = rank_of[j];
        auto mi = mutual_information(cols[j], y, bins);
        row.mi_nats = mi.nats;
        row.mi_degenerate = mi.degenerate;
        row.bp_F = bp_of[j].F;
        row.bp_p = bp_of[j].p;
        if (!is_constant(cols[j])) {
            const double med = stats::quantile(cols[j], 0.5);
            std::vector<int> groups(n, 0);
            for (std::size_t i = 0; i < n; ++i) groups[i] = cols[j][i] > med ? 1 : 0;
            row.bf_F = brown_forsythe(y, groups).F;
        }
        report.rows.push_back(std::move(row));
    }

    for (const auto& [n_w, l_d] : dummy_configs) {
        std::vector<std::vector<double>> deg(cols.begin() + 6, cols.begin() + 18);
        auto dummy = make_dummy(deg, n_w, l_d);
        std::vector<double> as_double(dummy.begin(), dummy.end());

        DiagnosticsRow row;
        row.feature = "D_ge" + std::to_string(n_w) + "_le" + stats::fmt_g9(l_d);
        row.mrmr_rank = 0;
        auto mi = mutual_information(as_double, y, bins);
        row.mi_nats = mi.nats;
        row.mi_degenerate = mi.degenerate;
        if (!is_constant(as_double)) {
            auto with = design;
            with.push_back(as_double);
            auto per = breusch_pagan_per_column(with, y, clusters);
            row.bp_F = per.back().F;
            row.bp_p = per.back().p;
            row.bf_F = brown_forsythe(y, dummy).F;
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

std::string report_csv(const DiagnosticsReport& report) {
    std::ostringstream os;
    os << "feature, mi_nats, mrmr_rank, bp_F, bp_p, bf_F\n";
    for (const auto& r : report.rows) {
        os << r.feature << ',' << stats::fmt_g9(r.mi_nats) << ',' << r.mrmr_rank << ','
           << stats::fmt_g9(r.bp_F) << ',' << stats::fmt_g9(r.bp_p) << ','
           << stats::fmt_g9(r.bf_F) << '\n';
    }
    return os.str();
}

}  // namespace capguard::featdiag
