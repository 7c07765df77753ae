#include "capguard/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "capguard/stats.hpp"

namespace capguard::conformal {

namespace {

constexpr double kPercentileLevels[] = {0.10, 0.25, 0.50, 0.75, 0.90};

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("conformal: alpha must be in (0, 1)");
}

std::vector<double> sample_x(const dataset::Sample& s) {
    return std::vector<double>(s.x.begin(), s.x.end());
}

}  // namespace

double conformity_score(double q_lo, double q_hi, double y) {
    if (!(q_lo <= q_hi))
        throw std::invalid_argument("conformity_score: need q_lo <= q_hi");
    return std::max(q_lo - y, y - q_hi);
}

double conformal_quantile(std::vector<double> scores, double alpha) {
    check_alpha(alpha);
    const std::size_t n = scores.size();
    if (n == 0)
        throw std::invalid_argument("conformal_quantile: need at least one score");
    double raw = static_cast<double>(n + 1) * (1.0 - alpha);
    const double nearest = std::round(raw);
    if (std::fabs(raw - nearest) < 1e-9) raw = nearest;
    const double m = std::ceil(raw);
    if (m > static_cast<double>(n)) return kUnbounded;
    std::sort(scores.begin(), scores.end());
    return scores[static_cast<std::size_t>(m) - 1];
}

double CalibrationResult::offset(int group) const {
    if (group < 0 || static_cast<std::size_t>(group) >= offsets.size())
        throw std::out_of_range("calibration: group " + std::to_string(group) +
                                " was not calibrated");
    return offsets[static_cast<std::size_t>(group)];
}

bool CalibrationResult::unbounded(int group) const {
    return std::isinf(offset(group));
}

CalibrationResult calibrate_scores(const std::vector<double>& scores,
                                   const std::vector<int>& groups, double alpha,
                                   const featdiag::GroupingSpec& grouping) {
    check_alpha(alpha);
    grouping.validate();
    if (scores.size() != groups.size())
        throw std::invalid_argument("calibrate: scores and groups differ in length");
    if (scores.empty())
        throw std::invalid_argument("calibrate: calibration set is empty");
    const int n_groups = grouping.group_count();

    std::vector<std::vector<double>> by_group(static_cast<std::size_t>(n_groups));
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const int g = groups[i];
        if (g < 0 || g >= n_groups)
            throw std::invalid_argument("calibrate: group id " + std::to_string(g) +
                                        " outside the grouping's range");
        by_group[static_cast<std::size_t>(g)].push_back(scores[i]);
    }

    CalibrationResult result;
    result.alpha = alpha;
    result.mode = grouping.kind == featdiag::GroupingSpec::Kind::None
                      ? Mode::Marginal
                      : Mode::Equalized;
    result.grouping = grouping;
    for (int g = 0; g < n_groups; ++g) {
        const auto& sc = by_group[static_cast<std::size_t>(g)];
        if (sc.empty())
            throw std::runtime_error("calibrate: group " + std::to_string(g) +
                                     " has no calibration samples");
        const auto count = static_cast<std::int64_t>(sc.size());
        if (count < kSmallGroupCount)
            result.warnings.push_back(
                "group " + std::to_string(g) + " has only " +
                std::to_string(count) +
                " calibration samples; its offset may be unbounded");
        result.offsets.push_back(conformal_quantile(sc, alpha));
        result.counts.push_back(count);
    }
    return result;
}

CalibrationResult calibrate(const quantnet::QuantileModel& model,
                            const dataset::Dataset& cal, double alpha,
                            const featdiag::GroupingSpec& grouping) {
    if (cal.samples.empty())
        throw std::invalid_argument("calibrate: calibration set is empty");
    std::vector<double> scores;
    std::vector<int> groups;
    scores.reserve(cal.samples.size());
    groups.reserve(cal.samples.size());
    for (const auto& s : cal.samples) {
        const auto [q_lo, q_hi] = model.predict(sample_x(s));
        scores.push_back(conformity_score(q_lo, q_hi, s.y));
        groups.push_back(featdiag::assign_group(s, grouping));
    }
    return calibrate_scores(scores, groups, alpha, grouping);
}

PredictionInterval make_interval(double q_lo, double q_hi, int group,
                                 const CalibrationResult& calib) {
    if (group < 0 || static_cast<std::size_t>(group) >= calib.offsets.size())
        throw std::runtime_error("predict_interval: group " +
                                 std::to_string(group) +
                                 " was not seen in calibration");
    const double q = calib.offsets[static_cast<std::size_t>(group)];
    PredictionInterval iv;
    iv.group = group;
    iv.unbounded = std::isinf(q);
    double lo = q_lo - q;
    double hi = q_hi + q;
    if (hi < lo) lo = hi = 0.5 * (q_lo + q_hi);  // over-shrunk: keep the midpoint
    iv.lo = std::max(0.0, lo);
    iv.hi = std::max(0.0, hi);
    return iv;
}

PredictionInterval predict_interval(const quantnet::QuantileModel& model,
                                    const CalibrationResult& calib,
                                    const std::vector<double>& x) {
    const auto [q_lo, q_hi] = model.predict(x);
    return make_interval(q_lo, q_hi, featdiag::assign_group(x, calib.grouping),
                         calib);
}

namespace {

CoverageReport report_from(const std::vector<PredictionInterval>& intervals,
                           const std::vector<double>& y, int n_groups,
                           std::vector<double>* lengths_out) {
    CoverageReport report;
    report.n = static_cast<std::int64_t>(intervals.size());
    report.group_coverage.assign(static_cast<std::size_t>(n_groups), 0.0);
    report.group_n.assign(static_cast<std::size_t>(n_groups), 0);

    std::vector<double> lengths;
    std::int64_t covered = 0;
    std::vector<std::int64_t> group_covered(static_cast<std::size_t>(n_groups), 0);
    for (std::size_t i = 0; i < intervals.size(); ++i) {
        const auto& iv = intervals[i];
        const bool in = y[i] >= iv.lo && y[i] <= iv.hi;
        covered += in;
        const auto g = static_cast<std::size_t>(iv.group);
        ++report.group_n[g];
        group_covered[g] += in;
        if (iv.unbounded)
            ++report.n_unbounded;
        else
            lengths.push_back(iv.hi - iv.lo);
    }
    report.coverage = static_cast<double>(covered) / static_cast<double>(report.n);
    for (std::size_t g = 0; g < report.group_n.size(); ++g)
        report.group_coverage[g] =
            report.group_n[g] == 0
                ? 0.0
                : static_cast<double>(group_covered[g]) /
                      static_cast<double>(report.group_n[g]);
    if (!lengths.empty()) {
        double sum = 0.0;
        for (double l : lengths) sum += l;
        report.mean_length = sum / static_cast<double>(lengths.size());
        for (double level : kPercentileLevels)
            report.length_percentiles.emplace_back(level,
                                                   stats::quantile(lengths, level));
    }
    if (lengths_out) *lengths_out = std::move(lengths);
    return report;
}

}  // namespace

CoverageReport evaluate_with(const QuantilePredictor& predictor,
                             const CalibrationResult& calib,
                             const std::vector<std::vector<double>>& X,
                             const std::vector<double>& y,
                             std::vector<double>* lengths_out) {
    if (X.empty()) throw std::invalid_argument("evaluate: test set is empty");
    if (X.size() != y.size())
        throw std::invalid_argument("evaluate: features and labels differ in length");
    std::vector<PredictionInterval> intervals;
    intervals.reserve(X.size());
    for (const auto& x : X) {
        const auto [q_lo, q_hi] = predictor(x);
        intervals.push_back(make_interval(
            q_lo, q_hi, featdiag::assign_group(x, calib.grouping), calib));
    }
    return report_from(intervals, y, calib.grouping.group_count(), lengths_out);
}

CoverageReport evaluate(const quantnet::QuantileModel& model,
                        const CalibrationResult& calib,
                        const dataset::Dataset& test,
                        std::vector<double>* lengths_out) {
    if (test.samples.empty())
        throw std::invalid_argument("evaluate: test set is empty");
    std::vector<PredictionInterval> intervals;
    std::vector<double> y;
    intervals.reserve(test.samples.size());
    y.reserve(test.samples.size());
    for (const auto& s : test.samples) {
        const auto x = sample_x(s);
        const auto [q_lo, q_hi] = model.predict(x);
        intervals.push_back(make_interval(
            q_lo, q_hi, featdiag::assign_group(s, calib.grouping), calib));
        y.push_back(s.y);
    }
    return report_from(intervals, y, calib.grouping.group_count(), lengths_out);
}

double CoverageReport::p90_length() const {
    for (const auto& [level, value] : length_percentiles)
        if (std::fabs(level - 0.90) < 1e-12) return value;
    return kUnbounded;
}

SelectionResult select_model(const std::vector<CoverageReport>& candidates,
                             double target_coverage, double tolerance) {
    if (candidates.empty())
        throw std::invalid_argument("select_model: no candidates");
    if (tolerance < 0.0)
        throw std::invalid_argument("select_model: tolerance must be >= 0");

    SelectionResult best;
    bool found = false;
    double best_p90 = 0.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (std::fabs(candidates[i].coverage - target_coverage) > tolerance)
            continue;
        const double p90 = candidates[i].p90_length();
        if (!found || p90 < best_p90) {
            found = true;
            best.index = i;
            best_p90 = p90;
        }
    }
    if (found) return best;

    best.conformant = false;
    double best_gap = kUnbounded;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const double gap = std::fabs(candidates[i].coverage - target_coverage);
        if (gap < best_gap) {
            best_gap = gap;
            best.index = i;
        }
    }
    return best;
}

void save_calibration(const CalibrationResult& calib, const std::string& path) {
    nlohmann::json j;
    j["schema"] = kCalibrationSchema;
    j["alpha"] = calib.alpha;
    j["mode"] = calib.mode == Mode::Marginal ? "marginal" : "equalized";
    nlohmann::json g;
    switch (calib.grouping.kind) {
        case featdiag::GroupingSpec::Kind::None:
            g["kind"] = "none";
            break;
        case featdiag::GroupingSpec::Kind::CurvatureThreshold:
            g["kind"] = "curvature";
            g["k_thresh"] = calib.grouping.k_thresh;
            break;
        case featdiag::GroupingSpec::Kind::Dummy:
            g["kind"] = "dummy";
            g["n_w"] = calib.grouping.n_w;
            g["l_d"] = calib.grouping.l_d;
            break;
    }
    j["grouping"] = std::move(g);
    nlohmann::json offsets = nlohmann::json::array();
    for (double q : calib.offsets) {
        if (std::isinf(q))
            offsets.push_back(nullptr);  // JSON has no infinity
        else
            offsets.push_back(q);
    }
    j["offsets"] = std::move(offsets);
    j["counts"] = calib.counts;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_calibration: cannot open " + path);
    out << j.dump(2) << '\n';
    if (!out)
        throw std::runtime_error("save_calibration: write failed for " + path);
}

CalibrationResult load_calibration(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_calibration: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("load_calibration: cannot parse " + path + ": " +
                                 e.what());
    }
    const std::string schema = j.value("schema", "(missing)");
    if (schema != kCalibrationSchema)
        throw std::runtime_error("load_calibration: schema '" + schema +
                                 "', expected '" + kCalibrationSchema + "'");
    try {
        CalibrationResult calib;
        calib.alpha = j.at("alpha").get<double>();
        check_alpha(calib.alpha);
        const std::string mode = j.at("mode").get<std::string>();
        if (mode == "marginal")
            calib.mode = Mode::Marginal;
        else if (mode == "equalized")
            calib.mode = Mode::Equalized;
        else
            throw std::runtime_error("load_calibration: unknown mode '" + mode +
                                     "'");
        const auto& g = j.at("grouping");
        const std::string kind = g.at("kind").get<std::string>();
        if (kind == "none") {
            calib.grouping.kind = featdiag::GroupingSpec::Kind::None;
        } else if (kind == "curvature") {
            calib.grouping.kind = featdiag::GroupingSpec::Kind::CurvatureThreshold;
            calib.grouping.k_thresh = g.at("k_thresh").get<double>();
        } else if (kind == "dummy") {
            calib.grouping.kind = featdiag::GroupingSpec::Kind::Dummy;
            calib.grouping.n_w = g.at("n_w").get<int>();
            calib.grouping.l_d = g.at("l_d").get<double>();
        } else {
            throw std::runtime_error("load_calibration: unknown grouping '" +
                                     kind + "'");
        }
        calib.grouping.validate();
        for (const auto& q : j.at("offsets"))
            calib.offsets.push_back(q.is_null() ? kUnbounded : q.get<double>());
        calib.counts = j.at("counts").get<std::vector<std::int64_t>>();
        if (calib.offsets.empty() || calib.offsets.size() != calib.counts.size())
            throw std::runtime_error(
                "load_calibration: offsets and counts must be non-empty and "
                "equal-length");
        if (calib.offsets.size() !=
            static_cast<std::size_t>(calib.grouping.group_count()))
            throw std::runtime_error(
                "load_calibration: offset count does not match the grouping");
        for (const auto c : calib.counts)
            if (c < 1)
                throw std::runtime_error(
                    "load_calibration: group counts must be >= 1");
        return calib;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("load_calibration: malformed file " + path +
                                 ": " + e.what());
    }
}

std::string coverage_report_csv(const CoverageReport& report) {
    std::ostringstream os;
    os << "metric, group, value\n";
    os << "coverage, all, " << stats::fmt_g9(report.coverage) << '\n';
    for (std::size_t g = 0; g < report.group_coverage.size(); ++g)
        os << "coverage, " << g << ", " << stats::fmt_g9(report.group_coverage[g])
           << '\n';
    os << "n, all, " << report.n << '\n';
    for (std::size_t g = 0; g < report.group_n.size(); ++g)
        os << "n, " << g << ", " << report.group_n[g] << '\n';
    os << "n_unbounded, all, " << report.n_unbounded << '\n';
    os << "mean_length, all, " << stats::fmt_g9(report.mean_length) << '\n';
    for (const auto& [level, value] : report.length_percentiles)
        os << 'p' << static_cast<int>(std::lround(level * 100.0))
           << "_length, all, " << stats::fmt_g9(value) << '\n';
    return os.str();
}

namespace {

struct Histogram {
    double lo = 0.0;
    double width = 1.0;
    std::vector<std::int64_t> counts;
};

Histogram build_histogram(const std::vector<double>& lengths, int bins) {
    if (bins < 1)
        throw std::invalid_argument("histogram: need at least one bin");
    Histogram h;
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    if (lengths.empty()) return h;
    double lo = lengths.front(), hi = lengths.front();
    for (double l : lengths) {
        lo = std::min(lo, l);
        hi = std::max(hi, l);
    }
    h.lo = lo;
    h.width = hi > lo ? (hi - lo) / bins : 1.0;
    for (double l : lengths) {
        auto b = static_cast<std::int64_t>((l - lo) / h.width);
        b = std::clamp<std::int64_t>(b, 0, bins - 1);
        ++h.counts[static_cast<std::size_t>(b)];
    }
    return h;
}

}  // namespace

std::string interval_length_histogram_csv(const std::vector<double>& lengths,
                                          int bins) {
    const Histogram h = build_histogram(lengths, bins);
    std::ostringstream os;
    os << "bin_lo, bin_hi, count\n";
    for (std::size_t b = 0; b < h.counts.size(); ++b)
        os << stats::fmt_g9(h.lo + h.width * static_cast<double>(b)) << ", "
           << stats::fmt_g9(h.lo + h.width * static_cast<double>(b + 1)) << ", "
           << h.counts[b] << '\n';
    return os.str();
}

std::string interval_length_histogram_svg(const std::vector<double>& lengths,
                                          int bins) {
    const Histogram h = build_histogram(lengths, bins);
    std::int64_t peak = 1;
    for (auto c : h.counts) peak = std::max(peak, c);
    const double width = 640.0, height = 320.0, pad = 30.0;
    const double bar_w = (width - 2 * pad) / static_cast<double>(h.counts.size());
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << width
       << ' ' << height << "\">\n";
    os << "  <rect width=\"" << width << "\" height=\"" << height
       << "\" fill=\"white\"/>\n";
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
        const double bh = (height - 2 * pad) * static_cast<double>(h.counts[b]) /
                          static_cast<double>(peak);
        os << "  <rect x=\"" << pad + bar_w * static_cast<double>(b) << "\" y=\""
           << height - pad - bh << "\" width=\"" << bar_w * 0.9 << "\" height=\""
           << bh << "\" fill=\"#4477aa\"/>\n";
    }
    os << "  <line x1=\"" << pad << "\" y1=\"" << height - pad << "\" x2=\""
       << width - pad << "\" y2=\"" << height - pad
       << "\" stroke=\"black\"/>\n";
    os << "  <text x=\"" << pad << "\" y=\"" << height - pad / 3
       << "\" font-size=\"12\">interval length from " << stats::fmt_g9(h.lo)
       << ", bin width " << stats::fmt_g9(h.width) << "</text>\n";
    os << "</svg>\n";
    return os.str();
}

}  // namespace capguard::conformal
