#include "capguard/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include "capguard/rng.hpp"
#include "capguard/stats.hpp"
#include "json.hpp"

namespace capguard::dataset {

using roadgeom::RoadSegment;
using vehiclesim::DegradationState;
using vehiclesim::ManeuverTemplate;
using vehiclesim::ManeuverType;

const std::array<const char*, kFeatureCount> kFeatureNames = {
    "r_q",   "w_max", "k_min", "k_max", "v_q",   "a_lat_max", "d_fl",
    "d_fr",  "d_rl",  "d_rr",  "dr_fl", "dr_fr", "dr_rl",     "dr_rr",
    "t_fl",  "t_fr",  "t_rl",  "t_rr",  "k_abs_max"};

const char* const kCsvHeader =
    "run_id, r_q, w_min, w_max, k_min, k_max, v_q, a_lat_max, d_fl, d_fr, "
    "d_rl, d_rr, dr_fl, dr_fr, dr_rl, dr_rr, t_fl, t_fr, t_rl, t_rr, "
    "k_abs_max, eps_lat_max, clipped";

namespace {

// Substream domains, so segment shapes, degradation draws, and entry speeds
// never share raw counters even under the same base seed.
constexpr std::uint64_t kDegradationDomain = 0x6465677261646174ULL;  // "degradat"
constexpr std::uint64_t kSpeedDomain = 0x7370656564737472ULL;        // "speedstr"
constexpr std::uint64_t kSplitDomain = 0x73706c6974646f6dULL;        // "splitdom"

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// The maneuver grid: index j cycles type {lane change left, right, lane
// follow} with the acceleration level stepping every three templates.
ManeuverTemplate grid_maneuver(int j, int n_maneuvers) {
    ManeuverTemplate m;
    switch (j % 3) {
        case 0: m.type = ManeuverType::LaneChange; m.r_q = +1; break;
        case 1: m.type = ManeuverType::LaneChange; m.r_q = -1; break;
        default: m.type = ManeuverType::LaneFollow; m.r_q = 0; break;
    }
    int levels = (n_maneuvers + 2) / 3;
    int level = j / 3;
    m.a_lat_max = levels > 1 ? 2.5 + 2.0 * level / (levels - 1) : 2.5;
    return m;
}

std::vector<Scenario> build_grid(std::size_t n_segments, int n_maneuvers,
                                 int n_degradations, std::uint64_t seed) {
    if (n_maneuvers < 1 || n_degradations < 1)
        throw std::invalid_argument("sample_scenarios: all counts must be >= 1");
    std::vector<Scenario> out;
    out.reserve(n_segments * n_maneuvers * n_degradations);
    for (std::size_t si = 0; si < n_segments; ++si) {
        // One degradation set per segment, shared by all its maneuvers.
        std::vector<DegradationState> degs(n_degradations);
        for (int d = 1; d < n_degradations; ++d) {
            rng::Stream st(rng::mix(rng::mix(seed ^ kDegradationDomain, si), d));
            for (auto& f : degs[d].angle) f = st.uniform01();
            for (auto& f : degs[d].rate) f = st.uniform01();
            for (auto& f : degs[d].torque) f = st.uniform01();
        }
        for (int j = 0; j < n_maneuvers; ++j) {
            for (int d = 0; d < n_degradations; ++d) {
                Scenario sc;
                sc.run_id = static_cast<std::int64_t>(
                    si * n_maneuvers * n_degradations + j * n_degradations + d);
                sc.segment_index = static_cast<int>(si);
                sc.maneuver = grid_maneuver(j, n_maneuvers);
                rng::Stream sp(rng::mix(seed ^ kSpeedDomain, sc.run_id));
                sc.maneuver.v_q_kmh = sp.uniform(30.0, 50.0);
                sc.degradation = degs[d];
                out.push_back(sc);
            }
        }
    }
    return out;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_cells(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            cells.push_back(trim(line.substr(start)));
            return cells;
        }
        cells.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
}

double parse_double(const std::string& cell, std::size_t lineno, const char* col) {
    char* end = nullptr;
    double v = std::strtod(cell.c_str(), &end);
    if (cell.empty() || end != cell.c_str() + cell.size()) {
        std::ostringstream os;
        os << "dataset CSV line " << lineno << ": bad " << col << " value '" << cell << "'";
        throw std::runtime_error(os.str());
    }
    return v;
}

Sample parse_row(const std::string& line, std::size_t lineno) {
    auto cells = split_cells(line);
    if (cells.size() != 23) {
        std::ostringstream os;
        os << "dataset CSV line " << lineno << ": expected 23 columns, got " << cells.size();
        throw std::runtime_error(os.str());
    }
    Sample s;
    char* end = nullptr;
    s.run_id = std::strtoll(cells[0].c_str(), &end, 10);
    if (cells[0].empty() || end != cells[0].c_str() + cells[0].size())
        throw std::runtime_error("dataset CSV line " + std::to_string(lineno) +
                                 ": bad run_id '" + cells[0] + "'");
    s.x[0] = parse_double(cells[1], lineno, kFeatureNames[0]);
    s.w_min = parse_double(cells[2], lineno, "w_min");
    for (int k = 1; k < kFeatureCount; ++k)
        s.x[k] = parse_double(cells[2 + k], lineno, kFeatureNames[k]);
    s.y = parse_double(cells[21], lineno, "eps_lat_max");
    if (s.y < -1e-12 || s.y > vehiclesim::kEpsCut + 1e-9)
        throw std::runtime_error("dataset CSV line " + std::to_string(lineno) +
                                 ": label outside [0, 0.675]");
    if (cells[22] == "0") s.clipped = false;
    else if (cells[22] == "1") s.clipped = true;
    else
        throw std::runtime_error("dataset CSV line " + std::to_string(lineno) +
                                 ": clipped must be 0 or 1, got '" + cells[22] + "'");
    return s;
}

std::string row_string(const Sample& s) {
    std::ostringstream os;
    os << s.run_id << ',' << stats::fmt_g9(s.x[0]) << ',' << stats::fmt_g9(s.w_min);
    for (int k = 1; k < kFeatureCount; ++k) os << ',' << stats::fmt_g9(s.x[k]);
    os << ',' << stats::fmt_g9(s.y) << ',' << (s.clipped ? '1' : '0');
    return os.str();
}

bool header_matches(const std::string& line) {
    auto got = split_cells(line);
    auto want = split_cells(kCsvHeader);
    return got == want;
}

std::string sidecar_path(const std::string& csv_path) {
    return csv_path + ".provenance.json";
}

void sort_by_run_id(std::vector<Sample>& v) {
    std::sort(v.begin(), v.end(),
              [](const Sample& a, const Sample& b) { return a.run_id < b.run_id; });
}

}  // namespace

ScenarioSet sample_scenarios(int n_segments, int n_maneuvers, int n_degradations,
                             std::uint64_t seed, const roadgeom::SegmentGenConfig& cfg) {
    if (n_segments < 1)
        throw std::invalid_argument("sample_scenarios: all counts must be >= 1");
    ScenarioSet set;
    set.segments = roadgeom::generate_segments(n_segments, seed, cfg);
    set.scenarios = build_grid(set.segments.size(), n_maneuvers, n_degradations, seed);
    std::ostringstream cfgstr;
    cfgstr << "grid-v1;" << n_segments << ';' << n_maneuvers << ';' << n_degradations
           << ';' << stats::fmt_g9(cfg.length_lo) << ';' << stats::fmt_g9(cfg.length_hi)
           << ';' << stats::fmt_g9(cfg.width_lo) << ';' << stats::fmt_g9(cfg.width_hi)
           << ';' << stats::fmt_g9(cfg.knot_gap_lo) << ';' << stats::fmt_g9(cfg.knot_gap_hi)
           << ';' << stats::fmt_g9(cfg.p_straight) << ';' << stats::fmt_g9(cfg.k_straight)
           << ';' << stats::fmt_g9(cfg.k_curvy_lo) << ';' << stats::fmt_g9(cfg.k_curvy_hi)
           << ';' << stats::fmt_g9(cfg.magnitude_bias);
    set.provenance.seed = seed;
    set.provenance.config_hash = hash_hex(stats::fnv1a64(cfgstr.str()));
    return set;
}

ScenarioSet scenarios_for_segments(const std::vector<RoadSegment>& segments,
                                   int n_maneuvers, int n_degradations,
                                   std::uint64_t seed) {
    if (segments.empty())
        throw std::invalid_argument("scenarios_for_segments: need at least one segment");
    ScenarioSet set;
    set.segments = segments;
    set.scenarios = build_grid(segments.size(), n_maneuvers, n_degradations, seed);
    // Hash the segment geometry itself so provenance pins the actual roads.
    std::ostringstream cfgstr;
    cfgstr << "grid-v1;" << n_maneuvers << ';' << n_degradations << ';'
           << roadgeom::roads_to_json(segments, seed).dump();
    set.provenance.seed = seed;
    set.provenance.config_hash = hash_hex(stats::fnv1a64(cfgstr.str()));
    return set;
}

std::array<double, kFeatureCount> make_features(const RoadSegment& seg,
                                                const ManeuverTemplate& m,
                                                const DegradationState& deg) {
    auto f = roadgeom::segment_features(seg);
    std::array<double, kFeatureCount> x{};
    x[0] = m.r_q;
    x[1] = f.w_max;
    x[2] = f.k_min;
    x[3] = f.k_max;
    x[4] = m.v_q_kmh;
    x[5] = m.a_lat_max;
    for (int i = 0; i < 4; ++i) {
        x[6 + i] = deg.angle[i];
        x[10 + i] = deg.rate[i];
        x[14 + i] = deg.torque[i];
    }
    x[18] = f.k_abs_max;
    return x;
}

Dataset generate_dataset(const ScenarioSet& set, const GenerateOptions& opts) {
    const std::size_t total = set.scenarios.size();
    std::unordered_map<std::int64_t, std::size_t> by_run;
    by_run.reserve(total);
    for (std::size_t i = 0; i < total; ++i) {
        const auto& sc = set.scenarios[i];
        if (sc.segment_index < 0 ||
            static_cast<std::size_t>(sc.segment_index) >= set.segments.size())
            throw std::invalid_argument("generate_dataset: scenario references missing segment");
        if (!by_run.emplace(sc.run_id, i).second)
            throw std::invalid_argument("generate_dataset: duplicate run_id " +
                                        std::to_string(sc.run_id));
    }

    std::vector<Sample> slots(total);
    std::vector<char> have(total, 0);

    // Resume: accept checkpoint rows only when their feature columns match
    // what this scenario set would produce.
    std::ofstream ck;
    if (!opts.checkpoint_path.empty()) {
        std::size_t resumed = 0;
        if (std::filesystem::exists(opts.checkpoint_path)) {
            std::ifstream in(opts.checkpoint_path);
            if (!in) throw std::runtime_error("cannot read checkpoint " + opts.checkpoint_path);
            std::string line;
            if (!std::getline(in, line) || !header_matches(line))
                throw std::runtime_error("checkpoint " + opts.checkpoint_path +
                                         " has no dataset header");
            std::vector<std::string> rows;
            while (std::getline(in, line))
                if (!trim(line).empty()) rows.push_back(line);
            for (std::size_t r = 0; r < rows.size(); ++r) {
                Sample s;
                try {
                    s = parse_row(rows[r], r + 2);
                } catch (const std::exception& e) {
                    // A torn final row from an interrupted run is recoverable.
                    if (r + 1 == rows.size()) {
                        std::fprintf(stderr, "warning: dropping torn checkpoint row: %s\n",
                                     e.what());
                        break;
                    }
                    throw;
                }
                auto it = by_run.find(s.run_id);
                if (it == by_run.end())
                    throw std::runtime_error("checkpoint contains run " +
                                             std::to_string(s.run_id) +
                                             " not in the scenario set");
                const auto& sc = set.scenarios[it->second];
                Sample expect;
                expect.x = make_features(set.segments[sc.segment_index], sc.maneuver,
                                         sc.degradation);
                expect.w_min = roadgeom::segment_features(set.segments[sc.segment_index]).w_min;
                bool ok = stats::fmt_g9(s.w_min) == stats::fmt_g9(expect.w_min);
                for (int k = 0; ok && k < kFeatureCount; ++k)
                    ok = stats::fmt_g9(s.x[k]) == stats::fmt_g9(expect.x[k]);
                if (!ok)
                    throw std::runtime_error("checkpoint row for run " +
                                             std::to_string(s.run_id) +
                                             " does not match the scenario set");
                if (!have[it->second]) ++resumed;
                slots[it->second] = s;
                have[it->second] = 1;
            }
        }
        bool fresh = !std::filesystem::exists(opts.checkpoint_path);
        ck.open(opts.checkpoint_path, std::ios::app);
        if (!ck) throw std::runtime_error("cannot open checkpoint " + opts.checkpoint_path);
        if (fresh) ck << kCsvHeader << '\n' << std::flush;
        if (resumed > 0)
            std::fprintf(stderr, "resuming: %zu of %zu runs already in checkpoint\n",
                         resumed, total);
    }

    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < total; ++i)
        if (!have[i]) todo.push_back(i);

    std::vector<FaultRecord> faults;
    std::mutex mu;
    std::atomic<std::size_t> cursor{0};
    std::size_t done = total - todo.size();

    auto worker = [&]() {
        for (;;) {
            std::size_t t = cursor.fetch_add(1);
            if (t >= todo.size()) return;
            std::size_t i = todo[t];
            const Scenario& sc = set.scenarios[i];
            const RoadSegment& seg = set.segments[sc.segment_index];
            try {
                auto ref = vehiclesim::plan_reference(seg, sc.maneuver);
                auto out = vehiclesim::simulate_tracking(seg, ref, sc.degradation, opts.params);
                Sample s;
                s.run_id = sc.run_id;
                s.x = make_features(seg, sc.maneuver, sc.degradation);
                s.w_min = roadgeom::segment_features(seg).w_min;
                s.y = out.eps_lat_max;
                s.clipped = out.clipped;
                std::lock_guard<std::mutex> lock(mu);
                slots[i] = s;
                have[i] = 1;
                if (ck.is_open()) ck << row_string(s) << '\n' << std::flush;
                ++done;
                if (opts.progress) opts.progress(done, total);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(mu);
                faults.push_back({sc.run_id, e.what()});
                std::fprintf(stderr, "warning: excluding faulted run %lld: %s\n",
                             static_cast<long long>(sc.run_id), e.what());
                ++done;
                if (opts.progress) opts.progress(done, total);
            }
        }
    };

    int n_threads = std::max(1, opts.workers);
    if (n_threads == 1 || todo.size() <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    if (faults.size() * 100 > total) {
        std::ostringstream os;
        os << "generate_dataset: " << faults.size() << " of " << total
           << " runs faulted (first: run " << faults.front().run_id << ": "
           << faults.front().message << ")";
        throw std::runtime_error(os.str());
    }

    Dataset ds;
    ds.samples.reserve(total - faults.size());
    for (std::size_t i = 0; i < total; ++i)
        if (have[i]) ds.samples.push_back(slots[i]);
    sort_by_run_id(ds.samples);
    std::sort(faults.begin(), faults.end(),
              [](const FaultRecord& a, const FaultRecord& b) { return a.run_id < b.run_id; });
    ds.faults = std::move(faults);
    ds.provenance = set.provenance;
    ds.provenance.simulator_version = vehiclesim::kSimVersion;
    return ds;
}

void write_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write dataset " + path);
    out << kCsvHeader << '\n';
    std::vector<const Sample*> rows;
    rows.reserve(ds.samples.size());
    for (const auto& s : ds.samples) rows.push_back(&s);
    std::sort(rows.begin(), rows.end(),
              [](const Sample* a, const Sample* b) { return a->run_id < b->run_id; });
    for (const Sample* s : rows) out << row_string(*s) << '\n';
    if (!out) throw std::runtime_error("short write on dataset " + path);

    nlohmann::json j;
    j["schema"] = "capguard-dataset-v1";
    j["seed"] = ds.provenance.seed;
    j["config_hash"] = ds.provenance.config_hash;
    j["simulator_version"] = ds.provenance.simulator_version;
    j["n_samples"] = ds.samples.size();
    j["faults"] = nlohmann::json::array();
    for (const auto& f : ds.faults)
        j["faults"].push_back({{"run_id", f.run_id}, {"message", f.message}});
    std::ofstream side(sidecar_path(path), std::ios::trunc);
    if (!side) throw std::runtime_error("cannot write sidecar for " + path);
    side << j.dump(2) << '\n';
}

Dataset read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read dataset " + path);
    std::string line;
    if (!std::getline(in, line) || !header_matches(line))
        throw std::runtime_error("dataset " + path + " has an unexpected header");
    Dataset ds;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        ds.samples.push_back(parse_row(line, lineno));
    }
    sort_by_run_id(ds.samples);
    for (std::size_t i = 1; i < ds.samples.size(); ++i)
        if (ds.samples[i].run_id == ds.samples[i - 1].run_id)
            throw std::runtime_error("dataset " + path + ": duplicate run_id " +
                                     std::to_string(ds.samples[i].run_id));

    std::string side = sidecar_path(path);
    if (std::filesystem::exists(side)) {
        std::ifstream sin(side);
        nlohmann::json j;
        try {
            sin >> j;
        } catch (const std::exception& e) {
            throw std::runtime_error("bad provenance sidecar " + side + ": " + e.what());
        }
        if (j.contains("n_samples") && j["n_samples"].get<std::size_t>() != ds.samples.size())
            throw std::runtime_error("dataset " + path + " has " +
                                     std::to_string(ds.samples.size()) +
                                     " samples but its sidecar records " +
                                     std::to_string(j["n_samples"].get<std::size_t>()));
        ds.provenance.seed = j.value("seed", std::uint64_t{0});
        ds.provenance.config_hash = j.value("config_hash", std::string{});
        ds.provenance.simulator_version = j.value("simulator_version", std::string{});
        for (const auto& f : j.value("faults", nlohmann::json::array()))
            ds.faults.push_back({f.at("run_id").get<std::int64_t>(),
                                 f.at("message").get<std::string>()});
    }
    return ds;
}

SplitResult split_dataset(const Dataset& ds, std::size_t n_cal, std::size_t n_test,
                          std::uint64_t seed) {
    const std::size_t n = ds.samples.size();
    if (n_cal + n_test >= n && !(n_cal == 0 && n_test == 0))
        throw std::invalid_argument(
            "split_dataset: n_cal + n_test must be smaller than the dataset");
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    rng::Stream st(rng::mix(seed, kSplitDomain));
    for (std::size_t i = n; i > 1; --i)
        std::swap(idx[i - 1], idx[st.below(i)]);

    SplitResult r;
    r.train.provenance = r.cal.provenance = r.test.provenance = ds.provenance;
    for (std::size_t i = 0; i < n; ++i) {
        const Sample& s = ds.samples[idx[i]];
        if (i < n_cal) r.cal.samples.push_back(s);
        else if (i < n_cal + n_test) r.test.samples.push_back(s);
        else r.train.samples.push_back(s);
    }
    sort_by_run_id(r.train.samples);
    sort_by_run_id(r.cal.samples);
    sort_by_run_id(r.test.samples);
    return r;
}

}  // namespace capguard::dataset
