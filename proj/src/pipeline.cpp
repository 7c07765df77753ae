#include "capguard/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "capguard/conformal.hpp"
#include "capguard/dataset.hpp"
#include "capguard/gate.hpp"
#include "capguard/stats.hpp"
#include "capguard/vehiclesim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace capguard::pipeline {

namespace {

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text(const std::string& path, const std::string& content) {
    const auto parent = fs::path(path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
    if (!out) throw std::runtime_error("failed writing " + path);
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// Strict object parsing: every present key must be known.
void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
    if (!j.is_object())
        throw std::invalid_argument("config: " + where + " must be an object");
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* key : allowed)
            if (item.key() == key) {
                known = true;
                break;
            }
        if (!known)
            throw std::invalid_argument("config: unknown key \"" + item.key() +
                                        "\" in " + where);
    }
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

json grouping_to_json(const featdiag::GroupingSpec& g) {
    json j;
    switch (g.kind) {
        case featdiag::GroupingSpec::Kind::None: j["kind"] = "none"; break;
        case featdiag::GroupingSpec::Kind::CurvatureThreshold:
            j["kind"] = "curvature";
            j["k_thresh"] = g.k_thresh;
            break;
        case featdiag::GroupingSpec::Kind::Dummy:
            j["kind"] = "dummy";
            j["n_w"] = g.n_w;
            j["l_d"] = g.l_d;
            break;
    }
    return j;
}

featdiag::GroupingSpec grouping_from_json(const json& j) {
    check_keys(j, {"kind", "k_thresh", "n_w", "l_d"}, "grouping");
    featdiag::GroupingSpec g;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "none") {
        g.kind = featdiag::GroupingSpec::Kind::None;
    } else if (kind == "curvature") {
        g.kind = featdiag::GroupingSpec::Kind::CurvatureThreshold;
        get_if(j, "k_thresh", g.k_thresh);
    } else if (kind == "dummy") {
        g.kind = featdiag::GroupingSpec::Kind::Dummy;
        get_if(j, "n_w", g.n_w);
        get_if(j, "l_d", g.l_d);
    } else {
        throw std::invalid_argument("config: grouping kind \"" + kind +
                                    "\" is not none/curvature/dummy");
    }
    g.validate();
    return g;
}

struct ManifestIo {
    std::vector<std::string> inputs, outputs;
};

void write_manifest(const PipelineConfig& cfg, const std::string& command,
                    const ManifestIo& io) {
    json m;
    m["schema"] = kManifestSchema;
    m["command"] = command;
    m["config_hash"] = config_hash(cfg);
    m["seed"] = cfg.seed;
    json inputs = json::object(), outputs = json::object();
    for (const auto& path : io.inputs) inputs[path] = file_hash_hex(path);
    for (const auto& path : io.outputs) outputs[path] = file_hash_hex(path);
    m["inputs"] = inputs;
    m["outputs"] = outputs;
    m["versions"] = {{"simulator", vehiclesim::kSimVersion},
                     {"model_schema", quantnet::kModelSchema},
                     {"calibration_schema", conformal::kCalibrationSchema}};
    write_text(Paths(cfg.out_dir).manifest(command), m.dump(2) + "\n");
}

dataset::Dataset load_dataset(const Paths& p) {
    require_artifact(p.dataset(), "gen-data");
    return dataset::read_csv(p.dataset());
}

dataset::SplitResult load_splits(const PipelineConfig& cfg, const Paths& p) {
    return dataset::split_dataset(load_dataset(p), cfg.n_cal, cfg.n_test,
                                  cfg.seed);
}

std::size_t candidate_count(const Paths& p) {
    require_artifact(p.models_index(), "train");
    const json idx = json::parse(read_text(p.models_index()));
    if (idx.value("schema", "") != kModelsIndexSchema)
        throw std::runtime_error(p.models_index() + ": expected schema " +
                                 std::string(kModelsIndexSchema));
    return idx.at("candidates").size();
}

// The model evaluate/calibrate/gate operate on: the selected candidate when
// a selection artifact exists, candidate 0 otherwise.
std::size_t selected_index(const Paths& p) {
    if (!fs::exists(p.selection())) return 0;
    const json sel = json::parse(read_text(p.selection()));
    return sel.at("selected").get<std::size_t>();
}

vehiclesim::DegradationState degradation_from_file(const std::string& path) {
    const json j = json::parse(read_text(path));
    check_keys(j, {"angle", "rate", "torque"}, "degradation");
    vehiclesim::DegradationState deg;
    const auto fill = [&](const char* key, std::array<double, 4>& out) {
        if (!j.contains(key)) return;
        const auto arr = j.at(key).get<std::vector<double>>();
        if (arr.size() != 4)
            throw std::invalid_argument("degradation: " + std::string(key) +
                                        " needs 4 wheel factors");
        std::copy(arr.begin(), arr.end(), out.begin());
    };
    fill("angle", deg.angle);
    fill("rate", deg.rate);
    fill("torque", deg.torque);
    deg.validate();
    return deg;
}

// Split one dataset into deterministic halves (even/odd sample index) so
// hyperparameter selection can calibrate and score on disjoint data.
std::pair<dataset::Dataset, dataset::Dataset> halves(const dataset::Dataset& ds) {
    dataset::Dataset a, b;
    a.provenance = b.provenance = ds.provenance;
    for (std::size_t i = 0; i < ds.samples.size(); ++i)
        (i % 2 == 0 ? a : b).samples.push_back(ds.samples[i]);
    return {a, b};
}

}  // namespace

void PipelineConfig::validate() const {
    if (out_dir.empty())
        throw std::invalid_argument("config: out_dir must not be empty");
    if (n_segments < 1 || n_maneuvers < 1 || n_degradations < 1)
        throw std::invalid_argument(
            "config: scenario counts must be at least 1 each");
    if (n_cal < 1 || n_test < 1)
        throw std::invalid_argument("config: n_cal and n_test must be positive");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("config: alpha must lie in (0, 1)");
    if (!(selection_tolerance >= 0.0))
        throw std::invalid_argument("config: selection_tolerance must be >= 0");
    if (workers < 0)
        throw std::invalid_argument("config: workers must be >= 0");
    if (grid.empty())
        throw std::invalid_argument("config: hyperparameter grid is empty");
    generator.validate();
    quantnet::TrainConfig probe = training;
    for (const auto& entry : grid) {
        probe.hidden = entry.hidden;
        probe.learning_rate = entry.learning_rate;
        probe.validate();
    }
    grouping.validate();
}

nlohmann::json to_json(const PipelineConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["out_dir"] = cfg.out_dir;
    j["n_segments"] = cfg.n_segments;
    j["n_maneuvers"] = cfg.n_maneuvers;
    j["n_degradations"] = cfg.n_degradations;
    j["n_cal"] = cfg.n_cal;
    j["n_test"] = cfg.n_test;
    j["alpha"] = cfg.alpha;
    j["selection_tolerance"] = cfg.selection_tolerance;
    j["workers"] = cfg.workers;
    j["select_on_test"] = cfg.select_on_test;
    j["generator"] = {{"length_lo", cfg.generator.length_lo},
                      {"length_hi", cfg.generator.length_hi},
                      {"width_lo", cfg.generator.width_lo},
                      {"width_hi", cfg.generator.width_hi},
                      {"knot_gap_lo", cfg.generator.knot_gap_lo},
                      {"knot_gap_hi", cfg.generator.knot_gap_hi},
                      {"p_straight", cfg.generator.p_straight},
                      {"k_straight", cfg.generator.k_straight},
                      {"k_curvy_lo", cfg.generator.k_curvy_lo},
                      {"k_curvy_hi", cfg.generator.k_curvy_hi},
                      {"magnitude_bias", cfg.generator.magnitude_bias}};
    j["training"] = {{"batch_size", cfg.training.batch_size},
                     {"learning_rate", cfg.training.learning_rate},
                     {"max_epochs", cfg.training.max_epochs},
                     {"patience", cfg.training.patience},
                     {"val_fraction", cfg.training.val_fraction},
                     {"seed", cfg.training.seed},
                     {"tau_lo", cfg.training.tau_lo},
                     {"tau_hi", cfg.training.tau_hi},
                     {"hidden", cfg.training.hidden}};
    json grid = json::array();
    for (const auto& entry : cfg.grid)
        grid.push_back({{"hidden", entry.hidden},
                        {"learning_rate", entry.learning_rate}});
    j["grid"] = grid;
    j["grouping"] = grouping_to_json(cfg.grouping);
    return j;
}

PipelineConfig config_from_json(const nlohmann::json& j) {
    check_keys(j,
               {"seed", "out_dir", "n_segments", "n_maneuvers", "n_degradations",
                "n_cal", "n_test", "alpha", "selection_tolerance", "workers",
                "select_on_test", "generator", "training", "grid", "grouping"},
               "top level");
    PipelineConfig cfg;
    get_if(j, "seed", cfg.seed);
    get_if(j, "out_dir", cfg.out_dir);
    get_if(j, "n_segments", cfg.n_segments);
    get_if(j, "n_maneuvers", cfg.n_maneuvers);
    get_if(j, "n_degradations", cfg.n_degradations);
    get_if(j, "n_cal", cfg.n_cal);
    get_if(j, "n_test", cfg.n_test);
    get_if(j, "alpha", cfg.alpha);
    get_if(j, "selection_tolerance", cfg.selection_tolerance);
    get_if(j, "workers", cfg.workers);
    get_if(j, "select_on_test", cfg.select_on_test);
    if (j.contains("generator")) {
        const json& g = j.at("generator");
        check_keys(g,
                   {"length_lo", "length_hi", "width_lo", "width_hi",
                    "knot_gap_lo", "knot_gap_hi", "p_straight", "k_straight",
                    "k_curvy_lo", "k_curvy_hi", "magnitude_bias"},
                   "generator");
        get_if(g, "length_lo", cfg.generator.length_lo);
        get_if(g, "length_hi", cfg.generator.length_hi);
        get_if(g, "width_lo", cfg.generator.width_lo);
        get_if(g, "width_hi", cfg.generator.width_hi);
        get_if(g, "knot_gap_lo", cfg.generator.knot_gap_lo);
        get_if(g, "knot_gap_hi", cfg.generator.knot_gap_hi);
        get_if(g, "p_straight", cfg.generator.p_straight);
        get_if(g, "k_straight", cfg.generator.k_straight);
        get_if(g, "k_curvy_lo", cfg.generator.k_curvy_lo);
        get_if(g, "k_curvy_hi", cfg.generator.k_curvy_hi);
        get_if(g, "magnitude_bias", cfg.generator.magnitude_bias);
    }
    if (j.contains("training")) {
        const json& t = j.at("training");
        check_keys(t,
                   {"batch_size", "learning_rate", "max_epochs", "patience",
                    "val_fraction", "seed", "tau_lo", "tau_hi", "hidden"},
                   "training");
        get_if(t, "batch_size", cfg.training.batch_size);
        get_if(t, "learning_rate", cfg.training.learning_rate);
        get_if(t, "max_epochs", cfg.training.max_epochs);
        get_if(t, "patience", cfg.training.patience);
        get_if(t, "val_fraction", cfg.training.val_fraction);
        get_if(t, "seed", cfg.training.seed);
        get_if(t, "tau_lo", cfg.training.tau_lo);
        get_if(t, "tau_hi", cfg.training.tau_hi);
        get_if(t, "hidden", cfg.training.hidden);
    }
    if (j.contains("grid")) {
        cfg.grid.clear();
        for (const json& e : j.at("grid")) {
            check_keys(e, {"hidden", "learning_rate"}, "grid entry");
            GridEntry entry;
            entry.hidden = cfg.training.hidden;
            entry.learning_rate = cfg.training.learning_rate;
            get_if(e, "hidden", entry.hidden);
            get_if(e, "learning_rate", entry.learning_rate);
            cfg.grid.push_back(entry);
        }
    } else {
        // The default grid inherits the training block's hyperparameters.
        cfg.grid = {GridEntry{cfg.training.hidden, cfg.training.learning_rate}};
    }
    if (j.contains("grouping")) cfg.grouping = grouping_from_json(j.at("grouping"));
    cfg.validate();
    return cfg;
}

PipelineConfig load_config(const std::string& path) {
    json j;
    try {
        j = json::parse(read_text(path));
    } catch (const json::exception& e) {
        throw std::runtime_error("config " + path + ": " + e.what());
    }
    return config_from_json(j);
}

std::string config_hash(const PipelineConfig& cfg) {
    return hex64(stats::fnv1a64(to_json(cfg).dump()));
}

featdiag::GroupingSpec parse_grouping(const std::string& flag) {
    featdiag::GroupingSpec g;
    try {
        if (flag == "none") {
            g.kind = featdiag::GroupingSpec::Kind::None;
        } else if (flag.rfind("curvature:", 0) == 0) {
            g.kind = featdiag::GroupingSpec::Kind::CurvatureThreshold;
            g.k_thresh = std::stod(flag.substr(10));
        } else if (flag.rfind("dummy:", 0) == 0) {
            const std::string rest = flag.substr(6);
            const auto comma = rest.find(',');
            if (comma == std::string::npos) throw std::invalid_argument(flag);
            g.kind = featdiag::GroupingSpec::Kind::Dummy;
            g.n_w = std::stoi(rest.substr(0, comma));
            g.l_d = std::stod(rest.substr(comma + 1));
        } else {
            throw std::invalid_argument(flag);
        }
    } catch (const std::exception&) {
        throw std::invalid_argument(
            "--grouping expects none, curvature:K, or dummy:N,L (got \"" + flag +
            "\")");
    }
    g.validate();
    return g;
}

std::string file_hash_hex(const std::string& path) {
    return hex64(stats::fnv1a64(read_text(path)));
}

void require_artifact(const std::string& path, const std::string& producer) {
    if (!fs::exists(path))
        throw std::runtime_error(path + " not found; run `capguard " + producer +
                                 "` first");
}

void cmd_gen_roads(const PipelineConfig& cfg) {
    cfg.validate();
    const Paths p(cfg.out_dir);
    fs::create_directories(p.out);
    const auto segs =
        roadgeom::generate_segments(cfg.n_segments, cfg.seed, cfg.generator);
    roadgeom::save_roads(segs, cfg.seed, p.roads());
    write_manifest(cfg, "gen-roads", {{}, {p.roads()}});
}

void cmd_gen_data(const PipelineConfig& cfg) {
    cfg.validate();
    const Paths p(cfg.out_dir);
    require_artifact(p.roads(), "gen-roads");
    const auto segs = roadgeom::load_roads(p.roads());
    const auto set = dataset::scenarios_for_segments(segs, cfg.n_maneuvers,
                                                     cfg.n_degradations, cfg.seed);
    dataset::GenerateOptions opts;
    opts.workers = cfg.workers > 0
                       ? cfg.workers
                       : std::max(1u, std::thread::hardware_concurrency());
    const auto ds = dataset::generate_dataset(set, opts);
    dataset::write_csv(ds, p.dataset());
    write_manifest(cfg, "gen-data",
                   {{p.roads()}, {p.dataset(), p.dataset_sidecar()}});
}

void cmd_diagnose(const PipelineConfig& cfg) {
    cfg.validate();
    const Paths p(cfg.out_dir);
    const auto ds = load_dataset(p);
    std::vector<std::pair<int, double>> dummy_configs = {{2, 0.1}};
    if (cfg.grouping.kind == featdiag::GroupingSpec::Kind::Dummy)
        dummy_configs = {{cfg.grouping.n_w, cfg.grouping.l_d}};
    const auto report = featdiag::diagnose(ds, 16, dummy_configs);
    write_text(p.diagnostics(), featdiag::report_csv(report));
    write_manifest(cfg, "diagnose", {{p.dataset()}, {p.diagnostics()}});
}

void cmd_train(const PipelineConfig& cfg) {
    cfg.validate();
    const Paths p(cfg.out_dir);
    const auto parts = load_splits(cfg, p);
    fs::create_directories(p.models_dir());
    json index;
    index["schema"] = kModelsIndexSchema;
    json candidates = json::array();
    ManifestIo io{{p.dataset()}, {}};
    for (std::size_t k = 0; k < cfg.grid.size(); ++k) {
        quantnet::TrainConfig tc = cfg.training;
        tc.hidden = cfg.grid[k].hidden;
        tc.learning_rate = cfg.grid[k].learning_rate;
        std::vector<quantnet::EpochLog> log;
        const auto model = quantnet::train(parts.train, tc, &log);
        quantnet::save(model, p.model(k));
        write_text(p.training_log(k), quantnet::training_log_csv(log));
        candidates.push_back({{"model", p.model(k)},
                              {"log", p.training_log(k)},
                              {"hidden", tc.hidden},
                              {"learning_rate", tc.learning_rate}});
        io.outputs.push_back(p.model(k));
        io.outputs.push_back(p.training_log(k));
    }
    index["candidates"] = candidates;
    write_text(p.models_index(), index.dump(2) + "\n");
    io.outputs.push_back(p.models_index());
    write_manifest(cfg, "train", io);
}

void cmd_select(const PipelineConfig& cfg) {
    cfg.validate();
    const Paths p(cfg.out_dir);
    const std::size_t n_models = candidate_count(p);
    const auto parts = load_splits(cfg, p);

    std::vector<conformal::CoverageReport> reports;
    json rows = json::array();
    for (std::size_t k = 0; k < n_models; ++k) {
        require_artifact(p.model(k), "train");
        const auto model = quantnet::load(p.model(k));
        conformal::CoverageReport report;
        if (cfg.select_on_test) {
            const auto calib =
                conformal::calibrate(model, parts.cal, cfg.alpha, cfg.grouping);
            report = conformal::evaluate(model, calib, parts.test);
        } else {
            const auto [fit_half, score_half] = halves(parts.cal);
            const auto calib =
                conformal::calibrate(model, fit_half, cfg.alpha, cfg.grouping);
            report = conformal::evaluate(model, calib, score_half);
        }
        reports.push_back(report);
        rows.push_back({{"index", k},
                        {"model", p.model(k)},
                        {"coverage", report.coverage},
                        {"p90_length", report.p90_length()},
                        {"mean_length", report.mean_length}});
    }
    const auto pick =
        conformal::select_model(reports, 1.0 - cfg.alpha, cfg.selection_tolerance);

    json sel;
    sel["schema"] = kSelectionSchema;
    sel["selected"] = pick.index;
    sel["conformant"] = pick.conformant;
    sel["mode"] = cfg.select_on_test ? "test" : "holdout";
    sel["target_coverage"] = 1.0 - cfg.alpha;
    sel["tolerance"] = cfg.selection_tolerance;
    sel["candidates"] = rows;
    write_text(p.selection(), sel.dump(2) + "\n");
    if (!pick.conformant)
        std::cerr << "warning: no candidate met the coverage target; selected "
                     "the closest one\n";
    write_manifest(cfg, "select", {{p.dataset(), p.models_index()}, {p.selection()}});
}

void cmd_calibrate(const PipelineConfig& cfg) {
    cfg.validate();
    const Paths p(cfg.out_dir);
    const std::size_t k = selected_index(p);
    require_artifact(p.model(k), "train");
    const auto parts = load_splits(cfg, p);
    const auto model = quantnet::load(p.model(k));
    const auto calib =
        conformal::calibrate(model, parts.cal, cfg.alpha, cfg.grouping);
    for (const auto& warning : calib.warnings)
        std::cerr << "warning: " << warning << "\n";
    conformal::save_calibration(calib, p.calibration());
    write_manifest(cfg, "calibrate",
                   {{p.dataset(), p.model(k)}, {p.calibration()}});
}

void cmd_evaluate(const PipelineConfig& cfg) {
    cfg.validate();
    const Paths p(cfg.out_dir);
    require_artifact(p.calibration(), "calibrate");
    const std::size_t k = selected_index(p);
    require_artifact(p.model(k), "train");
    const auto parts = load_splits(cfg, p);
    const auto model = quantnet::load(p.model(k));
    const auto calib = conformal::load_calibration(p.calibration());

    std::vector<double> lengths;
    const auto report = conformal::evaluate(model, calib, parts.test, &lengths);
    write_text(p.evaluation(), conformal::coverage_report_csv(report));
    write_text(p.histogram_csv(),
               conformal::interval_length_histogram_csv(lengths, 20));
    write_text(p.histogram_svg(),
               conformal::interval_length_histogram_svg(lengths, 20));
    write_manifest(cfg, "evaluate",
                   {{p.dataset(), p.model(k), p.calibration()},
                    {p.evaluation(), p.histogram_csv(), p.histogram_svg()}});
}

void cmd_gate(const PipelineConfig& cfg, const GateArgs& args) {
    cfg.validate();
    const Paths p(cfg.out_dir);
    require_artifact(p.roads(), "gen-roads");
    require_artifact(p.calibration(), "calibrate");
    const std::size_t k = selected_index(p);
    require_artifact(p.model(k), "train");

    const auto segs = roadgeom::load_roads(p.roads());
    if (args.segment_index < 0 ||
        static_cast<std::size_t>(args.segment_index) >= segs.size())
        throw std::invalid_argument(
            "gate: --segment-index " + std::to_string(args.segment_index) +
            " outside 0.." + std::to_string(segs.size() - 1));
    const auto& seg = segs[static_cast<std::size_t>(args.segment_index)];

    const auto model = quantnet::load(p.model(k));
    const auto calib = conformal::load_calibration(p.calibration());
    const auto deg = args.degradation_json.empty()
                         ? vehiclesim::DegradationState::nominal()
                         : degradation_from_file(args.degradation_json);
    const auto accels =
        args.accels.empty() ? gate::default_accels() : args.accels;

    const auto decision = gate::evaluate_candidates(
        seg, args.speed_kmh, accels, deg, model, calib, args.direction);
    write_text(p.gate_csv(), gate::decision_table_csv(decision));
    ManifestIo io{{p.roads(), p.model(k), p.calibration()}, {p.gate_csv()}};
    if (!args.degradation_json.empty()) io.inputs.push_back(args.degradation_json);
    try {
        write_text(p.gate_svg(), gate::decision_svg(seg, decision));
        io.outputs.push_back(p.gate_svg());
    } catch (const std::exception& e) {
        std::cerr << "note: skipping envelope figure: " << e.what() << "\n";
    }
    write_manifest(cfg, "gate", io);
}

void cmd_report(const PipelineConfig& cfg) {
    cfg.validate();
    const Paths p(cfg.out_dir);
    require_artifact(p.evaluation(), "evaluate");

    std::ostringstream md;
    ManifestIo io{{p.evaluation()}, {}};
    md << "# Capability gate run report\n\n"
       << "- config hash: `" << config_hash(cfg) << "`\n"
       << "- seed: " << cfg.seed << "\n"
       << "- coverage target: " << stats::fmt_g9(1.0 - cfg.alpha)
       << " (alpha = " << stats::fmt_g9(cfg.alpha) << ")\n"
       << "- grouping: " << cfg.grouping.describe() << "\n";

    if (fs::exists(p.dataset())) {
        const auto ds = dataset::read_csv(p.dataset());
        std::size_t clipped = 0;
        for (const auto& s : ds.samples) clipped += s.clipped;
        md << "\n## Dataset\n\n"
           << "- rows: " << ds.samples.size() << "\n"
           << "- clipped labels: " << clipped << " ("
           << stats::fmt_g9(100.0 * static_cast<double>(clipped) /
                            static_cast<double>(ds.samples.size()))
           << "%)\n"
           << "- excluded faulted runs: " << ds.faults.size() << "\n"
           << "- simulator: " << ds.provenance.simulator_version << "\n";
        io.inputs.push_back(p.dataset());
    }
    if (fs::exists(p.diagnostics())) {
        md << "\n## Feature diagnostics\n\n```\n" << read_text(p.diagnostics())
           << "```\n";
        io.inputs.push_back(p.diagnostics());
    }
    if (fs::exists(p.selection())) {
        const json sel = json::parse(read_text(p.selection()));
        md << "\n## Model selection\n\n"
           << "- selected candidate: " << sel.at("selected")
           << " (conformant: " << (sel.at("conformant").get<bool>() ? "yes" : "no")
           << ", mode: " << sel.at("mode").get<std::string>() << ")\n";
        io.inputs.push_back(p.selection());
    }
    if (fs::exists(p.calibration())) {
        const json cal = json::parse(read_text(p.calibration()));
        md << "\n## Calibration\n\n"
           << "- mode: " << cal.at("mode").get<std::string>() << "\n"
           << "- per-group offsets:";
        for (const auto& q : cal.at("offsets"))
            md << " " << (q.is_null() ? "unbounded" : q.dump());
        md << "\n";
        io.inputs.push_back(p.calibration());
    }
    md << "\n## Coverage\n\n```\n" << read_text(p.evaluation()) << "```\n";
    if (fs::exists(p.gate_csv())) {
        md << "\n## Gate decision\n\n```\n" << read_text(p.gate_csv()) << "```\n";
        io.inputs.push_back(p.gate_csv());
    }

    write_text(p.report(), md.str());
    io.outputs.push_back(p.report());
    write_manifest(cfg, "report", io);
}

}  // namespace capguard::pipeline
