#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "capguard/featdiag.hpp"
#include "capguard/quantnet.hpp"
#include "capguard/roadgeom.hpp"

namespace capguard::pipeline {

// Orchestration layer behind the command-line tool: one function per
// subcommand, a JSON pipeline configuration, and run manifests that hash
// every input and output so identical configs and seeds reproduce identical
// artifacts byte for byte.

inline constexpr const char* kManifestSchema = "capguard-manifest-v1";
inline constexpr const char* kModelsIndexSchema = "capguard-models-v1";
inline constexpr const char* kSelectionSchema = "capguard-selection-v1";

// One hyperparameter-grid candidate (everything else comes from `training`).
struct GridEntry {
    std::vector<int> hidden = {380, 380};
    double learning_rate = 5e-4;
};

struct PipelineConfig {
    std::uint64_t seed = 1;
    std::string out_dir = "out";

    // Scenario grid (defaults give 222*15*10 = 33300 runs).
    int n_segments = 222;
    int n_maneuvers = 15;
    int n_degradations = 10;

    // Split sizes; the remainder trains the model.
    std::size_t n_cal = 4000;
    std::size_t n_test = 4000;

    double alpha = 0.1;
    double selection_tolerance = 0.01;
    int workers = 0;  // gen-data parallelism; 0 = all available cores
    bool select_on_test = false;

    roadgeom::SegmentGenConfig generator;
    quantnet::TrainConfig training;
    std::vector<GridEntry> grid = {GridEntry{}};
    featdiag::GroupingSpec grouping = default_grouping();

    static featdiag::GroupingSpec default_grouping() {
        featdiag::GroupingSpec g;
        g.kind = featdiag::GroupingSpec::Kind::CurvatureThreshold;
        g.k_thresh = 0.003;
        return g;
    }

    void validate() const;
};

// Strict serialization: unknown keys raise, so config typos fail loudly.
nlohmann::json to_json(const PipelineConfig& cfg);
PipelineConfig config_from_json(const nlohmann::json& j);
PipelineConfig load_config(const std::string& path);

// FNV-1a over the canonical serialization, as a 16-digit hex string.
std::string config_hash(const PipelineConfig& cfg);

// "none" | "curvature:K" | "dummy:N,L" (the inverse of GroupingSpec::describe).
featdiag::GroupingSpec parse_grouping(const std::string& flag);

// FNV-1a over a file's bytes, as a 16-digit hex string.
std::string file_hash_hex(const std::string& path);

// Artifact layout under the output directory.
struct Paths {
    explicit Paths(std::string out_dir) : out(std::move(out_dir)) {}
    std::string out;

    std::string roads() const { return out + "/roads.json"; }
    std::string dataset() const { return out + "/dataset.csv"; }
    std::string dataset_sidecar() const { return dataset() + ".provenance.json"; }
    std::string diagnostics() const { return out + "/diagnostics.csv"; }
    std::string models_dir() const { return out + "/models"; }
    std::string models_index() const { return models_dir() + "/index.json"; }
    std::string model(std::size_t k) const {
        return models_dir() + "/model_" + std::to_string(k) + ".json";
    }
    std::string training_log(std::size_t k) const {
        return models_dir() + "/training_log_" + std::to_string(k) + ".csv";
    }
    std::string selection() const { return out + "/selection.json"; }
    std::string calibration() const { return out + "/calibration.json"; }
    std::string evaluation() const { return out + "/evaluation.csv"; }
    std::string histogram_csv() const { return out + "/interval_lengths.csv"; }
    std::string histogram_svg() const { return out + "/interval_lengths.svg"; }
    std::string gate_csv() const { return out + "/gate_decision.csv"; }
    std::string gate_svg() const { return out + "/gate_envelope.svg"; }
    std::string report() const { return out + "/report.md"; }
    std::string manifest(const std::string& command) const {
        return out + "/manifests/" + command + ".json";
    }
};

// Throws with a message naming the command that produces `path`.
void require_artifact(const std::string& path, const std::string& producer);

// Subcommand bodies. Each writes its artifacts plus a manifest and throws
// std::runtime_error / std::invalid_argument on data or validation problems.
void cmd_gen_roads(const PipelineConfig& cfg);
void cmd_gen_data(const PipelineConfig& cfg);
void cmd_diagnose(const PipelineConfig& cfg);
void cmd_train(const PipelineConfig& cfg);
void cmd_select(const PipelineConfig& cfg);
void cmd_calibrate(const PipelineConfig& cfg);
void cmd_evaluate(const PipelineConfig& cfg);

struct GateArgs {
    int segment_index = 0;
    double speed_kmh = 40.0;
    std::vector<double> accels;  // empty = the default sweep
    int direction = 1;
    std::string degradation_json;  // optional path; empty = nominal
};

void cmd_gate(const PipelineConfig& cfg, const GateArgs& args);
void cmd_report(const PipelineConfig& cfg);

}  // namespace capguard::pipeline
