#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "capguard/roadgeom.hpp"
#include "capguard/vehiclesim.hpp"

namespace capguard::dataset {

// Model inputs, in network/CSV order. w_min is deliberately *not* a feature:
// planning against the widest cross-section is the conservative choice, and
// the narrowest width re-enters later through the clearance gate.
inline constexpr int kFeatureCount = 19;
extern const std::array<const char*, kFeatureCount> kFeatureNames;

// Exact CSV header (column list is the feature order with w_min inserted
// after r_q, plus run_id / label / clip-flag bookends). Data rows use plain
// commas; the reader trims whitespace around cells either way.
extern const char* const kCsvHeader;

struct Sample {
    std::int64_t run_id = 0;
    std::array<double, kFeatureCount> x{};
    double w_min = 0.0;  // metadata only, excluded from x
    double y = 0.0;      // max lateral deviation, m, clipped at vehiclesim::kEpsCut
    bool clipped = false;
};

struct Provenance {
    std::uint64_t seed = 0;
    std::string config_hash;        // FNV-1a of the sampling configuration
    std::string simulator_version;  // vehiclesim::kSimVersion at generation time
};

struct FaultRecord {
    std::int64_t run_id = 0;
    std::string message;
};

struct Dataset {
    std::vector<Sample> samples;  // sorted by run_id
    Provenance provenance;
    std::vector<FaultRecord> faults;  // runs excluded by simulation faults
};

// One planned run: segment × maneuver × degradation, with the entry speed
// already drawn. run_id = segment_index*(n_maneuvers*n_degradations)
// + maneuver_index*n_degradations + degradation_index.
struct Scenario {
    std::int64_t run_id = 0;
    int segment_index = 0;
    vehiclesim::ManeuverTemplate maneuver;
    vehiclesim::DegradationState degradation;
};

struct ScenarioSet {
    std::vector<roadgeom::RoadSegment> segments;
    std::vector<Scenario> scenarios;
    Provenance provenance;
};

// Builds the full scenario grid over freshly generated segments. Per segment
// the maneuver templates cycle through {lane change left, lane change right,
// lane follow} across ceil(n_maneuvers/3) lateral-acceleration levels evenly
// spaced in [2.5, 4.5] m/s^2; degradation 0 is nominal and the rest draw all
// 12 factors i.i.d. uniform [0,1]; every run draws its entry speed uniform
// [30, 50] km/h. All draws come from substreams keyed on (seed, domain, id),
// so any subset regenerates identically.
ScenarioSet sample_scenarios(int n_segments, int n_maneuvers, int n_degradations,
                             std::uint64_t seed,
                             const roadgeom::SegmentGenConfig& cfg = {});

// Same grid over segments loaded from an existing roads artifact.
ScenarioSet scenarios_for_segments(const std::vector<roadgeom::RoadSegment>& segments,
                                   int n_maneuvers, int n_degradations,
                                   std::uint64_t seed);

// Pure feature extraction; re-deriving x from the stored scenario reproduces
// the CSV row exactly.
std::array<double, kFeatureCount> make_features(const roadgeom::RoadSegment& seg,
                                                const vehiclesim::ManeuverTemplate& m,
                                                const vehiclesim::DegradationState& deg);

struct GenerateOptions {
    int workers = 1;
    // Append-as-you-go CSV; on restart, rows already present are validated
    // against the scenario set and skipped. Empty disables checkpointing.
    std::string checkpoint_path;
    vehiclesim::VehicleParams params{};
    std::function<void(std::size_t done, std::size_t total)> progress;
};

// Simulates every scenario and assembles samples sorted by run_id. Faulted
// runs are excluded and recorded (and logged to stderr); more than 1% faults
// aborts with an error.
Dataset generate_dataset(const ScenarioSet& set, const GenerateOptions& opts = {});

// Writes the dataset CSV plus a "<path>.provenance.json" sidecar.
void write_csv(const Dataset& ds, const std::string& path);

// Reads a dataset CSV; restores provenance and fault records from the sidecar
// when present and cross-checks the stored sample count.
Dataset read_csv(const std::string& path);

struct SplitResult {
    Dataset train, cal, test;
};

// Disjoint uniform draws without replacement: n_cal calibration samples,
// n_test test samples, remainder train; each split sorted by run_id.
SplitResult split_dataset(const Dataset& ds, std::size_t n_cal, std::size_t n_test,
                          std::uint64_t seed);

}  // namespace capguard::dataset
