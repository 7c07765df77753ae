#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "capguard/pipeline.hpp"

namespace {

// Exit codes: 0 success, 1 usage error, 2 data/validation error.
constexpr int kUsageError = 1;
constexpr int kDataError = 2;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "capguard: simulate degraded-vehicle maneuvers, train a conformalized "
        "deviation predictor, and gate maneuvers against certified bounds"};
    app.require_subcommand(1);

    std::optional<std::string> opt_config, opt_out, opt_grouping, opt_select_on;
    std::optional<std::uint64_t> opt_seed;
    std::optional<double> opt_alpha;
    std::optional<int> opt_workers;

    const auto add_shared = [&](CLI::App* sub) {
        sub->add_option("--config", opt_config, "pipeline configuration JSON");
        sub->add_option("--seed", opt_seed, "master seed override");
        sub->add_option("--out", opt_out, "output directory override");
        sub->add_option("--workers", opt_workers,
                        "parallel simulation workers (gen-data; 0 = all cores)");
        sub->add_option("--alpha", opt_alpha, "miscoverage level override");
        sub->add_option("--grouping", opt_grouping,
                        "coverage grouping: none, curvature:K, or dummy:N,L");
        sub->add_option("--select-on", opt_select_on,
                        "score model candidates on this split")
            ->check(CLI::IsMember({"holdout", "test"}));
        return sub;
    };

    auto* gen_roads =
        add_shared(app.add_subcommand("gen-roads", "generate road segments"));
    auto* gen_data = add_shared(app.add_subcommand(
        "gen-data", "simulate the scenario grid into a labeled dataset"));
    auto* diagnose = add_shared(app.add_subcommand(
        "diagnose", "score features for grouping (MI, redundancy, variance)"));
    auto* train = add_shared(app.add_subcommand(
        "train", "fit the quantile networks in the hyperparameter grid"));
    auto* calibrate = add_shared(app.add_subcommand(
        "calibrate", "compute conformal offsets on the calibration split"));
    auto* evaluate = add_shared(app.add_subcommand(
        "evaluate", "report coverage and interval lengths on the test split"));
    auto* select = add_shared(app.add_subcommand(
        "select", "pick the candidate meeting coverage with shortest intervals"));
    auto* gate = add_shared(
        app.add_subcommand("gate", "admit or reject a maneuver sweep"));
    auto* report = add_shared(
        app.add_subcommand("report", "assemble a run summary from artifacts"));

    capguard::pipeline::GateArgs gate_args;
    gate->add_option("--segment-index", gate_args.segment_index,
                     "road segment to gate on (index into the roads artifact)");
    gate->add_option("--speed", gate_args.speed_kmh, "entry speed, km/h");
    gate->add_option("--accels", gate_args.accels,
                     "candidate max lateral accelerations, m/s^2")
        ->delimiter(',');
    gate->add_option("--direction", gate_args.direction,
                     "lane-change direction, -1 or 1");
    gate->add_option("--degradation", gate_args.degradation_json,
                     "JSON with per-wheel angle/rate/torque factors");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsageError;
    }

    // Flag-value validation is a usage problem, not a data problem.
    capguard::featdiag::GroupingSpec grouping_override;
    try {
        if (opt_grouping)
            grouping_override = capguard::pipeline::parse_grouping(*opt_grouping);
        if (opt_alpha && !(*opt_alpha > 0.0 && *opt_alpha < 1.0))
            throw std::invalid_argument("--alpha must lie in (0, 1)");
        if (opt_workers && *opt_workers < 0)
            throw std::invalid_argument("--workers must be >= 0");
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsageError;
    }

    try {
        capguard::pipeline::PipelineConfig cfg;
        if (opt_config) cfg = capguard::pipeline::load_config(*opt_config);
        if (opt_seed) cfg.seed = *opt_seed;
        if (opt_out) cfg.out_dir = *opt_out;
        if (opt_workers) cfg.workers = *opt_workers;
        if (opt_alpha) cfg.alpha = *opt_alpha;
        if (opt_grouping) cfg.grouping = grouping_override;
        if (opt_select_on) cfg.select_on_test = (*opt_select_on == "test");

        if (app.got_subcommand(gen_roads)) {
            capguard::pipeline::cmd_gen_roads(cfg);
        } else if (app.got_subcommand(gen_data)) {
            capguard::pipeline::cmd_gen_data(cfg);
        } else if (app.got_subcommand(diagnose)) {
            capguard::pipeline::cmd_diagnose(cfg);
        } else if (app.got_subcommand(train)) {
            capguard::pipeline::cmd_train(cfg);
        } else if (app.got_subcommand(calibrate)) {
            capguard::pipeline::cmd_calibrate(cfg);
        } else if (app.got_subcommand(evaluate)) {
            capguard::pipeline::cmd_evaluate(cfg);
        } else if (app.got_subcommand(select)) {
            capguard::pipeline::cmd_select(cfg);
        } else if (app.got_subcommand(gate)) {
            capguard::pipeline::cmd_gate(cfg, gate_args);
        } else if (app.got_subcommand(report)) {
            capguard::pipeline::cmd_report(cfg);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kDataError;
    }
    return 0;
}
