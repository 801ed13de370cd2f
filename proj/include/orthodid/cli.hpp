#pragma once

// Command-line front end: estimate, simulate, probe and summarize.

#include "orthodid/serialize.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace orthodid {

enum class Command { Estimate, Simulate, Probe, Summarize };
std::string_view to_string(Command command);
Command parse_command(std::string_view text);

/// Everything needed to reproduce a run. Every JSON output embeds it under
/// "config"; `orthodid --config FILE` replays it.
struct RunConfig {
    Command command = Command::Estimate;

    // estimate
    std::string input;
    ColumnMap columns;
    bool compare = false;

    // simulate / probe
    DgpId dgp = DgpId::RO_ML;
    Eigen::Index n = 200;
    Eigen::Index p = 100;
    int replications = 100;
    EstimatorMode mode = EstimatorMode::Orthogonal;
    DgpOptions dgp_options;
    int bins = 40;
    std::string estimates_csv;
    ProbeDirection direction;
    double probe_step = 0.01;

    // summarize
    double true_theta = 0.0;

    EstimatorSpec estimator;
    std::string output;         // empty: stdout
    std::string format = "json";  // json or csv
    int threads = 1;
};

Json to_json(const RunConfig& config);
RunConfig run_config_from_json(const Json& j);

/// Executes a resolved configuration, writing the primary artifact to `out`
/// (or the configured output file). Throws the library's Error types.
void execute(const RunConfig& config, std::ostream& out);

/// Exit codes: 0 success, 1 usage (no arguments), 2 configuration error,
/// 3 data error, 4 estimation error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace orthodid
