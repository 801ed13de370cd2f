#include "orthodid/cli.hpp"

#include "orthodid/parallel.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace orthodid {

std::string_view to_string(Command command) {
    switch (command) {
        case Command::Estimate: return "estimate";
        case Command::Simulate: return "simulate";
        case Command::Probe: return "probe";
        case Command::Summarize: return "summarize";
    }
    return "unknown";
}

Command parse_command(std::string_view text) {
    for (Command c : {Command::Estimate, Command::Simulate, Command::Probe, Command::Summarize}) {
        if (text == to_string(c)) return c;
    }
    throw ConfigError("unknown command '" + std::string(text) + "'");
}

namespace {

EstimatorMode parse_mode(std::string_view text) {
    for (EstimatorMode m : {EstimatorMode::Orthogonal, EstimatorMode::Conventional, EstimatorMode::Both}) {
        if (text == to_string(m)) return m;
    }
    throw ConfigError("unknown estimator mode '" + std::string(text) + "'");
}

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("config field '") + key + "': " + e.what());
    }
}

}  // namespace

Json to_json(const RunConfig& c) {
    Json j;
    j["command"] = std::string(to_string(c.command));
    switch (c.command) {
        case Command::Estimate: {
            j["input"] = c.input;
            Json roles = Json::object();
            for (const auto& [role, column] : c.columns.roles) roles[role] = column;
            j["columns"] = roles;
            j["covariates"] = c.columns.covariates;
            j["compare"] = c.compare;
            break;
        }
        case Command::Simulate:
            j["dgp"] = std::string(to_string(c.dgp));
            j["n"] = c.n;
            j["p"] = c.p;
            j["r"] = c.replications;
            j["mode"] = std::string(to_string(c.mode));
            j["noise_convention"] = std::string(to_string(c.dgp_options.convention));
            j["noise_scale"] = c.dgp_options.noise_scale;
            j["bins"] = c.bins;
            j["estimates_csv"] = c.estimates_csv;
            break;
        case Command::Probe:
            j["dgp"] = std::string(to_string(c.dgp));
            j["n"] = c.n;
            j["p"] = c.p;
            j["noise_convention"] = std::string(to_string(c.dgp_options.convention));
            j["noise_scale"] = c.dgp_options.noise_scale;
            j["amplitude"] = c.direction.propensity_amplitude;
            j["shift"] = c.direction.outcome_shift;
            j["clip_lo"] = c.direction.clip_lo;
            j["clip_hi"] = c.direction.clip_hi;
            j["step"] = c.probe_step;
            break;
        case Command::Summarize:
            j["input"] = c.input;
            j["true_theta"] = c.true_theta;
            j["bins"] = c.bins;
            break;
    }
    j["estimator"] = to_json(c.estimator);
    j["output"] = c.output;
    j["format"] = c.format;
    j["threads"] = c.threads;
    return j;
}

RunConfig run_config_from_json(const Json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    RunConfig c;
    c.command = parse_command(get_or<std::string>(j, "command", ""));
    c.input = get_or<std::string>(j, "input", "");
    if (j.contains("columns")) {
        for (const auto& [role, column] : j.at("columns").items()) c.columns.roles[role] = column.get<std::string>();
    }
    c.columns.covariates = get_or(j, "covariates", c.columns.covariates);
    c.compare = get_or(j, "compare", c.compare);
    if (j.contains("dgp")) c.dgp = parse_dgp(j.at("dgp").get<std::string>());
    c.n = get_or(j, "n", c.n);
    c.p = get_or(j, "p", c.p);
    c.replications = get_or(j, "r", c.replications);
    if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
    if (j.contains("noise_convention")) {
        c.dgp_options.convention = parse_noise_convention(j.at("noise_convention").get<std::string>());
    }
    c.dgp_options.noise_scale = get_or(j, "noise_scale", c.dgp_options.noise_scale);
    c.bins = get_or(j, "bins", c.bins);
    c.estimates_csv = get_or(j, "estimates_csv", c.estimates_csv);
    c.direction.propensity_amplitude = get_or(j, "amplitude", c.direction.propensity_amplitude);
    c.direction.outcome_shift = get_or(j, "shift", c.direction.outcome_shift);
    c.direction.clip_lo = get_or(j, "clip_lo", c.direction.clip_lo);
    c.direction.clip_hi = get_or(j, "clip_hi", c.direction.clip_hi);
    c.probe_step = get_or(j, "step", c.probe_step);
    c.true_theta = get_or(j, "true_theta", c.true_theta);
    if (j.contains("estimator")) c.estimator = estimator_spec_from_json(j.at("estimator"));
    c.output = get_or(j, "output", c.output);
    c.format = get_or(j, "format", c.format);
    c.threads = get_or(j, "threads", c.threads);
    return c;
}

namespace {

const std::vector<std::string>& required_roles(Design design) {
    static const std::vector<std::string> ro{"y_pre", "y_post", "treat"};
    static const std::vector<std::string> rcs{"y", "time", "treat"};
    static const std::vector<std::string> multi{"y_pre", "y_post", "level"};
    switch (design) {
        case Design::RepeatedOutcomes: return ro;
        case Design::RepeatedCrossSection: return rcs;
        case Design::Multilevel: return multi;
    }
    return ro;
}

std::string role_flag(const std::string& role) {
    if (role == "y_pre") return "--y-pre";
    if (role == "y_post") return "--y-post";
    if (role == "time") return "--time";
    return "--" + role;
}

void validate_config(const RunConfig& c) {
    if (c.format != "json" && c.format != "csv") throw ConfigError("--format must be json or csv");
    if (c.threads < 1) throw ConfigError("--threads must be positive");
    c.estimator.validate();
    switch (c.command) {
        case Command::Estimate:
            if (c.input.empty()) throw ConfigError("--input is required");
            for (const auto& role : required_roles(c.estimator.design)) {
                if (!c.columns.roles.count(role)) {
                    throw ConfigError(role_flag(role) + " is required for design " +
                                      std::string(to_string(c.estimator.design)));
                }
            }
            break;
        case Command::Simulate:
            if (c.replications < 1) throw ConfigError("--r must be at least 1");
            if (c.n < 2) throw ConfigError("--n must be at least 2");
            if (c.bins < 1) throw ConfigError("--bins must be at least 1");
            if (c.estimator.design != design_of(c.dgp)) throw ConfigError("estimator design does not match the dgp");
            break;
        case Command::Probe:
            if (c.n < kMinProbePopulation) throw ConfigError("--n must be at least 10000 for the probe");
            if (c.estimator.design != design_of(c.dgp)) throw ConfigError("estimator design does not match the dgp");
            break;
        case Command::Summarize:
            if (c.input.empty()) throw ConfigError("--input is required");
            if (c.bins < 1) throw ConfigError("--bins must be at least 1");
            break;
    }
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Json envelope(const RunConfig& c) {
    Json j;
    j["schema_version"] = kSchemaVersion;
    j["command"] = std::string(to_string(c.command));
    j["config"] = to_json(c);
    return j;
}

void write_att_csv_row(std::ostream& out, const AttResult& r) {
    out << r.diagnostics.estimator << ',' << fmt(r.theta_hat) << ',' << fmt(r.se) << ',' << fmt(r.ci_95.first) << ','
        << fmt(r.ci_95.second) << ',' << fmt(r.sigma_hat) << ',' << r.n << '\n';
}

void run_estimate(const RunConfig& c, std::ostream& out) {
    const LoadResult loaded = load_dataset(c.input, c.estimator.design, c.columns);
    const AttResult orth = estimate(loaded.dataset, c.estimator);
    std::optional<AttResult> conv;
    if (c.compare) conv = estimate_conventional(loaded.dataset, c.estimator);
    if (c.format == "csv") {
        out << "estimator,theta_hat,se,ci_lo,ci_hi,sigma_hat,n\n";
        write_att_csv_row(out, orth);
        if (conv) write_att_csv_row(out, *conv);
        return;
    }
    Json j = envelope(c);
    j["rows_read"] = loaded.rows_read;
    j["rows_rejected"] = loaded.rows_rejected;
    j["orthogonal"] = to_json(orth);
    if (conv) j["conventional"] = to_json(*conv);
    out << j.dump(2) << '\n';
}

std::filesystem::path sibling_path(const std::string& path, const std::string& suffix) {
    std::filesystem::path p(path);
    return p.parent_path() / (p.stem().string() + suffix + p.extension().string());
}

void write_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write '" + path.string() + "'");
    body(f);
    if (!f) throw ConfigError("failed writing '" + path.string() + "'");
}

void run_simulate(const RunConfig& c, std::ostream& out) {
    McConfig mc;
    mc.dgp = c.dgp;
    mc.n = c.n;
    mc.p = c.p;
    mc.replications = c.replications;
    mc.seed = c.estimator.seed;
    mc.estimator = c.estimator;
    mc.mode = c.mode;
    mc.dgp_options = c.dgp_options;
    mc.threads = c.threads;
    const McRun run = run_monte_carlo(mc);

    std::vector<std::pair<std::string, const McSummary*>> parts;
    if (run.orthogonal) parts.emplace_back("orthogonal", &*run.orthogonal);
    if (run.conventional) parts.emplace_back("conventional", &*run.conventional);

    if (!c.estimates_csv.empty()) {
        for (std::size_t k = 0; k < parts.size(); ++k) {
            const auto path = k == 0 ? std::filesystem::path(c.estimates_csv)
                                     : sibling_path(c.estimates_csv, "_" + parts[k].first);
            write_file(path, [&](std::ostream& f) { write_estimates_csv(f, *parts[k].second); });
        }
    }
    if (c.format == "csv") {
        if (parts.size() == 1) {
            write_estimates_csv(out, *parts[0].second);
            return;
        }
        // Two estimators on the same replications: tag each row with its estimator.
        out << "estimator,replicate,estimate,se,covered\n";
        for (const auto& [name, s] : parts) {
            std::ostringstream body;
            write_estimates_csv(body, *s);
            std::istringstream lines(body.str());
            std::string line;
            std::getline(lines, line);
            while (std::getline(lines, line)) out << name << ',' << line << '\n';
        }
        return;
    }
    Json j = envelope(c);
    j["dgp"] = std::string(to_string(c.dgp));
    j["true_theta"] = true_theta(c.dgp, c.estimator.target_level);
    for (const auto& [name, s] : parts) {
        Json part = to_json(*s);
        part["histogram"] = to_json(make_histogram(s->estimates, c.bins));
        j[name] = part;
    }
    out << j.dump(2) << '\n';
}

void run_probe(const RunConfig& c, std::ostream& out) {
    const ProbePopulation pop = make_probe_population(c.dgp, c.n, c.p, c.estimator.seed, c.direction, c.dgp_options,
                                                      c.estimator.target_level);
    const ProbeCurve curve = orthogonality_probe(pop, default_probe_grid(), c.probe_step);
    if (c.format == "csv") {
        out << "r,M_orthogonal,M_conventional\n";
        for (std::size_t i = 0; i < curve.r.size(); ++i) {
            out << fmt(curve.r[i]) << ',' << fmt(curve.m_orthogonal[i]) << ',' << fmt(curve.m_conventional[i]) << '\n';
        }
        return;
    }
    Json j = envelope(c);
    j["dgp"] = std::string(to_string(c.dgp));
    j["true_theta"] = pop.params.theta;
    j["probe"] = to_json(curve);
    out << j.dump(2) << '\n';
}

void run_summarize(const RunConfig& c, std::ostream& out) {
    std::ifstream in(c.input, std::ios::binary);
    if (!in) throw DataError("cannot open input file '" + c.input + "'");
    const auto rows = parse_csv(in);
    if (rows.empty()) throw DataError("CSV has no header row");
    std::optional<std::size_t> est_col;
    std::optional<std::size_t> se_col;
    for (std::size_t k = 0; k < rows[0].size(); ++k) {
        if (rows[0][k] == "estimate") est_col = k;
        if (rows[0][k] == "se") se_col = k;
    }
    if (!est_col || !se_col) throw DataError("summarize input needs 'estimate' and 'se' columns");
    std::vector<double> est;
    std::vector<double> ses;
    auto number = [](const std::string& s, std::size_t row) {
        try {
            std::size_t used = 0;
            const double v = std::stod(s, &used);
            if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw DataError("row " + std::to_string(row) + ": non-numeric value '" + s + "'");
        }
    };
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() == 1 && rows[r][0].empty()) continue;
        if (rows[r].size() <= std::max(*est_col, *se_col)) throw DataError("row " + std::to_string(r) + " is short");
        est.push_back(number(rows[r][*est_col], r));
        ses.push_back(number(rows[r][*se_col], r));
    }
    if (est.empty()) throw DataError("summarize input has no rows");
    const McSummary s = summarize_estimates(est, ses, c.true_theta);
    if (c.format == "csv") {
        out << "replications,mean,bias,sd,rmse,coverage_95,mean_se\n"
            << s.estimates.size() << ',' << fmt(s.mean) << ',' << fmt(s.bias) << ',' << fmt(s.sd) << ','
            << fmt(s.rmse) << ',' << fmt(s.coverage_95) << ',' << fmt(s.mean_se) << '\n';
        return;
    }
    Json j = envelope(c);
    Json summary = to_json(s);
    summary["histogram"] = to_json(make_histogram(s.estimates, c.bins));
    j["summary"] = summary;
    out << j.dump(2) << '\n';
}

}  // namespace

void execute(const RunConfig& config, std::ostream& out) {
    validate_config(config);
    std::ostringstream buffer;
    switch (config.command) {
        case Command::Estimate: run_estimate(config, buffer); break;
        case Command::Simulate: run_simulate(config, buffer); break;
        case Command::Probe: run_probe(config, buffer); break;
        case Command::Summarize: run_summarize(config, buffer); break;
    }
    if (config.output.empty()) {
        out << buffer.str();
    } else {
        write_file(config.output, [&](std::ostream& f) { f << buffer.str(); });
    }
}

namespace {

// Flags shared by every subcommand that builds an estimator.
struct EstimatorFlags {
    std::string learner;
    std::string propensity_learner;
    std::string outcome_learner;
    std::string basis = "raw";
    int k = 5;
    double clip = 0.01;
    std::uint64_t seed = 0;
    int target_level = 0;
    int n_trees = 500;
    int cv_folds = 10;
    int n_lambda = 50;
    int n_bandwidths = 20;

    void attach(CLI::App* app, bool learners) {
        app->add_option("--seed", seed, "Random seed (required)")->required();
        app->add_option("--target-level", target_level, "Treatment level of interest (multilevel designs)");
        if (!learners) return;
        app->add_option("--learner", learner, "Learner family: logit_lasso, kernel or forest");
        app->add_option("--propensity-learner", propensity_learner, "Propensity learner: logit_lasso, kernel, forest");
        app->add_option("--outcome-learner", outcome_learner, "Outcome learner: lasso, kernel, forest");
        app->add_option("--basis", basis, "Dictionary for lasso learners: raw or raw_squares");
        app->add_option("--k", k, "Number of cross-fitting folds");
        app->add_option("--clip", clip, "Propensity clipping bound");
        app->add_option("--n-trees", n_trees, "Trees per forest");
        app->add_option("--cv-folds", cv_folds, "Cross-validation folds for logit-lasso");
        app->add_option("--n-lambda", n_lambda, "Length of the logit-lasso penalty path");
        app->add_option("--n-bandwidths", n_bandwidths, "Bandwidth grid size for kernel learners");
    }

    EstimatorSpec resolve(Design design, const std::string& default_family, int default_target) const {
        EstimatorSpec spec;
        spec.design = design;
        spec.k_folds = k;
        spec.clip = clip;
        spec.seed = seed;
        spec.target_level = target_level > 0 ? target_level : default_target;
        const std::string family = learner.empty() ? default_family : learner;
        LearnerKind prop;
        LearnerKind outc;
        if (family == "logit_lasso") {
            prop = LearnerKind::LogitLasso;
            outc = LearnerKind::Lasso;
        } else if (family == "kernel") {
            prop = LearnerKind::Kernel;
            outc = LearnerKind::Kernel;
        } else if (family == "forest") {
            prop = LearnerKind::LogitLasso;
            outc = LearnerKind::Forest;
        } else {
            throw ConfigError("unknown learner family '" + family + "' (use logit_lasso, kernel or forest)");
        }
        if (!propensity_learner.empty()) prop = parse_learner_kind(propensity_learner);
        if (!outcome_learner.empty()) outc = parse_learner_kind(outcome_learner);
        for (LearnerSpec* ls : {&spec.propensity_learner, &spec.outcome_learner}) {
            ls->basis = parse_basis(basis);
            ls->n_trees = n_trees;
            ls->cv_folds = cv_folds;
            ls->n_lambda = n_lambda;
            ls->n_bandwidths = n_bandwidths;
        }
        spec.propensity_learner.kind = prop;
        spec.outcome_learner.kind = outc;
        return spec;
    }
};

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string family_for(DgpId id) {
    return is_ml_design(id) ? "logit_lasso" : "kernel";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Cross-fitted orthogonal difference-in-differences estimators", "orthodid"};
    app.set_version_flag("--version", "orthodid 1.0.0");
    std::string config_path;
    std::string config_output;
    int threads = 0;
    app.add_option("--config", config_path, "Replay the configuration embedded in a previous JSON output");
    app.add_option("--out", config_output, "Output path when replaying a configuration");
    app.add_option("--threads", threads, "Worker threads (default: ORTHODID_THREADS, then all cores)");

    // estimate
    auto* est = app.add_subcommand("estimate", "Estimate the ATT on a CSV dataset");
    std::string design;
    RunConfig est_cfg;
    std::string y_pre, y_post, treat, y, time, level, covariates, est_out, est_format = "json";
    EstimatorFlags est_flags;
    est->add_option("--design", design, "ro, rcs or multi")->required();
    est->add_option("--input", est_cfg.input, "CSV file with a header row");
    est->add_option("--y-pre", y_pre, "Pre-period outcome column");
    est->add_option("--y-post", y_post, "Post-period outcome column");
    est->add_option("--treat", treat, "Treatment indicator column");
    est->add_option("--y", y, "Outcome column (cross sections)");
    est->add_option("--time", time, "Post-period indicator column (cross sections)");
    est->add_option("--level", level, "Treatment level column (multilevel)");
    est->add_option("--covariates", covariates, "Comma-separated covariate columns (default: all others)");
    est->add_flag("--compare", est_cfg.compare, "Also report the conventional estimator");
    est->add_option("--out", est_out, "Output file (default stdout)");
    est->add_option("--format", est_format, "json or csv");
    est->add_option("--threads", threads, "Worker threads");
    est_flags.attach(est, true);

    // simulate
    auto* sim = app.add_subcommand("simulate", "Monte Carlo study on a simulation design");
    std::string sim_dgp, sim_out, sim_format = "json", sim_noise = "variance";
    RunConfig sim_cfg;
    bool both = false;
    bool conventional_only = false;
    EstimatorFlags sim_flags;
    sim->add_option("--dgp", sim_dgp, "ro_ml, ro_kernel, rcs_ml, rcs_kernel, multi_ml or multi_kernel")->required();
    sim->add_option("--n", sim_cfg.n, "Sample size per replication");
    sim->add_option("--p", sim_cfg.p, "Covariate dimension (ML designs)");
    sim->add_option("--r", sim_cfg.replications, "Replications");
    sim->add_flag("--both", both, "Run orthogonal and conventional estimators on identical datasets");
    sim->add_flag("--conventional", conventional_only, "Run only the conventional estimator");
    sim->add_option("--noise", sim_noise, "Read the noise scale as a variance or an sd");
    sim->add_option("--noise-scale", sim_cfg.dgp_options.noise_scale, "Noise scale (default 0.1)");
    sim->add_option("--bins", sim_cfg.bins, "Histogram bins");
    sim->add_option("--estimates-csv", sim_cfg.estimates_csv, "Write raw estimates to this CSV");
    sim->add_option("--out", sim_out, "Output file (default stdout)");
    sim->add_option("--format", sim_format, "json or csv");
    sim->add_option("--threads", threads, "Worker threads");
    sim_flags.attach(sim, true);

    // probe
    auto* probe = app.add_subcommand("probe", "Numerical orthogonality probe on a large synthetic population");
    std::string probe_dgp = "ro_ml", probe_out, probe_format = "json", probe_noise = "variance";
    RunConfig probe_cfg;
    probe_cfg.n = 100000;
    EstimatorFlags probe_flags;
    probe->add_option("--dgp", probe_dgp, "Simulation design supplying the truth");
    probe->add_option("--n", probe_cfg.n, "Population size (at least 10000)");
    probe->add_option("--p", probe_cfg.p, "Covariate dimension (ML designs)");
    probe->add_option("--amplitude", probe_cfg.direction.propensity_amplitude, "Propensity perturbation amplitude");
    probe->add_option("--shift", probe_cfg.direction.outcome_shift, "Outcome-regression shift");
    probe->add_option("--step", probe_cfg.probe_step, "Central-difference step");
    probe->add_option("--noise", probe_noise, "Read the noise scale as a variance or an sd");
    probe->add_option("--out", probe_out, "Output file (default stdout)");
    probe->add_option("--format", probe_format, "json or csv");
    probe_flags.attach(probe, false);

    // summarize
    auto* summ = app.add_subcommand("summarize", "Summarize a CSV of estimates and standard errors");
    RunConfig summ_cfg;
    std::string summ_out, summ_format = "json";
    summ->add_option("--input", summ_cfg.input, "CSV with 'estimate' and 'se' columns")->required();
    summ->add_option("--true-theta", summ_cfg.true_theta, "True ATT")->required();
    summ->add_option("--bins", summ_cfg.bins, "Histogram bins");
    summ->add_option("--out", summ_out, "Output file (default stdout)");
    summ->add_option("--format", summ_format, "json or csv");

    app.require_subcommand(0, 1);

    if (args.empty()) {
        err << app.help();
        return 1;
    }

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return 2;
    }

    try {
        RunConfig cfg;
        if (!config_path.empty()) {
            if (app.get_subcommands().size() > 0) throw ConfigError("--config cannot be combined with a subcommand");
            std::ifstream in(config_path, std::ios::binary);
            if (!in) throw ConfigError("cannot open config file '" + config_path + "'");
            Json j;
            try {
                j = Json::parse(in);
            } catch (const Json::exception& e) {
                throw ConfigError(std::string("config file is not valid JSON: ") + e.what());
            }
            cfg = run_config_from_json(j.contains("config") ? j.at("config") : j);
            if (!config_output.empty()) cfg.output = config_output;
            if (threads > 0) cfg.threads = threads;
        } else if (est->parsed()) {
            cfg = est_cfg;
            cfg.command = Command::Estimate;
            cfg.estimator = est_flags.resolve(parse_design(design), "logit_lasso", 1);
            auto set_role = [&](const char* role, const std::string& column) {
                if (!column.empty()) cfg.columns.roles[role] = column;
            };
            set_role("y_pre", y_pre);
            set_role("y_post", y_post);
            set_role("treat", treat);
            set_role("y", y);
            set_role("time", time);
            set_role("level", level);
            cfg.columns.covariates = split_list(covariates);
            cfg.output = est_out;
            cfg.format = est_format;
        } else if (sim->parsed()) {
            cfg = sim_cfg;
            cfg.command = Command::Simulate;
            cfg.dgp = parse_dgp(sim_dgp);
            if (both && conventional_only) throw ConfigError("--both and --conventional are exclusive");
            cfg.mode = both ? EstimatorMode::Both
                            : (conventional_only ? EstimatorMode::Conventional : EstimatorMode::Orthogonal);
            cfg.dgp_options.convention = parse_noise_convention(sim_noise);
            cfg.estimator = sim_flags.resolve(design_of(cfg.dgp), family_for(cfg.dgp), 2);
            cfg.output = sim_out;
            cfg.format = sim_format;
        } else if (probe->parsed()) {
            cfg = probe_cfg;
            cfg.command = Command::Probe;
            cfg.dgp = parse_dgp(probe_dgp);
            cfg.dgp_options.convention = parse_noise_convention(probe_noise);
            cfg.estimator = probe_flags.resolve(design_of(cfg.dgp), family_for(cfg.dgp), 2);
            cfg.output = probe_out;
            cfg.format = probe_format;
        } else if (summ->parsed()) {
            cfg = summ_cfg;
            cfg.command = Command::Summarize;
            cfg.output = summ_out;
            cfg.format = summ_format;
        } else {
            err << app.help();
            return 1;
        }
        if (config_path.empty()) cfg.threads = resolve_threads(threads);
        execute(cfg, out);
        return 0;
    } catch (const ConfigError& e) {
        err << "orthodid: configuration error: " << e.what() << '\n';
        return 2;
    } catch (const DataError& e) {
        err << "orthodid: data error: " << e.what() << '\n';
        return 3;
    } catch (const EstimationError& e) {
        err << "orthodid: estimation error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        err << "orthodid: error: " << e.what() << '\n';
        return 4;
    }
}

}  // namespace orthodid
