#include "orthodid/serialize.hpp"

namespace orthodid {

namespace {

template <class T>
T field(const Json& j, const char* key, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("config field '") + key + "': " + e.what());
    }
}

}  // namespace

Json to_json(const LearnerSpec& spec) {
    Json j;
    j["kind"] = std::string(to_string(spec.kind));
    j["basis"] = std::string(to_string(spec.basis));
    j["penalty_c"] = spec.penalty_c;
    j["penalty_gamma"] = spec.penalty_gamma ? Json(*spec.penalty_gamma) : Json(nullptr);
    j["refinements"] = spec.refinements;
    j["cv_folds"] = spec.cv_folds;
    j["n_lambda"] = spec.n_lambda;
    j["lambda_min_ratio"] = spec.lambda_min_ratio;
    j["cv_patience"] = spec.cv_patience;
    j["lambda_grid"] = spec.lambda_grid;
    j["n_bandwidths"] = spec.n_bandwidths;
    j["bandwidth_lo"] = spec.bandwidth_lo;
    j["bandwidth_hi"] = spec.bandwidth_hi;
    j["bandwidth_grid"] = spec.bandwidth_grid;
    j["n_trees"] = spec.n_trees;
    j["mtry"] = spec.mtry;
    j["min_leaf"] = spec.min_leaf;
    j["bootstrap"] = spec.bootstrap;
    j["seed"] = spec.seed;
    return j;
}

LearnerSpec learner_spec_from_json(const Json& j) {
    if (!j.is_object()) throw ConfigError("learner spec must be a JSON object");
    LearnerSpec s;
    s.kind = parse_learner_kind(field<std::string>(j, "kind", std::string(to_string(s.kind))));
    s.basis = parse_basis(field<std::string>(j, "basis", std::string(to_string(s.basis))));
    s.penalty_c = field(j, "penalty_c", s.penalty_c);
    if (j.contains("penalty_gamma") && !j.at("penalty_gamma").is_null()) {
        s.penalty_gamma = field(j, "penalty_gamma", 0.0);
    }
    s.refinements = field(j, "refinements", s.refinements);
    s.cv_folds = field(j, "cv_folds", s.cv_folds);
    s.n_lambda = field(j, "n_lambda", s.n_lambda);
    s.lambda_min_ratio = field(j, "lambda_min_ratio", s.lambda_min_ratio);
    s.cv_patience = field(j, "cv_patience", s.cv_patience);
    s.lambda_grid = field(j, "lambda_grid", s.lambda_grid);
    s.n_bandwidths = field(j, "n_bandwidths", s.n_bandwidths);
    s.bandwidth_lo = field(j, "bandwidth_lo", s.bandwidth_lo);
    s.bandwidth_hi = field(j, "bandwidth_hi", s.bandwidth_hi);
    s.bandwidth_grid = field(j, "bandwidth_grid", s.bandwidth_grid);
    s.n_trees = field(j, "n_trees", s.n_trees);
    s.mtry = field(j, "mtry", s.mtry);
    s.min_leaf = field(j, "min_leaf", s.min_leaf);
    s.bootstrap = field(j, "bootstrap", s.bootstrap);
    s.seed = field(j, "seed", s.seed);
    return s;
}

Json to_json(const EstimatorSpec& spec) {
    Json j;
    j["design"] = std::string(to_string(spec.design));
    j["k_folds"] = spec.k_folds;
    j["propensity_learner"] = to_json(spec.propensity_learner);
    j["outcome_learner"] = to_json(spec.outcome_learner);
    j["clip"] = spec.clip;
    j["seed"] = spec.seed;
    j["target_level"] = spec.target_level;
    j["max_fold_redraws"] = spec.max_fold_redraws;
    return j;
}

EstimatorSpec estimator_spec_from_json(const Json& j) {
    if (!j.is_object()) throw ConfigError("estimator spec must be a JSON object");
    EstimatorSpec s;
    s.design = parse_design(field<std::string>(j, "design", std::string(to_string(s.design))));
    s.k_folds = field(j, "k_folds", s.k_folds);
    if (j.contains("propensity_learner")) s.propensity_learner = learner_spec_from_json(j.at("propensity_learner"));
    if (j.contains("outcome_learner")) s.outcome_learner = learner_spec_from_json(j.at("outcome_learner"));
    s.clip = field(j, "clip", s.clip);
    s.seed = field(j, "seed", s.seed);
    s.target_level = field(j, "target_level", s.target_level);
    s.max_fold_redraws = field(j, "max_fold_redraws", s.max_fold_redraws);
    return s;
}

Json to_json(const AttResult& r) {
    Json j;
    j["theta_hat"] = r.theta_hat;
    j["se"] = r.se;
    j["ci_95"] = {r.ci_95.first, r.ci_95.second};
    j["sigma_hat"] = r.sigma_hat;
    j["k_folds"] = r.k_folds;
    j["n"] = r.n;
    j["fold_seed"] = r.fold_seed;
    j["per_fold"] = r.per_fold_theta;
    j["p_hat_per_fold"] = r.p_hat_per_fold;
    if (!r.lambda_hat_per_fold.empty()) {
        j["lambda_hat_per_fold"] = r.lambda_hat_per_fold;
        j["g_lambda_per_fold"] = r.g_lambda_per_fold;
    }
    const auto& d = r.diagnostics;
    Json diag;
    diag["estimator"] = d.estimator;
    diag["variance"] = d.naive_variance ? "naive" : "plug_in";
    diag["clipped"] = d.clipped;
    diag["kernel_fallbacks"] = d.kernel_fallbacks;
    diag["fold_redraws"] = d.fold_redraws;
    diag["fold_sizes"] = d.fold_sizes;
    diag["propensity_converged"] = d.propensity_converged;
    diag["outcome_converged"] = d.outcome_converged;
    j["diagnostics"] = diag;
    return j;
}

Json to_json(const McSummary& s) {
    Json j;
    j["replications_ok"] = s.estimates.size();
    j["n_failed"] = s.n_failed;
    j["true_theta"] = s.true_theta;
    j["mean"] = s.mean;
    j["bias"] = s.bias;
    j["sd"] = s.sd;
    j["rmse"] = s.rmse;
    j["coverage_95"] = s.coverage_95;
    j["mean_se"] = s.mean_se;
    j["degenerate"] = s.degenerate;
    j["replicates"] = s.replicates;
    j["estimates"] = s.estimates;
    j["ses"] = s.ses;
    return j;
}

Json to_json(const Histogram& h) {
    Json j;
    j["lo"] = h.lo;
    j["hi"] = h.hi;
    j["edges"] = h.edges;
    j["counts"] = h.counts;
    return j;
}

Json to_json(const ProbeCurve& c) {
    Json j;
    Json points = Json::array();
    for (std::size_t i = 0; i < c.r.size(); ++i) {
        points.push_back({{"r", c.r[i]}, {"M_orthogonal", c.m_orthogonal[i]}, {"M_conventional", c.m_conventional[i]}});
    }
    j["curve"] = points;
    j["derivative_orthogonal"] = c.derivative_orthogonal;
    j["derivative_conventional"] = c.derivative_conventional;
    return j;
}

}  // namespace orthodid
