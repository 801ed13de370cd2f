#pragma once

// JSON forms of the public result and configuration types. Numbers are written
// with round-trip precision, so reloading a configuration is bit-exact.

#include "orthodid/crossfit.hpp"
#include "orthodid/simulate.hpp"

#include <json.hpp>

namespace orthodid {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

Json to_json(const LearnerSpec& spec);
LearnerSpec learner_spec_from_json(const Json& j);

Json to_json(const EstimatorSpec& spec);
EstimatorSpec estimator_spec_from_json(const Json& j);

Json to_json(const AttResult& result);
Json to_json(const McSummary& summary);
Json to_json(const Histogram& histogram);
Json to_json(const ProbeCurve& curve);

}  // namespace orthodid
