#pragma once

#include <nlohmann/json.hpp>
#include <string>

#include "dosegp/active.hpp"
#include "dosegp/affine.hpp"
#include "dosegp/backdoor.hpp"
#include "dosegp/eval.hpp"
#include "dosegp/semisynth.hpp"
#include "dosegp/synthgen.hpp"

namespace dosegp {

using nlohmann::json;

json to_json(const Eigen::VectorXd& v);
json to_json(const Eigen::MatrixXd& m);
Eigen::VectorXd vector_from_json(const json& j, const std::string& what);
Eigen::MatrixXd matrix_from_json(const json& j, const std::string& what);

json to_json(const StandardizeMoments& m);
StandardizeMoments moments_from_json(const json& j);

json to_json(const DoseResponsePrior& prior);
DoseResponsePrior prior_from_json(const json& j);

json to_json(const McmcSamples& samples);
McmcSamples samples_from_json(const json& j);

// Stores the defining scalars plus derived coefficients; reading back
// regenerates from the seed and cross-checks the stored coefficients.
json to_json(const SyntheticProblem& problem);
SyntheticProblem problem_from_json(const json& j);

json to_json(const SemiSyntheticTruth& truth);
SemiSyntheticTruth truth_from_json(const json& j);

json to_json(const StudyCell& cell);
json to_json(const StudyResult& result);

void write_json_file(const std::string& path, const json& j);
// Parse failures surface the byte offset nlohmann reports.
json read_json_file(const std::string& path);

void write_summary_csv(const std::string& path, const DoseGrid& grid,
                       const Eigen::VectorXd& mean,
                       const Eigen::VectorXd& variance);
void write_replications_csv(const std::string& path, const StudyResult& result);
void write_history_csv(const std::string& path,
                       const std::vector<SelectionRecord>& history);

}  // namespace dosegp
