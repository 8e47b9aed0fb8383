#pragma once

#include <filesystem>

#include <json.hpp>

#include "juice/model.hpp"

namespace juice {

// JSON snapshot of a ProblemInstance. Complex matrices are stored as
//   {"rows": r, "cols": c, "data": [re, im, re, im, ...]}   (column major)
// Top-level keys: format, seed, noise_var, users, clusters, activity_kind,
// gamma, pilots, channels, received, precisions, covariances, powers,
// prior_guess.

nlohmann::json matrix_to_json(const CMatrix& m);
CMatrix matrix_from_json(const nlohmann::json& j);

nlohmann::json instance_to_json(const ProblemInstance& instance);
ProblemInstance instance_from_json(const nlohmann::json& j);

void save_instance(const ProblemInstance& instance, const std::filesystem::path& path);
ProblemInstance load_instance(const std::filesystem::path& path);

} // namespace juice
