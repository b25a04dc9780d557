// JSON model files.
//
//   {
//     "loci": [ {"alleles": 2, "mutation": [0.5, 0.5], "h": [0.0, 0.0],
//                "mutation_matrix": [[0, 0.3], [0.7, 0]]}, ... ],
//     "couplings": [ {"i": 1, "j": 2, "J": [[1.0, 0.0], [0.0, 0.0]]}, ... ]
//   }
//
// Locus indices are 1-based. "mutation_matrix" is optional; when any locus
// carries one the model runs in parent-dependent mode and loci without one
// use u_{lk} = u_k.
#pragma once

#include "wfsim/model.hpp"

#include "json.hpp"

#include <filesystem>
#include <string>

namespace wfsim {

ModelSpec model_from_json(const nlohmann::json& document);
nlohmann::json model_to_json(const ModelSpec& spec);

ModelSpec parse_model(const std::string& text);
ModelSpec load_model(const std::filesystem::path& path);

}  // namespace wfsim
