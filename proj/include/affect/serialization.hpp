#pragma once

// JSON documents for specs, networks, trained models and reports.

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "affect/evaluation.hpp"
#include "affect/inference.hpp"
#include "affect/manifold.hpp"
#include "affect/network.hpp"
#include "affect/training.hpp"

namespace affect {

using Json = nlohmann::ordered_json;

Json margins_to_json(const MarginMatrix& margins);
MarginMatrix margins_from_json(const Json& j);

/// {name, states: [names in id order], margins: [[...]], embedding_dim, input_dim}
Json to_json(const ManifoldSpec& spec);
ManifoldSpec manifold_spec_from_json(const Json& j);

/// {manifolds: [spec, ...]}
Json to_json(const MindSpec& mind);
MindSpec mind_spec_from_json(const Json& j);

/// {layers: [...], seed, params: [flat order]}
Json to_json(const EmbeddingNetwork& net);
EmbeddingNetwork network_from_json(const Json& j);

/// Network document plus {spec, state_means, covariances?}.
Json to_json(const TrainedManifold& model);
TrainedManifold trained_manifold_from_json(const Json& j);

/// {manifold, state, state_id, distances, confidence}
Json inference_to_json(const std::string& manifold, const InferenceResult& result);
/// Object keyed by manifold name, in mind order.
Json reaction_to_json(const std::vector<std::pair<std::string, InferenceResult>>& reaction);

Json to_json(const EvalReport& report);
Json to_json(const EmbeddabilityReport& report);

/// Every field optional; missing ones keep TrainConfig defaults.
TrainConfig train_config_from_json(const Json& j);
Json to_json(const TrainConfig& config);

/// Parse with format-error on malformed text.
Json parse_json(const std::string& text, const std::string& what);

}  // namespace affect
