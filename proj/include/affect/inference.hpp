#pragma once

// Nearest-centroid state inference in a trained embedding space and the
// multi-manifold mind built on top of it.

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "affect/data_io.hpp"
#include "affect/manifold.hpp"
#include "affect/network.hpp"

namespace affect {

/// A learned manifold: the network plus the mean (and covariance) of each
/// state's training embeddings.
struct TrainedManifold {
  ManifoldSpec spec;
  EmbeddingNetwork network;
  std::vector<Vector> state_means;
  std::optional<std::vector<Matrix>> covariances;

  /// Means count matches the state count, means finite, network dims match `spec`.
  void validate() const;
};

struct StateStatistics {
  std::vector<Vector> means;
  std::vector<Matrix> covariances;  // sample covariance + 1e-6 I
};

inline constexpr double kCovarianceRidge = 1e-6;

/// Eval-mode embedding statistics per state. States without samples keep the
/// entry from `fallback` when given, otherwise the call throws
/// insufficient-data.
StateStatistics compute_state_statistics(const EmbeddingNetwork& net, const SignalDataset& data,
                                         std::size_t state_count,
                                         const StateStatistics* fallback = nullptr);

struct InferenceResult {
  std::size_t state_id = 0;
  std::string state_name;
  std::vector<double> distances;
  std::vector<double> confidence;
};

/// argmin with ties to the lowest id; confidence is softmin(distances / tau).
InferenceResult result_from_distances(std::vector<double> distances,
                                      const std::vector<std::string>& state_names,
                                      double temperature = 1.0);

InferenceResult infer_state(const TrainedManifold& model, const Vector& x,
                            double temperature = 1.0);

/// Same decision rule with per-state Mahalanobis distances. Throws
/// unsupported-operation when the model carries no covariances.
InferenceResult infer_state_mahalanobis(const TrainedManifold& model, const Vector& x,
                                        double temperature = 1.0);

/// Portion of the sensed signal routed to one manifold.
struct InputSlice {
  std::size_t offset = 0;
  std::size_t length = 0;
};

struct MindMember {
  TrainedManifold model;
  std::optional<InputSlice> slice;  // whole signal when absent
};

class Mind {
public:
  Mind() = default;
  explicit Mind(std::vector<MindMember> members);

  const std::vector<MindMember>& members() const noexcept { return members_; }
  std::size_t size() const noexcept { return members_.size(); }

private:
  std::vector<MindMember> members_;
};

/// One inference per manifold, in mind order.
std::vector<std::pair<std::string, InferenceResult>> mind_react(const Mind& mind,
                                                                const Vector& x,
                                                                double temperature = 1.0);

}  // namespace affect
