#pragma once

// Margin-reproduction metrics and embedding scatter plots.

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "affect/data_io.hpp"
#include "affect/inference.hpp"
#include "affect/manifold.hpp"

namespace affect {

struct EvalReport {
  Matrix realized_margins;               // distances between per-state embedding means
  double margin_stress = 0.0;            // normalized, see evaluate_embeddings
  std::vector<double> intra_state_spread;  // mean distance to the state's own mean
  double accuracy = 0.0;                 // nearest-centroid accuracy against the model means

  double mean_spread() const;
};

/// Metrics from precomputed embeddings:
///   stress = sqrt(sum_{i<j} (realized_ij - m_ij)^2 / sum_{i<j} m_ij^2)
/// Accuracy classifies each embedding by its nearest entry of `state_means`.
EvalReport evaluate_embeddings(const Matrix& embeddings, std::span<const std::size_t> labels,
                               const std::vector<Vector>& state_means,
                               const MarginMatrix& margins);

/// Embeds the test set in eval mode and scores it. Every state must appear.
EvalReport evaluate(const TrainedManifold& model, const SignalDataset& test);

/// Standalone SVG scatter: one circle per sample coloured by state, a legend,
/// equal axis scaling and a cross at each state's mean. Requires p == 2.
std::string render_scatter_svg(const Matrix& embeddings, std::span<const std::size_t> labels,
                               const std::vector<std::string>& state_names);

void write_scatter_svg(const std::filesystem::path& path, const Matrix& embeddings,
                       std::span<const std::size_t> labels,
                       const std::vector<std::string>& state_names);

}  // namespace affect
