#pragma once

// Triplet sampling, the margin loss and its gradient, optimizers and the
// training loop.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "affect/data_io.hpp"
#include "affect/inference.hpp"
#include "affect/manifold.hpp"
#include "affect/network.hpp"

namespace affect {

/// Indices into a SignalDataset. Anchor and positive share `anchor_state`;
/// the negative comes from `negative_state` != anchor_state.
struct Triplet {
  std::size_t anchor = 0;
  std::size_t positive = 0;
  std::size_t negative = 0;
  std::size_t anchor_state = 0;
  std::size_t negative_state = 0;
};

/// b triplets plus their signals stacked as [anchors; positives; negatives]
/// (3b x d), which is how the shared network consumes them.
struct MiniBatch {
  std::vector<Triplet> triplets;
  Matrix signals;

  std::size_t size() const noexcept { return triplets.size(); }
  std::vector<std::size_t> anchor_states() const;
  std::vector<std::size_t> negative_states() const;
};

MiniBatch gather_batch(const SignalDataset& data, std::vector<Triplet> triplets);

/// Uniform triplet sampler over the populated states of a dataset.
class TripletSampler {
public:
  /// Needs at least two populated states, each with at least two samples.
  explicit TripletSampler(const SignalDataset& data);

  Triplet draw(std::mt19937_64& engine) const;
  MiniBatch sample(std::size_t batch_size, std::mt19937_64& engine) const;

  const std::vector<std::size_t>& populated_states() const noexcept { return states_; }

private:
  const SignalDataset* data_;
  std::vector<std::vector<std::size_t>> members_;
  std::vector<std::size_t> states_;
};

/// One triplet whose anchor comes from `anchor_state`. Only that state needs
/// two samples; the negative state is uniform over the other populated states.
Triplet sample_triplet_with_anchor(const SignalDataset& data, std::size_t anchor_state,
                                   std::mt19937_64& engine);

MiniBatch sample_triplets(const SignalDataset& data, std::size_t batch_size, std::uint64_t seed);

/// Mean squared anchor-positive distance.
double positive_loss(const Matrix& anchors, const Matrix& positives);

/// Mean squared gap between anchor-negative distance and the prescribed margin.
double negative_loss(const Matrix& anchors, const Matrix& negatives, const MarginMatrix& margins,
                     std::span<const std::size_t> anchor_states,
                     std::span<const std::size_t> negative_states);

enum class OptimizerKind { sgd, adam };

struct TrainConfig {
  std::size_t batch_size = 32;
  double lambda_p = 1.0;
  double lambda_n = 1.0;
  std::size_t epochs = 10;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;
  double distance_epsilon = 1e-12;

  void validate() const;
};

struct LossTerms {
  double total = 0.0;
  double positive = 0.0;
  double negative = 0.0;
};

struct EmbeddingLossResult {
  LossTerms terms;
  Matrix gradient;  // d total / d stacked embeddings, 3b x p
};

/// Loss terms and their gradient with respect to the stacked batch embeddings.
EmbeddingLossResult margin_loss(const Matrix& stacked_embeddings, const MiniBatch& batch,
                                const MarginMatrix& margins, const TrainConfig& config);

/// lambda_p * Lp + lambda_n * Ln with the network in eval mode.
LossTerms total_loss(const MiniBatch& batch, const EmbeddingNetwork& net,
                     const MarginMatrix& margins, const TrainConfig& config);

struct LossGradient {
  LossTerms terms;
  Vector gradient;
};

/// Gradients of all three triplet roles accumulate into the shared parameters.
LossGradient loss_gradient(const MiniBatch& batch, const EmbeddingNetwork& net,
                           const MarginMatrix& margins, const TrainConfig& config,
                           Mode mode = Mode::eval, std::uint64_t step_seed = 0);

class Optimizer {
public:
  Optimizer(const TrainConfig& config, std::size_t parameter_count);

  void step(Vector& params, const Vector& gradient);

  std::size_t steps() const noexcept { return step_count_; }
  const Vector& first_moment() const noexcept { return m_; }
  const Vector& second_moment() const noexcept { return v_; }

private:
  OptimizerKind kind_;
  double learning_rate_;
  double beta1_;
  double beta2_;
  double epsilon_;
  Vector m_;
  Vector v_;
  std::size_t step_count_ = 0;
};

struct EpochLoss {
  std::size_t epoch = 0;  // 1-based
  double total = 0.0;
  double positive = 0.0;
  double negative = 0.0;
};

struct TrainResult {
  TrainedManifold model;
  std::vector<EpochLoss> curve;
};

/// Runs epochs * max(1, n / b) steps of sample, forward (train mode),
/// gradient and optimizer update, then computes state statistics in eval
/// mode over `data`.
TrainResult train(const SignalDataset& data, const ManifoldSpec& spec, const TrainConfig& config,
                  EmbeddingNetwork initial);

/// Resumes from the model's parameters with a fresh optimizer. States absent
/// from `data` keep their previous statistics.
TrainResult continue_train(const TrainedManifold& model, const SignalDataset& data,
                           const TrainConfig& config);

/// "epoch,k,total_loss,Lp,Ln" lines.
std::string loss_curve_csv(const std::vector<EpochLoss>& curve);

}  // namespace affect
