#pragma once

// Dense/PReLU/dropout embedding network with hand-derived gradients.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "affect/error.hpp"

namespace affect {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class LayerKind { dense, prelu, dropout };

struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::size_t in_width = 0;   // dense
  std::size_t out_width = 0;  // dense
  std::size_t channels = 0;   // prelu
  double rate = 0.0;          // dropout

  static LayerSpec dense(std::size_t in, std::size_t out) {
    return {LayerKind::dense, in, out, 0, 0.0};
  }
  static LayerSpec prelu(std::size_t channels) { return {LayerKind::prelu, 0, 0, channels, 0.0}; }
  static LayerSpec dropout(double rate) { return {LayerKind::dropout, 0, 0, 0, rate}; }

  std::size_t parameter_count() const;
  bool operator==(const LayerSpec&) const = default;
};

/// dense(d, h1), prelu, dropout, ..., dense(h_k, p). Dropout is omitted when
/// `dropout_rate` is zero.
std::vector<LayerSpec> make_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                                std::size_t output_dim, double dropout_rate);

enum class Mode { train, eval };

struct LayerTrace {
  Matrix input;  // n x width entering the layer
  Matrix mask;   // dropout only: keep mask already scaled by 1 / (1 - rate)
};

struct ForwardTrace {
  std::vector<LayerTrace> layers;
  Matrix output;
};

struct ForwardResult {
  Matrix embeddings;
  ForwardTrace trace;
};

/// Parameters are stored flat, layer-major: dense weights row-major
/// (in_width x out_width, output = W^T x + b), then dense biases, then PReLU
/// slopes.
class EmbeddingNetwork {
public:
  EmbeddingNetwork(std::vector<LayerSpec> layers, Vector params, std::uint64_t seed);

  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  const Vector& params() const noexcept { return params_; }
  void set_params(Vector params);
  std::uint64_t seed() const noexcept { return seed_; }

  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t output_dim() const noexcept { return output_dim_; }
  std::size_t parameter_count() const noexcept { return static_cast<std::size_t>(params_.size()); }
  /// Offset of each layer's parameters in the flat vector.
  const std::vector<std::size_t>& offsets() const noexcept { return offsets_; }

  /// Rows of `batch` are samples. Train mode samples dropout masks from
  /// (seed, step_seed); eval mode is deterministic and ignores dropout.
  ForwardResult forward(const Matrix& batch, Mode mode, std::uint64_t step_seed = 0) const;
  Matrix embed(const Matrix& batch) const;
  Vector embed_one(const Vector& x) const;

  /// Gradient of sum(output_gradient .* output) with respect to params.
  Vector backward(const ForwardTrace& trace, const Matrix& output_gradient) const;

private:
  std::vector<LayerSpec> layers_;
  Vector params_;
  std::uint64_t seed_;
  std::vector<std::size_t> offsets_;
  std::size_t input_dim_ = 0;
  std::size_t output_dim_ = 0;
};

/// He-normal dense weights (std sqrt(2 / in_width)), zero biases, PReLU
/// slopes 0.25. Deterministic in `seed`.
EmbeddingNetwork init_network(std::vector<LayerSpec> layers, std::uint64_t seed);

struct EmbeddingLoss {
  double value = 0.0;
  Matrix gradient;  // d value / d embeddings
};

using LossClosure = std::function<EmbeddingLoss(const Matrix& embeddings)>;

struct GradientCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  /// Parameters whose central difference straddled a PReLU kink.
  std::size_t skipped = 0;
};

/// Compares the backpropagated gradient of loss(f(batch)) against central
/// differences. The network runs in eval mode, which disables dropout.
/// Relative error is |a - n| / max(|a|, |n|, floor) with
/// floor = max(scale_floor, 1e-3 * max_k |a_k|), so entries that are zero up to
/// round-off are judged on the scale of the whole gradient.
GradientCheckReport gradient_check(const EmbeddingNetwork& net, const Matrix& batch,
                                   const LossClosure& loss, double step = 1e-5,
                                   double scale_floor = 1e-4);

}  // namespace affect
