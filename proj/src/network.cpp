#include "affect/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace affect {

namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::mt19937_64 make_engine(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                    static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

std::size_t LayerSpec::parameter_count() const {
  switch (kind) {
    case LayerKind::dense: return in_width * out_width + out_width;
    case LayerKind::prelu: return channels;
    case LayerKind::dropout: return 0;
  }
  return 0;
}

std::vector<LayerSpec> make_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                                std::size_t output_dim, double dropout_rate) {
  std::vector<LayerSpec> layers;
  std::size_t width = input_dim;
  for (std::size_t h : hidden) {
    layers.push_back(LayerSpec::dense(width, h));
    layers.push_back(LayerSpec::prelu(h));
    if (dropout_rate > 0.0) layers.push_back(LayerSpec::dropout(dropout_rate));
    width = h;
  }
  layers.push_back(LayerSpec::dense(width, output_dim));
  return layers;
}

EmbeddingNetwork::EmbeddingNetwork(std::vector<LayerSpec> layers, Vector params,
                                   std::uint64_t seed)
    : layers_(std::move(layers)), seed_(seed) {
  require(!layers_.empty(), ErrorKind::invalid_argument, "network has no layers");
  require(layers_.front().kind == LayerKind::dense, ErrorKind::invalid_argument,
          "first layer must be dense");
  std::size_t width = 0;
  std::size_t offset = 0;
  bool seen_dense = false;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& layer = layers_[i];
    const std::string where = "layer " + std::to_string(i) + ": ";
    switch (layer.kind) {
      case LayerKind::dense:
        require(layer.in_width > 0 && layer.out_width > 0, ErrorKind::invalid_argument,
                where + "dense widths must be positive");
        require(!seen_dense || layer.in_width == width, ErrorKind::invalid_argument,
                where + "dense in_width " + std::to_string(layer.in_width) +
                    " does not match previous width " + std::to_string(width));
        if (!seen_dense) input_dim_ = layer.in_width;
        width = layer.out_width;
        seen_dense = true;
        break;
      case LayerKind::prelu:
        require(layer.channels == width, ErrorKind::invalid_argument,
                where + "prelu channel count must equal the incoming width");
        break;
      case LayerKind::dropout:
        require(layer.rate >= 0.0 && layer.rate < 1.0, ErrorKind::invalid_argument,
                where + "dropout rate must lie in [0, 1)");
        break;
    }
    offsets_.push_back(offset);
    offset += layer.parameter_count();
  }
  output_dim_ = width;
  set_params(std::move(params));
}

void EmbeddingNetwork::set_params(Vector params) {
  std::size_t expected = 0;
  for (const auto& l : layers_) expected += l.parameter_count();
  require(static_cast<std::size_t>(params.size()) == expected, ErrorKind::invalid_argument,
          "expected " + std::to_string(expected) + " parameters, got " +
              std::to_string(params.size()));
  require(params.allFinite(), ErrorKind::invalid_argument, "parameters must be finite");
  params_ = std::move(params);
}

ForwardResult EmbeddingNetwork::forward(const Matrix& batch, Mode mode,
                                        std::uint64_t step_seed) const {
  require(static_cast<std::size_t>(batch.cols()) == input_dim_, ErrorKind::invalid_argument,
          "input width " + std::to_string(batch.cols()) + " does not match network input " +
              std::to_string(input_dim_));
  require(batch.allFinite(), ErrorKind::invalid_argument, "input contains non-finite values");

  ForwardResult result;
  result.trace.layers.resize(layers_.size());
  Matrix x = batch;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& layer = layers_[i];
    auto& record = result.trace.layers[i];
    record.input = x;
    const double* p = params_.data() + offsets_[i];
    switch (layer.kind) {
      case LayerKind::dense: {
        const auto in = static_cast<Eigen::Index>(layer.in_width);
        const auto out = static_cast<Eigen::Index>(layer.out_width);
        Eigen::Map<const RowMajorMatrix> w(p, in, out);
        Eigen::Map<const Vector> b(p + in * out, out);
        Matrix y = x * w;
        y.rowwise() += b.transpose();
        x = std::move(y);
        break;
      }
      case LayerKind::prelu: {
        Eigen::Map<const Vector> slope(p, static_cast<Eigen::Index>(layer.channels));
        for (Eigen::Index c = 0; c < x.cols(); ++c)
          for (Eigen::Index r = 0; r < x.rows(); ++r)
            if (x(r, c) <= 0.0) x(r, c) *= slope(c);
        break;
      }
      case LayerKind::dropout: {
        if (mode == Mode::train && layer.rate > 0.0) {
          auto engine = make_engine(seed_, step_seed, i);
          std::bernoulli_distribution keep(1.0 - layer.rate);
          const double scale = 1.0 / (1.0 - layer.rate);
          record.mask.resize(x.rows(), x.cols());
          for (Eigen::Index r = 0; r < x.rows(); ++r)
            for (Eigen::Index c = 0; c < x.cols(); ++c)
              record.mask(r, c) = keep(engine) ? scale : 0.0;
          x = x.cwiseProduct(record.mask);
        }
        break;
      }
    }
  }
  result.trace.output = x;
  result.embeddings = std::move(x);
  return result;
}

Matrix EmbeddingNetwork::embed(const Matrix& batch) const {
  return forward(batch, Mode::eval).embeddings;
}

Vector EmbeddingNetwork::embed_one(const Vector& x) const {
  return embed(x.transpose()).row(0).transpose();
}

Vector EmbeddingNetwork::backward(const ForwardTrace& trace, const Matrix& output_gradient) const {
  require(trace.layers.size() == layers_.size(), ErrorKind::invalid_argument,
          "trace does not belong to this network");
  require(output_gradient.rows() == trace.output.rows() &&
              output_gradient.cols() == trace.output.cols(),
          ErrorKind::invalid_argument, "output gradient shape does not match the trace");

  Vector grad = Vector::Zero(params_.size());
  Matrix g = output_gradient;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const auto& layer = layers_[i];
    const Matrix& x = trace.layers[i].input;
    const double* p = params_.data() + offsets_[i];
    double* gp = grad.data() + offsets_[i];
    switch (layer.kind) {
      case LayerKind::dense: {
        const auto in = static_cast<Eigen::Index>(layer.in_width);
        const auto out = static_cast<Eigen::Index>(layer.out_width);
        require(x.cols() == in, ErrorKind::invalid_argument, "trace does not match network");
        Eigen::Map<const RowMajorMatrix> w(p, in, out);
        Eigen::Map<RowMajorMatrix>(gp, in, out) = x.transpose() * g;
        Eigen::Map<Vector>(gp + in * out, out) = g.colwise().sum().transpose();
        g = (g * w.transpose()).eval();
        break;
      }
      case LayerKind::prelu: {
        Eigen::Map<const Vector> slope(p, static_cast<Eigen::Index>(layer.channels));
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
          double ds = 0.0;
          for (Eigen::Index r = 0; r < x.rows(); ++r) {
            if (x(r, c) <= 0.0) {
              ds += g(r, c) * x(r, c);
              g(r, c) *= slope(c);
            }
          }
          gp[c] = ds;
        }
        break;
      }
      case LayerKind::dropout:
        if (trace.layers[i].mask.size() != 0) g = g.cwiseProduct(trace.layers[i].mask);
        break;
    }
  }
  return grad;
}

EmbeddingNetwork init_network(std::vector<LayerSpec> layers, std::uint64_t seed) {
  std::size_t total = 0;
  for (const auto& l : layers) total += l.parameter_count();
  Vector params = Vector::Zero(static_cast<Eigen::Index>(total));
  std::mt19937_64 engine(seed);
  std::size_t offset = 0;
  for (const auto& l : layers) {
    if (l.kind == LayerKind::dense) {
      std::normal_distribution<double> gauss(
          0.0, std::sqrt(2.0 / static_cast<double>(std::max<std::size_t>(l.in_width, 1))));
      for (std::size_t k = 0; k < l.in_width * l.out_width; ++k)
        params(static_cast<Eigen::Index>(offset + k)) = gauss(engine);
    } else if (l.kind == LayerKind::prelu) {
      params.segment(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(l.channels))
          .setConstant(0.25);
    }
    offset += l.parameter_count();
  }
  return EmbeddingNetwork(std::move(layers), std::move(params), seed);
}

namespace {

// Sign pattern of every PReLU input; a finite difference that flips any entry
// crossed a kink.
std::vector<bool> kink_pattern(const EmbeddingNetwork& net, const ForwardTrace& trace) {
  std::vector<bool> out;
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    if (net.layers()[i].kind != LayerKind::prelu) continue;
    const Matrix& x = trace.layers[i].input;
    for (Eigen::Index k = 0; k < x.size(); ++k) out.push_back(x.data()[k] > 0.0);
  }
  return out;
}

}  // namespace

GradientCheckReport gradient_check(const EmbeddingNetwork& net, const Matrix& batch,
                                   const LossClosure& loss, double step, double scale_floor) {
  const ForwardResult base = net.forward(batch, Mode::eval);
  const Vector analytic = net.backward(base.trace, loss(base.embeddings).gradient);
  const auto base_pattern = kink_pattern(net, base.trace);
  const double floor =
      std::max(scale_floor, 1e-3 * (analytic.size() ? analytic.cwiseAbs().maxCoeff() : 0.0));

  GradientCheckReport report;
  EmbeddingNetwork probe = net;
  Vector params = net.params();
  for (Eigen::Index k = 0; k < params.size(); ++k) {
    const double original = params(k);
    params(k) = original + step;
    probe.set_params(params);
    const ForwardResult plus = probe.forward(batch, Mode::eval);
    params(k) = original - step;
    probe.set_params(params);
    const ForwardResult minus = probe.forward(batch, Mode::eval);
    params(k) = original;

    if (kink_pattern(net, plus.trace) != base_pattern ||
        kink_pattern(net, minus.trace) != base_pattern) {
      ++report.skipped;
      continue;
    }
    const double numeric =
        (loss(plus.embeddings).value - loss(minus.embeddings).value) / (2.0 * step);
    const double a = analytic(k);
    const double denom = std::max({std::abs(a), std::abs(numeric), floor});
    report.max_rel_error = std::max(report.max_rel_error, std::abs(a - numeric) / denom);
    ++report.checked;
  }
  return report;
}

}  // namespace affect
