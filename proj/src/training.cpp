#include "affect/training.hpp"

#include <charconv>
#include <cmath>
#include <string>

namespace affect {

std::vector<std::size_t> MiniBatch::anchor_states() const {
  std::vector<std::size_t> out;
  out.reserve(triplets.size());
  for (const auto& t : triplets) out.push_back(t.anchor_state);
  return out;
}

std::vector<std::size_t> MiniBatch::negative_states() const {
  std::vector<std::size_t> out;
  out.reserve(triplets.size());
  for (const auto& t : triplets) out.push_back(t.negative_state);
  return out;
}

MiniBatch gather_batch(const SignalDataset& data, std::vector<Triplet> triplets) {
  MiniBatch batch;
  const auto b = static_cast<Eigen::Index>(triplets.size());
  batch.signals.resize(3 * b, data.signals.cols());
  for (Eigen::Index j = 0; j < b; ++j) {
    const auto& t = triplets[static_cast<std::size_t>(j)];
    const std::size_t n = data.size();
    require(t.anchor < n && t.positive < n && t.negative < n, ErrorKind::invalid_argument,
            "triplet index outside the dataset");
    require(data.labels[t.anchor] == t.anchor_state &&
                data.labels[t.positive] == t.anchor_state &&
                data.labels[t.negative] == t.negative_state && t.anchor_state != t.negative_state,
            ErrorKind::invalid_argument, "triplet violates the anchor/positive/negative rule");
    batch.signals.row(j) = data.signals.row(static_cast<Eigen::Index>(t.anchor));
    batch.signals.row(b + j) = data.signals.row(static_cast<Eigen::Index>(t.positive));
    batch.signals.row(2 * b + j) = data.signals.row(static_cast<Eigen::Index>(t.negative));
  }
  batch.triplets = std::move(triplets);
  return batch;
}

namespace {

std::vector<std::vector<std::size_t>> members_by_state(const SignalDataset& data) {
  std::vector<std::vector<std::size_t>> members(data.state_count);
  for (std::size_t i = 0; i < data.size(); ++i) {
    require(data.labels[i] < data.state_count, ErrorKind::invalid_argument,
            "label outside [0, state_count)");
    members[data.labels[i]].push_back(i);
  }
  return members;
}

std::size_t uniform_index(std::size_t n, std::mt19937_64& engine) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine);
}

Triplet draw_with_anchor(const std::vector<std::vector<std::size_t>>& members,
                         const std::vector<std::size_t>& populated, std::size_t anchor_state,
                         std::mt19937_64& engine) {
  const auto& pool = members[anchor_state];
  require(pool.size() >= 2, ErrorKind::insufficient_data,
          "state " + std::to_string(anchor_state) + " has fewer than 2 samples");
  require(populated.size() >= 2, ErrorKind::insufficient_data,
          "need at least 2 populated states to form a negative");
  Triplet t;
  t.anchor_state = anchor_state;
  const std::size_t a = uniform_index(pool.size(), engine);
  std::size_t p = uniform_index(pool.size() - 1, engine);
  if (p >= a) ++p;
  t.anchor = pool[a];
  t.positive = pool[p];
  // Negative state uniform over the populated states other than the anchor's.
  std::size_t k = uniform_index(populated.size() - 1, engine);
  if (populated[k] == anchor_state) k = populated.size() - 1;
  t.negative_state = populated[k];
  const auto& neg_pool = members[t.negative_state];
  t.negative = neg_pool[uniform_index(neg_pool.size(), engine)];
  return t;
}

std::vector<std::size_t> nonempty_states(const std::vector<std::vector<std::size_t>>& members) {
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s < members.size(); ++s)
    if (!members[s].empty()) out.push_back(s);
  return out;
}

}  // namespace

TripletSampler::TripletSampler(const SignalDataset& data)
    : data_(&data), members_(members_by_state(data)), states_(nonempty_states(members_)) {
  require(states_.size() >= 2, ErrorKind::insufficient_data,
          "triplet sampling needs at least 2 populated states, found " +
              std::to_string(states_.size()));
  for (std::size_t s : states_)
    require(members_[s].size() >= 2, ErrorKind::insufficient_data,
            "state " + std::to_string(s) + " has fewer than 2 samples");
}

Triplet TripletSampler::draw(std::mt19937_64& engine) const {
  const std::size_t anchor_state = states_[uniform_index(states_.size(), engine)];
  return draw_with_anchor(members_, states_, anchor_state, engine);
}

MiniBatch TripletSampler::sample(std::size_t batch_size, std::mt19937_64& engine) const {
  require(batch_size >= 1, ErrorKind::invalid_argument, "batch size must be positive");
  std::vector<Triplet> triplets;
  triplets.reserve(batch_size);
  for (std::size_t j = 0; j < batch_size; ++j) triplets.push_back(draw(engine));
  return gather_batch(*data_, std::move(triplets));
}

Triplet sample_triplet_with_anchor(const SignalDataset& data, std::size_t anchor_state,
                                   std::mt19937_64& engine) {
  require(anchor_state < data.state_count, ErrorKind::invalid_argument,
          "anchor state out of range");
  const auto members = members_by_state(data);
  return draw_with_anchor(members, nonempty_states(members), anchor_state, engine);
}

MiniBatch sample_triplets(const SignalDataset& data, std::size_t batch_size, std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  return TripletSampler(data).sample(batch_size, engine);
}

double positive_loss(const Matrix& anchors, const Matrix& positives) {
  require(anchors.rows() >= 1 && anchors.rows() == positives.rows() &&
              anchors.cols() == positives.cols(),
          ErrorKind::invalid_argument, "anchor/positive shapes differ");
  return (anchors - positives).rowwise().squaredNorm().mean();
}

double negative_loss(const Matrix& anchors, const Matrix& negatives, const MarginMatrix& margins,
                     std::span<const std::size_t> anchor_states,
                     std::span<const std::size_t> negative_states) {
  const auto b = anchors.rows();
  require(b >= 1 && negatives.rows() == b && anchors.cols() == negatives.cols() &&
              static_cast<Eigen::Index>(anchor_states.size()) == b &&
              static_cast<Eigen::Index>(negative_states.size()) == b,
          ErrorKind::invalid_argument, "anchor/negative/label shapes differ");
  double sum = 0.0;
  for (Eigen::Index j = 0; j < b; ++j) {
    const auto sa = anchor_states[static_cast<std::size_t>(j)];
    const auto sn = negative_states[static_cast<std::size_t>(j)];
    require(sa < margins.size() && sn < margins.size(), ErrorKind::invalid_argument,
            "state label outside the margin matrix");
    const double gap = (anchors.row(j) - negatives.row(j)).norm() - margins(sa, sn);
    sum += gap * gap;
  }
  return sum / static_cast<double>(b);
}

void TrainConfig::validate() const {
  require(batch_size >= 1, ErrorKind::invalid_argument, "batch_size must be positive");
  require(lambda_p > 0.0 && lambda_n > 0.0, ErrorKind::invalid_argument,
          "lambda_p and lambda_n must be positive");
  require(learning_rate > 0.0 && std::isfinite(learning_rate), ErrorKind::invalid_argument,
          "learning_rate must be positive");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0,
          ErrorKind::invalid_argument, "adam betas must lie in [0, 1)");
  require(adam_epsilon > 0.0 && distance_epsilon > 0.0, ErrorKind::invalid_argument,
          "epsilons must be positive");
}

EmbeddingLossResult margin_loss(const Matrix& stacked_embeddings, const MiniBatch& batch,
                                const MarginMatrix& margins, const TrainConfig& config) {
  const auto b = static_cast<Eigen::Index>(batch.size());
  require(b >= 1 && stacked_embeddings.rows() == 3 * b, ErrorKind::invalid_argument,
          "embeddings do not match the batch");
  const auto p = stacked_embeddings.cols();
  const auto anchors = stacked_embeddings.topRows(b);
  const auto positives = stacked_embeddings.middleRows(b, b);
  const auto negatives = stacked_embeddings.bottomRows(b);

  EmbeddingLossResult out;
  out.gradient = Matrix::Zero(3 * b, p);
  const double inv_b = 1.0 / static_cast<double>(b);
  double lp = 0.0;
  double ln = 0.0;
  for (Eigen::Index j = 0; j < b; ++j) {
    const auto& t = batch.triplets[static_cast<std::size_t>(j)];
    require(t.anchor_state < margins.size() && t.negative_state < margins.size(),
            ErrorKind::invalid_argument, "state label outside the margin matrix");

    const Eigen::RowVectorXd ap = anchors.row(j) - positives.row(j);
    lp += ap.squaredNorm();
    const Eigen::RowVectorXd g_pos = (2.0 * inv_b * config.lambda_p) * ap;
    out.gradient.row(j) += g_pos;
    out.gradient.row(b + j) -= g_pos;

    const Eigen::RowVectorXd an = anchors.row(j) - negatives.row(j);
    const double dist = an.norm();
    const double gap = dist - margins(t.anchor_state, t.negative_state);
    ln += gap * gap;
    if (dist >= config.distance_epsilon) {
      const Eigen::RowVectorXd g_neg = (2.0 * inv_b * config.lambda_n * gap / dist) * an;
      out.gradient.row(j) += g_neg;
      out.gradient.row(2 * b + j) -= g_neg;
    }
  }
  out.terms.positive = lp / static_cast<double>(b);
  out.terms.negative = ln / static_cast<double>(b);
  out.terms.total = config.lambda_p * out.terms.positive + config.lambda_n * out.terms.negative;
  return out;
}

LossTerms total_loss(const MiniBatch& batch, const EmbeddingNetwork& net,
                     const MarginMatrix& margins, const TrainConfig& config) {
  return margin_loss(net.embed(batch.signals), batch, margins, config).terms;
}

LossGradient loss_gradient(const MiniBatch& batch, const EmbeddingNetwork& net,
                           const MarginMatrix& margins, const TrainConfig& config, Mode mode,
                           std::uint64_t step_seed) {
  const ForwardResult fwd = net.forward(batch.signals, mode, step_seed);
  EmbeddingLossResult loss = margin_loss(fwd.embeddings, batch, margins, config);
  return {loss.terms, net.backward(fwd.trace, loss.gradient)};
}

Optimizer::Optimizer(const TrainConfig& config, std::size_t parameter_count)
    : kind_(config.optimizer),
      learning_rate_(config.learning_rate),
      beta1_(config.beta1),
      beta2_(config.beta2),
      epsilon_(config.adam_epsilon),
      m_(Vector::Zero(static_cast<Eigen::Index>(parameter_count))),
      v_(Vector::Zero(static_cast<Eigen::Index>(parameter_count))) {}

void Optimizer::step(Vector& params, const Vector& gradient) {
  require(params.size() == m_.size() && gradient.size() == m_.size(),
          ErrorKind::invalid_argument, "optimizer state does not match parameter count");
  ++step_count_;
  if (kind_ == OptimizerKind::sgd) {
    params -= learning_rate_ * gradient;
    return;
  }
  m_ = beta1_ * m_ + (1.0 - beta1_) * gradient;
  v_ = beta2_ * v_ + (1.0 - beta2_) * gradient.cwiseProduct(gradient);
  const double t = static_cast<double>(step_count_);
  const double c1 = 1.0 - std::pow(beta1_, t);
  const double c2 = 1.0 - std::pow(beta2_, t);
  params.array() -=
      learning_rate_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + epsilon_);
}

namespace {

std::mt19937_64 sampling_engine(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    0x7472u};
  return std::mt19937_64(seq);
}

std::vector<EpochLoss> optimize(EmbeddingNetwork& net, const SignalDataset& data,
                                const MarginMatrix& margins, const TrainConfig& config) {
  std::vector<EpochLoss> curve;
  if (config.epochs == 0) return curve;
  const TripletSampler sampler(data);
  auto engine = sampling_engine(config.seed);
  Optimizer optimizer(config, net.parameter_count());
  const std::size_t steps_per_epoch = std::max<std::size_t>(1, data.size() / config.batch_size);
  Vector params = net.params();
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochLoss record{epoch, 0.0, 0.0, 0.0};
    for (std::size_t k = 0; k < steps_per_epoch; ++k, ++step) {
      const MiniBatch batch = sampler.sample(config.batch_size, engine);
      const std::uint64_t step_seed = (config.seed << 32) ^ step;
      const LossGradient lg = loss_gradient(batch, net, margins, config, Mode::train, step_seed);
      if (!std::isfinite(lg.terms.total) || !lg.gradient.allFinite())
        throw DivergedError(step, "training diverged at step " + std::to_string(step));
      optimizer.step(params, lg.gradient);
      if (!params.allFinite())
        throw DivergedError(step, "parameters became non-finite at step " + std::to_string(step));
      net.set_params(params);
      record.total += lg.terms.total;
      record.positive += lg.terms.positive;
      record.negative += lg.terms.negative;
    }
    const double inv = 1.0 / static_cast<double>(steps_per_epoch);
    record.total *= inv;
    record.positive *= inv;
    record.negative *= inv;
    curve.push_back(record);
  }
  return curve;
}

}  // namespace

TrainResult train(const SignalDataset& data, const ManifoldSpec& spec, const TrainConfig& config,
                  EmbeddingNetwork initial) {
  config.validate();
  require(data.state_count == spec.state_count(), ErrorKind::invalid_argument,
          "dataset has " + std::to_string(data.state_count) + " states, manifold '" +
              spec.name() + "' has " + std::to_string(spec.state_count()));
  data.validate();
  require(data.dim() == spec.input_dim() && initial.input_dim() == spec.input_dim() &&
              initial.output_dim() == spec.embedding_dim(),
          ErrorKind::invalid_argument, "dataset, network and manifold dimensions disagree");
  if (config.epochs > 0) TripletSampler check(data);

  std::vector<EpochLoss> curve = optimize(initial, data, spec.margins(), config);
  StateStatistics stats = compute_state_statistics(initial, data, spec.state_count());
  TrainResult result{TrainedManifold{spec, std::move(initial), std::move(stats.means),
                                     std::move(stats.covariances)},
                     std::move(curve)};
  return result;
}

TrainResult continue_train(const TrainedManifold& model, const SignalDataset& data,
                           const TrainConfig& config) {
  config.validate();
  model.validate();
  require(data.state_count <= model.spec.state_count(), ErrorKind::invalid_argument,
          "dataset declares states unknown to manifold '" + model.spec.name() + "'");
  require(static_cast<std::size_t>(data.signals.rows()) == data.size(),
          ErrorKind::consistency_error, "dataset signal/label count mismatch");
  for (std::size_t l : data.labels)
    require(l < model.spec.state_count(), ErrorKind::invalid_argument,
            "label " + std::to_string(l) + " is not a state of manifold '" + model.spec.name() +
                "'");
  require(data.dim() == model.spec.input_dim(), ErrorKind::invalid_argument,
          "dataset width does not match the manifold input");

  SignalDataset widened = data;
  widened.state_count = model.spec.state_count();

  EmbeddingNetwork net = model.network;
  std::vector<EpochLoss> curve = optimize(net, widened, model.spec.margins(), config);

  StateStatistics previous;
  previous.means = model.state_means;
  if (model.covariances) {
    previous.covariances = *model.covariances;
  } else {
    const auto p = static_cast<Eigen::Index>(model.spec.embedding_dim());
    previous.covariances.assign(model.spec.state_count(),
                                kCovarianceRidge * Matrix::Identity(p, p));
  }
  StateStatistics stats =
      compute_state_statistics(net, widened, model.spec.state_count(), &previous);
  return {TrainedManifold{model.spec, std::move(net), std::move(stats.means),
                          std::move(stats.covariances)},
          std::move(curve)};
}

std::string loss_curve_csv(const std::vector<EpochLoss>& curve) {
  auto fmt = [](double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
  };
  std::string out;
  for (const auto& e : curve) {
    out += "epoch," + std::to_string(e.epoch) + ',' + fmt(e.total) + ',' + fmt(e.positive) + ',' +
           fmt(e.negative) + '\n';
  }
  return out;
}

}  // namespace affect
