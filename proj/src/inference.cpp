#include "affect/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace affect {

void TrainedManifold::validate() const {
  require(state_means.size() == spec.state_count(), ErrorKind::invalid_argument,
          "model has " + std::to_string(state_means.size()) + " state means for " +
              std::to_string(spec.state_count()) + " states");
  require(network.input_dim() == spec.input_dim() &&
              network.output_dim() == spec.embedding_dim(),
          ErrorKind::invalid_argument, "network dimensions do not match the manifold spec");
  for (const auto& m : state_means)
    require(static_cast<std::size_t>(m.size()) == spec.embedding_dim() && m.allFinite(),
            ErrorKind::invalid_argument, "state means must be finite p-vectors");
  if (covariances) {
    require(covariances->size() == spec.state_count(), ErrorKind::invalid_argument,
            "covariance count does not match state count");
    const auto p = static_cast<Eigen::Index>(spec.embedding_dim());
    for (const auto& c : *covariances)
      require(c.rows() == p && c.cols() == p && c.allFinite(), ErrorKind::invalid_argument,
              "covariances must be finite p x p matrices");
  }
}

StateStatistics compute_state_statistics(const EmbeddingNetwork& net, const SignalDataset& data,
                                         std::size_t state_count,
                                         const StateStatistics* fallback) {
  const Matrix emb = net.embed(data.signals);
  const auto p = emb.cols();
  StateStatistics stats;
  stats.means.assign(state_count, Vector::Zero(p));
  stats.covariances.assign(state_count, Matrix::Zero(p, p));
  std::vector<std::size_t> counts(state_count, 0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::size_t s = data.labels[i];
    require(s < state_count, ErrorKind::invalid_argument, "label outside the manifold's states");
    stats.means[s] += emb.row(static_cast<Eigen::Index>(i)).transpose();
    ++counts[s];
  }
  for (std::size_t s = 0; s < state_count; ++s) {
    if (counts[s] == 0) {
      require(fallback != nullptr, ErrorKind::insufficient_data,
              "state " + std::to_string(s) + " has no samples");
      stats.means[s] = fallback->means.at(s);
      stats.covariances[s] = fallback->covariances.at(s);
      continue;
    }
    stats.means[s] /= static_cast<double>(counts[s]);
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::size_t s = data.labels[i];
    const Vector diff = emb.row(static_cast<Eigen::Index>(i)).transpose() - stats.means[s];
    stats.covariances[s] += diff * diff.transpose();
  }
  for (std::size_t s = 0; s < state_count; ++s) {
    if (counts[s] == 0) continue;
    const double denom = counts[s] > 1 ? static_cast<double>(counts[s] - 1) : 1.0;
    stats.covariances[s] /= denom;
    stats.covariances[s] += kCovarianceRidge * Matrix::Identity(p, p);
  }
  return stats;
}

InferenceResult result_from_distances(std::vector<double> distances,
                                      const std::vector<std::string>& state_names,
                                      double temperature) {
  require(!distances.empty() && distances.size() == state_names.size(),
          ErrorKind::invalid_argument, "distance count must match the state count");
  require(temperature > 0.0, ErrorKind::invalid_argument, "temperature must be positive");
  InferenceResult result;
  std::size_t best = 0;
  for (std::size_t i = 1; i < distances.size(); ++i)
    if (distances[i] < distances[best]) best = i;
  result.state_id = best;
  result.state_name = state_names[best];

  // Softmin, shifted by the minimum for stability.
  result.confidence.resize(distances.size());
  double total = 0.0;
  for (std::size_t i = 0; i < distances.size(); ++i) {
    result.confidence[i] = std::exp(-(distances[i] - distances[best]) / temperature);
    total += result.confidence[i];
  }
  for (double& c : result.confidence) c /= total;
  result.distances = std::move(distances);
  return result;
}

namespace {

Vector embed_checked(const TrainedManifold& model, const Vector& x) {
  require(static_cast<std::size_t>(x.size()) == model.spec.input_dim(),
          ErrorKind::invalid_argument,
          "signal width " + std::to_string(x.size()) + " does not match manifold '" +
              model.spec.name() + "' input " + std::to_string(model.spec.input_dim()));
  return model.network.embed_one(x);
}

}  // namespace

InferenceResult infer_state(const TrainedManifold& model, const Vector& x, double temperature) {
  const Vector e = embed_checked(model, x);
  std::vector<double> distances;
  distances.reserve(model.state_means.size());
  for (const auto& mean : model.state_means) distances.push_back((e - mean).norm());
  return result_from_distances(std::move(distances), model.spec.state_names(), temperature);
}

InferenceResult infer_state_mahalanobis(const TrainedManifold& model, const Vector& x,
                                        double temperature) {
  require(model.covariances.has_value(), ErrorKind::unsupported_operation,
          "manifold '" + model.spec.name() + "' has no state covariances");
  const Vector e = embed_checked(model, x);
  std::vector<double> distances;
  for (std::size_t s = 0; s < model.state_means.size(); ++s) {
    const Vector diff = e - model.state_means[s];
    Eigen::LLT<Matrix> llt((*model.covariances)[s]);
    require(llt.info() == Eigen::Success, ErrorKind::invalid_argument,
            "covariance of state " + std::to_string(s) + " is not positive definite");
    const double q = diff.dot(llt.solve(diff));
    distances.push_back(std::sqrt(std::max(0.0, q)));
  }
  return result_from_distances(std::move(distances), model.spec.state_names(), temperature);
}

Mind::Mind(std::vector<MindMember> members) : members_(std::move(members)) {
  std::set<std::string> seen;
  for (const auto& m : members_) {
    require(seen.insert(m.model.spec.name()).second, ErrorKind::invalid_argument,
            "duplicate manifold name '" + m.model.spec.name() + "' in mind");
    if (m.slice)
      require(m.slice->length == m.model.spec.input_dim(), ErrorKind::invalid_argument,
              "input slice of manifold '" + m.model.spec.name() +
                  "' does not match its input dimension");
  }
}

std::vector<std::pair<std::string, InferenceResult>> mind_react(const Mind& mind,
                                                                const Vector& x,
                                                                double temperature) {
  for (const auto& m : mind.members()) {
    const auto& name = m.model.spec.name();
    if (m.slice) {
      require(m.slice->offset + m.slice->length <= static_cast<std::size_t>(x.size()),
              ErrorKind::invalid_argument,
              "signal too short for the input slice of manifold '" + name + "'");
    } else {
      require(static_cast<std::size_t>(x.size()) == m.model.spec.input_dim(),
              ErrorKind::invalid_argument,
              "signal width does not match manifold '" + name + "'");
    }
  }
  std::vector<std::pair<std::string, InferenceResult>> out;
  out.reserve(mind.size());
  for (const auto& m : mind.members()) {
    const Vector input =
        m.slice ? Vector(x.segment(static_cast<Eigen::Index>(m.slice->offset),
                                   static_cast<Eigen::Index>(m.slice->length)))
                : x;
    out.emplace_back(m.model.spec.name(), infer_state(m.model, input, temperature));
  }
  return out;
}

}  // namespace affect
