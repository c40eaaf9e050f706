#include "affect/serialization.hpp"

namespace affect {

namespace {

template <typename T>
T get_field(const Json& j, const char* key, const std::string& context) {
  require(j.is_object() && j.contains(key), ErrorKind::format_error,
          context + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format_error, context + ": field '" + key + "' has the wrong type");
  }
}

Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Vector vector_from_json(const Json& j, const std::string& context) {
  require(j.is_array(), ErrorKind::format_error, context + ": expected an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    require(j[i].is_number(), ErrorKind::format_error, context + ": expected numbers");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

Json matrix_to_json(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(vector_to_json(m.row(r).transpose()));
  return out;
}

Matrix matrix_from_json(const Json& j, const std::string& context) {
  require(j.is_array(), ErrorKind::format_error, context + ": expected an array of rows");
  if (j.empty()) return Matrix();
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j[0].size()));
  for (std::size_t r = 0; r < j.size(); ++r) {
    const Vector row = vector_from_json(j[r], context);
    require(row.size() == m.cols(), ErrorKind::format_error, context + ": ragged matrix");
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

}  // namespace

Json margins_to_json(const MarginMatrix& margins) { return matrix_to_json(margins.entries()); }

MarginMatrix margins_from_json(const Json& j) {
  return MarginMatrix(matrix_from_json(j, "margins"));
}

Json to_json(const ManifoldSpec& spec) {
  Json j;
  j["name"] = spec.name();
  j["states"] = spec.state_names();
  j["margins"] = margins_to_json(spec.margins());
  j["embedding_dim"] = spec.embedding_dim();
  j["input_dim"] = spec.input_dim();
  return j;
}

ManifoldSpec manifold_spec_from_json(const Json& j) {
  const std::string ctx = "manifold spec";
  require(j.is_object() && j.contains("margins"), ErrorKind::format_error,
          ctx + ": missing field 'margins'");
  return ManifoldSpec(get_field<std::string>(j, "name", ctx),
                      get_field<std::vector<std::string>>(j, "states", ctx),
                      margins_from_json(j.at("margins")),
                      get_field<std::size_t>(j, "embedding_dim", ctx),
                      get_field<std::size_t>(j, "input_dim", ctx));
}

Json to_json(const MindSpec& mind) {
  Json list = Json::array();
  for (const auto& m : mind.manifolds()) list.push_back(to_json(m));
  return Json{{"manifolds", list}};
}

MindSpec mind_spec_from_json(const Json& j) {
  require(j.is_object() && j.contains("manifolds") && j.at("manifolds").is_array(),
          ErrorKind::format_error, "mind spec: missing 'manifolds' array");
  std::vector<ManifoldSpec> manifolds;
  for (const auto& m : j.at("manifolds")) manifolds.push_back(manifold_spec_from_json(m));
  return MindSpec(std::move(manifolds));
}

Json to_json(const EmbeddingNetwork& net) {
  Json layers = Json::array();
  for (const auto& l : net.layers()) {
    switch (l.kind) {
      case LayerKind::dense:
        layers.push_back({{"kind", "dense"}, {"in", l.in_width}, {"out", l.out_width}});
        break;
      case LayerKind::prelu:
        layers.push_back({{"kind", "prelu"}, {"channels", l.channels}});
        break;
      case LayerKind::dropout:
        layers.push_back({{"kind", "dropout"}, {"rate", l.rate}});
        break;
    }
  }
  Json j;
  j["layers"] = layers;
  j["seed"] = net.seed();
  j["params"] = vector_to_json(net.params());
  return j;
}

EmbeddingNetwork network_from_json(const Json& j) {
  const std::string ctx = "network";
  require(j.is_object() && j.contains("layers") && j.at("layers").is_array(),
          ErrorKind::format_error, ctx + ": missing 'layers' array");
  std::vector<LayerSpec> layers;
  for (const auto& l : j.at("layers")) {
    const auto kind = get_field<std::string>(l, "kind", ctx);
    if (kind == "dense") {
      layers.push_back(LayerSpec::dense(get_field<std::size_t>(l, "in", ctx),
                                        get_field<std::size_t>(l, "out", ctx)));
    } else if (kind == "prelu") {
      layers.push_back(LayerSpec::prelu(get_field<std::size_t>(l, "channels", ctx)));
    } else if (kind == "dropout") {
      layers.push_back(LayerSpec::dropout(get_field<double>(l, "rate", ctx)));
    } else {
      fail(ErrorKind::format_error, ctx + ": unknown layer kind '" + kind + "'");
    }
  }
  require(j.contains("params"), ErrorKind::format_error, ctx + ": missing 'params'");
  return EmbeddingNetwork(std::move(layers), vector_from_json(j.at("params"), ctx),
                          get_field<std::uint64_t>(j, "seed", ctx));
}

Json to_json(const TrainedManifold& model) {
  Json j = to_json(model.network);
  j["spec"] = to_json(model.spec);
  Json means = Json::array();
  for (const auto& m : model.state_means) means.push_back(vector_to_json(m));
  j["state_means"] = means;
  if (model.covariances) {
    Json covs = Json::array();
    for (const auto& c : *model.covariances) covs.push_back(matrix_to_json(c));
    j["covariances"] = covs;
  }
  return j;
}

TrainedManifold trained_manifold_from_json(const Json& j) {
  require(j.is_object() && j.contains("spec") && j.contains("state_means"),
          ErrorKind::format_error, "model: missing 'spec' or 'state_means'");
  TrainedManifold model{manifold_spec_from_json(j.at("spec")), network_from_json(j), {}, {}};
  require(j.at("state_means").is_array(), ErrorKind::format_error,
          "model: 'state_means' must be an array");
  for (const auto& m : j.at("state_means"))
    model.state_means.push_back(vector_from_json(m, "state_means"));
  if (j.contains("covariances")) {
    std::vector<Matrix> covs;
    for (const auto& c : j.at("covariances")) covs.push_back(matrix_from_json(c, "covariances"));
    model.covariances = std::move(covs);
  }
  model.validate();
  return model;
}

Json inference_to_json(const std::string& manifold, const InferenceResult& result) {
  Json j;
  j["manifold"] = manifold;
  j["state"] = result.state_name;
  j["state_id"] = result.state_id;
  j["distances"] = result.distances;
  j["confidence"] = result.confidence;
  return j;
}

Json reaction_to_json(const std::vector<std::pair<std::string, InferenceResult>>& reaction) {
  Json j = Json::object();
  for (const auto& [name, result] : reaction) j[name] = inference_to_json(name, result);
  return j;
}

Json to_json(const EvalReport& report) {
  Json j;
  j["realized_margins"] = matrix_to_json(report.realized_margins);
  j["margin_stress"] = report.margin_stress;
  j["intra_state_spread"] = report.intra_state_spread;
  j["mean_intra_state_spread"] = report.mean_spread();
  j["accuracy"] = report.accuracy;
  return j;
}

Json to_json(const EmbeddabilityReport& report) {
  Json j;
  j["embeddable"] = report.embeddable;
  j["eigenvalues"] = report.eigenvalues;
  j["tolerance"] = report.tolerance;
  return j;
}

TrainConfig train_config_from_json(const Json& j) {
  TrainConfig c;
  if (j.is_null()) return c;
  require(j.is_object(), ErrorKind::format_error, "train config must be an object");
  const std::string ctx = "train config";
  if (j.contains("batch_size")) c.batch_size = get_field<std::size_t>(j, "batch_size", ctx);
  if (j.contains("lambda_p")) c.lambda_p = get_field<double>(j, "lambda_p", ctx);
  if (j.contains("lambda_n")) c.lambda_n = get_field<double>(j, "lambda_n", ctx);
  if (j.contains("epochs")) c.epochs = get_field<std::size_t>(j, "epochs", ctx);
  if (j.contains("learning_rate")) c.learning_rate = get_field<double>(j, "learning_rate", ctx);
  if (j.contains("optimizer")) {
    const auto name = get_field<std::string>(j, "optimizer", ctx);
    require(name == "adam" || name == "sgd", ErrorKind::format_error,
            ctx + ": optimizer must be 'adam' or 'sgd'");
    c.optimizer = name == "adam" ? OptimizerKind::adam : OptimizerKind::sgd;
  }
  if (j.contains("beta1")) c.beta1 = get_field<double>(j, "beta1", ctx);
  if (j.contains("beta2")) c.beta2 = get_field<double>(j, "beta2", ctx);
  if (j.contains("adam_epsilon")) c.adam_epsilon = get_field<double>(j, "adam_epsilon", ctx);
  if (j.contains("seed")) c.seed = get_field<std::uint64_t>(j, "seed", ctx);
  if (j.contains("distance_epsilon"))
    c.distance_epsilon = get_field<double>(j, "distance_epsilon", ctx);
  c.validate();
  return c;
}

Json to_json(const TrainConfig& c) {
  Json j;
  j["batch_size"] = c.batch_size;
  j["lambda_p"] = c.lambda_p;
  j["lambda_n"] = c.lambda_n;
  j["epochs"] = c.epochs;
  j["learning_rate"] = c.learning_rate;
  j["optimizer"] = c.optimizer == OptimizerKind::adam ? "adam" : "sgd";
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["adam_epsilon"] = c.adam_epsilon;
  j["seed"] = c.seed;
  j["distance_epsilon"] = c.distance_epsilon;
  return j;
}

Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::format_error, what + ": " + e.what());
  }
}

}  // namespace affect
