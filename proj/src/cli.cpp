#include "affect/cli.hpp"

#include <charconv>
#include <cstdlib>
#include <ostream>

#include <CLI11.hpp>

#include "affect/evaluation.hpp"
#include "affect/inference.hpp"

namespace affect {

namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::string shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

template <typename T>
T optional_field(const Json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorKind::format_error, std::string("config field '") + key + "' has the wrong type");
  }
}

bool is_canonical(const Json& manifold) {
  if (!manifold.is_string()) return false;
  const auto name = manifold.get<std::string>();
  return name == "love_linear" || name == "love_nonlinear" || name == "joy";
}

Json load_json_file(const fs::path& path) {
  return parse_json(read_text_file(path), path.string());
}

}  // namespace

RunConfig run_config_from_json(const Json& j, const fs::path& base_dir) {
  require(j.is_object(), ErrorKind::format_error, "run config must be a JSON object");
  require(j.contains("manifold"), ErrorKind::format_error, "run config: missing 'manifold'");
  require(j.contains("dataset"), ErrorKind::format_error, "run config: missing 'dataset'");
  RunConfig c;
  c.base_dir = base_dir;
  c.manifold = j.at("manifold");
  c.dataset = j.at("dataset");
  c.holdout_fraction = optional_field(j, "holdout_fraction", c.holdout_fraction);
  c.split_seed = optional_field(j, "split_seed", c.split_seed);
  if (j.contains("network")) {
    const Json& n = j.at("network");
    c.hidden = optional_field(n, "hidden", c.hidden);
    c.dropout = optional_field(n, "dropout", c.dropout);
    c.network_seed = optional_field(n, "seed", c.network_seed);
  }
  if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
  c.output_dir = resolve(base_dir, optional_field<std::string>(j, "output_dir", "out"));
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  RunConfig c = run_config_from_json(load_json_file(path), path.parent_path());
  if (const char* env = std::getenv("AFFECT_SEED"); env != nullptr && *env != '\0') {
    std::uint64_t seed = 0;
    const std::string_view text(env);
    auto res = std::from_chars(text.data(), text.data() + text.size(), seed);
    require(res.ec == std::errc() && res.ptr == text.data() + text.size(),
            ErrorKind::invalid_argument, "AFFECT_SEED must be an unsigned integer");
    c.train.seed = seed;
    c.network_seed = seed;
  }
  return c;
}

SignalDataset load_dataset(const RunConfig& config, std::size_t state_count) {
  const Json& d = config.dataset;
  require(d.is_object(), ErrorKind::format_error, "dataset config must be an object");
  const auto source = optional_field<std::string>(d, "source", "synthetic");
  SignalDataset data;
  if (source == "synthetic") {
    data = synth_gaussian_dataset(optional_field<std::size_t>(d, "states", state_count),
                                  optional_field<std::size_t>(d, "per_state", 500),
                                  optional_field<std::size_t>(d, "dim", 20),
                                  optional_field<double>(d, "separation", 6.0),
                                  optional_field<std::uint64_t>(d, "seed", 1));
  } else if (source == "idx") {
    const auto images =
        load_idx_images(resolve(config.base_dir, optional_field<std::string>(d, "images", "")));
    const auto labels =
        load_idx_labels(resolve(config.base_dir, optional_field<std::string>(d, "labels", "")));
    std::map<int, std::size_t> mapping;
    if (d.contains("assignment")) {
      require(d.at("assignment").is_object(), ErrorKind::format_error,
              "dataset assignment must map raw labels to state ids");
      for (const auto& [raw, state] : d.at("assignment").items())
        mapping[std::stoi(raw)] = state.get<std::size_t>();
    } else {
      for (std::size_t s = 0; s < state_count; ++s) mapping[static_cast<int>(s)] = s;
    }
    data = assign_states(pair_idx(images, labels), StateAssignment(std::move(mapping)));
  } else if (source == "csv") {
    data = dataset_from_csv(
        read_text_file(resolve(config.base_dir, optional_field<std::string>(d, "path", ""))),
        state_count);
  } else {
    fail(ErrorKind::format_error, "unknown dataset source '" + source + "'");
  }
  if (d.contains("shift")) {
    const Json& s = d.at("shift");
    const DatasetShift shift{optional_field<std::size_t>(s, "state", 0),
                             optional_field<std::size_t>(s, "axis", 0),
                             optional_field<double>(s, "amount", 0.0)};
    require(shift.axis < data.dim(), ErrorKind::invalid_argument, "shift axis out of range");
    for (std::size_t i = 0; i < data.size(); ++i)
      if (data.labels[i] == shift.state)
        data.signals(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(shift.axis)) +=
            shift.amount;
  }
  return data;
}

PreparedRun prepare_run(const RunConfig& config) {
  std::optional<ManifoldSpec> spec;
  std::optional<CanonicalManifold> canonical;
  if (is_canonical(config.manifold)) {
    canonical = parse_canonical(config.manifold.get<std::string>());
  } else if (config.manifold.is_string()) {
    spec = manifold_spec_from_json(
        load_json_file(resolve(config.base_dir, config.manifold.get<std::string>())));
  } else {
    spec = manifold_spec_from_json(config.manifold);
  }
  const std::size_t states =
      canonical ? canonical_state_names(*canonical).size() : spec->state_count();
  SignalDataset data = load_dataset(config, states);
  if (canonical) spec = canonical_spec(*canonical, data.dim());
  require(data.state_count == spec->state_count(), ErrorKind::insufficient_data,
          "dataset provides " + std::to_string(data.state_count) + " states, manifold '" +
              spec->name() + "' needs " + std::to_string(spec->state_count()));
  require(data.dim() == spec->input_dim(), ErrorKind::invalid_argument,
          "dataset width " + std::to_string(data.dim()) + " does not match manifold input " +
              std::to_string(spec->input_dim()));
  data.validate();
  auto [train_part, test_part] = split_holdout(data, config.holdout_fraction, config.split_seed);
  return {*spec, std::move(train_part), std::move(test_part)};
}

TrainResult run_training(const RunConfig& config, const PreparedRun& run) {
  auto net = init_network(
      make_mlp(run.spec.input_dim(), config.hidden, run.spec.embedding_dim(), config.dropout),
      config.network_seed);
  return train(run.train, run.spec, config.train, std::move(net));
}

namespace {

struct Usage : std::runtime_error {
  using std::runtime_error::runtime_error;
};

TrainedManifold load_model(const fs::path& path) {
  return trained_manifold_from_json(load_json_file(path));
}

Mind load_mind(const fs::path& path) {
  const Json j = load_json_file(path);
  require(j.is_object() && j.contains("manifolds") && j.at("manifolds").is_array(),
          ErrorKind::format_error, "mind file: missing 'manifolds' array");
  std::vector<MindMember> members;
  for (const auto& entry : j.at("manifolds")) {
    require(entry.is_object() && entry.contains("model"), ErrorKind::format_error,
            "mind file: every manifold entry needs a 'model'");
    const Json& model = entry.at("model");
    MindMember member{model.is_string()
                          ? load_model(resolve(path.parent_path(), model.get<std::string>()))
                          : trained_manifold_from_json(model),
                      std::nullopt};
    if (entry.contains("slice")) {
      member.slice = InputSlice{optional_field<std::size_t>(entry.at("slice"), "offset", 0),
                                optional_field<std::size_t>(entry.at("slice"), "length", 0)};
    }
    members.push_back(std::move(member));
  }
  return Mind(std::move(members));
}

void write_training_outputs(const RunConfig& config, const TrainResult& result,
                            std::ostream& out) {
  const fs::path model_path = config.output_dir / "model.json";
  const fs::path loss_path = config.output_dir / "loss.csv";
  write_text_file(model_path, to_json(result.model).dump(2) + "\n");
  write_text_file(loss_path, loss_curve_csv(result.curve));
  out << "model: " << model_path.string() << "\n";
  out << "loss: " << loss_path.string() << "\n";
  if (!result.curve.empty())
    out << "final loss: " << shortest(result.curve.back().total) << "\n";
}

/// `--data <csv>` or the held-out split of `--config <run config>`.
SignalDataset evaluation_data(const TrainedManifold& model, const std::string& data_path,
                              const std::string& config_path) {
  if (!data_path.empty())
    return dataset_from_csv(read_text_file(data_path), model.spec.state_count());
  if (!config_path.empty()) return prepare_run(load_run_config(config_path)).test;
  throw Usage("one of --data or --config is required");
}

std::vector<Vector> read_signals(const std::string& path) {
  const Matrix m = read_matrix_csv(read_text_file(path));
  std::vector<Vector> rows;
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(m.row(r).transpose());
  return rows;
}

void print_layout(CanonicalManifold which, std::ostream& out) {
  const MarginMatrix m = canonical_margins(which);
  out << to_string(which) << " margins (" << m.size() << " states: ";
  const auto names = canonical_state_names(which);
  for (std::size_t i = 0; i < names.size(); ++i) out << (i ? ", " : "") << names[i];
  out << ")\n";
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = 0; j < m.size(); ++j) out << (j ? " " : "") << shortest(m(i, j));
    out << "\n";
  }
  const EmbeddabilityReport report = check_embeddability(m, 2);
  out << "embeddable in 2D: " << (report.embeddable ? "true" : "false") << "\n";
  out << "gram eigenvalues:";
  for (double v : report.eigenvalues) out << " " << shortest(v);
  out << "\n";
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Affective manifold learning: train, infer and evaluate embedding spaces", "affect"};
  app.require_subcommand(1);

  std::string config_path, model_path, input_path, mind_path, data_path, out_path, which;
  std::string split = "test";
  bool mahalanobis = false;
  double temperature = 1.0;

  auto* train_cmd = app.add_subcommand("train", "Train a manifold from a run config");
  train_cmd->add_option("--config", config_path, "Run configuration JSON")->required();

  auto* continue_cmd = app.add_subcommand("continue", "Continue training an existing model");
  continue_cmd->add_option("--model", model_path, "Model JSON")->required();
  continue_cmd->add_option("--config", config_path, "Run configuration JSON")->required();

  auto* infer_cmd = app.add_subcommand("infer", "Infer the state of each input row");
  infer_cmd->add_option("--model", model_path, "Model JSON")->required();
  infer_cmd->add_option("--input", input_path, "CSV of signals, one per row")->required();
  infer_cmd->add_flag("--mahalanobis", mahalanobis, "Use per-state Mahalanobis distances");
  infer_cmd->add_option("--temperature", temperature, "Softmin temperature");

  auto* react_cmd = app.add_subcommand("react", "Run every manifold of a mind on each input row");
  react_cmd->add_option("--mind", mind_path, "Mind JSON")->required();
  react_cmd->add_option("--input", input_path, "CSV of signals, one per row")->required();
  react_cmd->add_option("--temperature", temperature, "Softmin temperature");

  auto* eval_cmd = app.add_subcommand("eval", "Score a model on labelled data");
  eval_cmd->add_option("--model", model_path, "Model JSON")->required();
  eval_cmd->add_option("--data", data_path, "Dataset CSV (label,x0,...)");
  eval_cmd->add_option("--config", config_path, "Run config; evaluates its held-out split");

  auto* layout_cmd = app.add_subcommand("layout", "Print a canonical margin matrix");
  layout_cmd->add_option("--which", which, "love_linear | love_nonlinear | joy")->required();

  auto* plot_cmd = app.add_subcommand("plot", "Write an SVG scatter of the embeddings");
  plot_cmd->add_option("--model", model_path, "Model JSON")->required();
  plot_cmd->add_option("--data", data_path, "Dataset CSV (label,x0,...)");
  plot_cmd->add_option("--config", config_path, "Run config; plots its held-out split");
  plot_cmd->add_option("--out", out_path, "Output SVG path")->required();

  auto* export_cmd = app.add_subcommand("export", "Write a run config's dataset as CSV");
  export_cmd->add_option("--config", config_path, "Run configuration JSON")->required();
  export_cmd->add_option("--split", split, "train | test | all")
      ->check(CLI::IsMember({"train", "test", "all"}));
  export_cmd->add_option("--out", out_path, "Output CSV path")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 1;
  }

  try {
    if (train_cmd->parsed()) {
      const RunConfig config = load_run_config(config_path);
      const PreparedRun run = prepare_run(config);
      write_training_outputs(config, run_training(config, run), out);
    } else if (continue_cmd->parsed()) {
      const RunConfig config = load_run_config(config_path);
      const TrainedManifold model = load_model(model_path);
      const PreparedRun run = prepare_run(config);
      write_training_outputs(config, continue_train(model, run.train, config.train), out);
    } else if (infer_cmd->parsed()) {
      const TrainedManifold model = load_model(model_path);
      for (const auto& x : read_signals(input_path)) {
        const InferenceResult r = mahalanobis ? infer_state_mahalanobis(model, x, temperature)
                                              : infer_state(model, x, temperature);
        out << inference_to_json(model.spec.name(), r).dump() << "\n";
      }
    } else if (react_cmd->parsed()) {
      const Mind mind = load_mind(mind_path);
      for (const auto& x : read_signals(input_path))
        out << reaction_to_json(mind_react(mind, x, temperature)).dump() << "\n";
    } else if (eval_cmd->parsed()) {
      const TrainedManifold model = load_model(model_path);
      const SignalDataset test = evaluation_data(model, data_path, config_path);
      out << to_json(evaluate(model, test)).dump(2) << "\n";
    } else if (layout_cmd->parsed()) {
      print_layout(parse_canonical(which), out);
    } else if (plot_cmd->parsed()) {
      const TrainedManifold model = load_model(model_path);
      const SignalDataset data = evaluation_data(model, data_path, config_path);
      write_scatter_svg(out_path, model.network.embed(data.signals), data.labels,
                        model.spec.state_names());
      out << "plot: " << out_path << "\n";
    } else if (export_cmd->parsed()) {
      const RunConfig config = load_run_config(config_path);
      const PreparedRun run = prepare_run(config);
      if (split == "all") {
        write_text_file(out_path, dataset_to_csv(load_dataset(config, run.spec.state_count())));
      } else {
        write_text_file(out_path, dataset_to_csv(split == "train" ? run.train : run.test));
      }
      out << "dataset: " << out_path << "\n";
    }
  } catch (const Usage& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const DivergedError& e) {
    err << "diverged: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    if (layout_cmd->parsed() && e.kind() == ErrorKind::invalid_argument) {
      err << "error: " << e.what() << "\n";
      return 1;
    }
    err << to_string(e.kind()) << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace affect
