// Acceptance suite. Runs every criterion (or the ones named on the command
// line) and prints one PASS/FAIL line each. Exit status is non-zero when any
// selected criterion fails.

#include <algorithm>
#include <array>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "affect/cli.hpp"
#include "affect/evaluation.hpp"
#include "affect/inference.hpp"
#include "affect/training.hpp"
#include "oracles.hpp"
#include "reference_margins.hpp"

using namespace affect;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os << std::setprecision(digits) << v;
  return os.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "affect_acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const fs::path kConfigs = AFFECT_CONFIG_DIR;

struct ReferenceRun {
  RunConfig config;
  PreparedRun prepared;
  TrainResult result;
  EvalReport report;
};

ReferenceRun reference_run(const std::string& file) {
  RunConfig config = load_run_config(kConfigs / file);
  PreparedRun prepared = prepare_run(config);
  TrainResult result = run_training(config, prepared);
  EvalReport report = evaluate(result.model, prepared.test);
  return {std::move(config), std::move(prepared), std::move(result), std::move(report)};
}

double max_abs(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

// 1 ------------------------------------------------------------------------
Verdict canonical_matrices() {
  Verdict v{true, ""};
  for (auto [which, rows] : {std::pair{"love_linear", &reference::love_linear},
                             std::pair{"love_nonlinear", &reference::love_nonlinear},
                             std::pair{"joy", &reference::joy}}) {
    std::ostringstream out, err;
    const int code = cli_main({"layout", "--which", which}, out, err);
    std::istringstream in(out.str());
    std::string header;
    std::getline(in, header);
    std::size_t mismatches = 0;
    for (const auto& row : *rows)
      for (double want : row) {
        double got = std::nan("");
        in >> got;
        mismatches += got != want;
      }
    const bool ok = code == 0 && mismatches == 0 && canonical_margins(parse_canonical(which)).rows() == *rows;
    v.pass = v.pass && ok;
    v.detail += std::string(which) + (ok ? " exact; " : " MISMATCH; ");
  }
  return v;
}

// 2 ------------------------------------------------------------------------
Verdict geometry_cross_check() {
  const Matrix love = MarginMatrix::from_rows(reference::love_nonlinear).entries();
  const double chain =
      max_abs(layout_to_margins(canonical_layout(CanonicalManifold::love_nonlinear)).entries(), love);
  const auto joy = MarginMatrix::from_rows(reference::joy);
  const double mds = max_abs(layout_to_margins(classical_mds_layout(joy)).entries(), joy.entries());
  return {chain <= 0.011 && mds <= 0.02,
          "135-degree chain vs love max|diff| = " + fmt(chain) + " (<= 0.011); joy MDS round trip "
          "max|diff| = " + fmt(mds) + " (<= 0.02)"};
}

// 3 ------------------------------------------------------------------------
/// Sign pattern of every PReLU input, used to skip kink-straddling parameters.
std::vector<bool> prelu_signs(const EmbeddingNetwork& net, const Matrix& batch) {
  const auto fwd = net.forward(batch, Mode::eval);
  std::vector<bool> signs;
  for (std::size_t k = 0; k < net.layers().size(); ++k)
    if (net.layers()[k].kind == LayerKind::prelu) {
      const Matrix& in = fwd.trace.layers[k].input;
      for (Eigen::Index i = 0; i < in.size(); ++i) signs.push_back(in.data()[i] > 0);
    }
  return signs;
}

Verdict gradient_oracle() {
  std::mt19937_64 rng(2024);
  const std::size_t widths[] = {8, 16, 32, 64};
  std::uniform_int_distribution<int> pick(0, 3), depth(2, 3);
  const auto margins = canonical_margins(CanonicalManifold::love_nonlinear);
  double worst = 0;
  std::size_t checked = 0, skipped = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = widths[pick(rng)];
    std::vector<std::size_t> hidden(static_cast<std::size_t>(depth(rng) - 1));
    for (auto& h : hidden) h = widths[pick(rng)];
    const auto layers = make_mlp(d, hidden, 2, 0.0);
    const auto net = init_network(layers, static_cast<std::uint64_t>(trial) + 100);
    const auto data = synth_gaussian_dataset(4, 20, d, 3.0, static_cast<std::uint64_t>(trial));
    const auto batch = sample_triplets(data, 8, static_cast<std::uint64_t>(trial));
    TrainConfig config;
    const Vector analytic = loss_gradient(batch, net, margins, config).gradient;
    const double floor = std::max(1e-4, 1e-3 * analytic.cwiseAbs().maxCoeff());

    const auto base_signs = prelu_signs(net, batch.signals);
    Vector params = net.params();
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < params.size(); ++i) {
      const double orig = params(i);
      params(i) = orig + h;
      const EmbeddingNetwork up(layers, params, net.seed());
      params(i) = orig - h;
      const EmbeddingNetwork down(layers, params, net.seed());
      params(i) = orig;
      if (prelu_signs(up, batch.signals) != base_signs ||
          prelu_signs(down, batch.signals) != base_signs) {
        ++skipped;
        continue;
      }
      const double numeric = (total_loss(batch, up, margins, config).total -
                              total_loss(batch, down, margins, config).total) / (2 * h);
      const double scale = std::max({std::abs(analytic(i)), std::abs(numeric), floor});
      worst = std::max(worst, std::abs(analytic(i) - numeric) / scale);
      ++checked;
    }
  }
  return {worst < 1e-5 && checked > 0,
          "max relative error " + fmt(worst, 3) + " (< 1e-5) over " + std::to_string(checked) +
              " parameters, " + std::to_string(skipped) + " kink-straddling skipped"};
}

// 4 ------------------------------------------------------------------------
MiniBatch pairing(const std::vector<std::pair<std::size_t, std::size_t>>& states) {
  MiniBatch batch;
  for (auto [a, n] : states) batch.triplets.push_back({0, 0, 0, a, n});
  return batch;
}

Verdict loss_identities() {
  std::vector<std::string> failures;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };
  // Row-major literal helper: rows of (x, y).
  auto rows = [](std::vector<std::array<double, 2>> r) {
    Matrix m(static_cast<Eigen::Index>(r.size()), 2);
    for (std::size_t i = 0; i < r.size(); ++i) m.row(static_cast<Eigen::Index>(i)) << r[i][0], r[i][1];
    return m;
  };

  expect(positive_loss(rows({{1, 2}, {3, 4}}), rows({{1, 2}, {3, 4}})) == 0, "Lp zero");
  expect(positive_loss(rows({{0, 0}}), rows({{3, 4}})) == 25, "Lp 25");
  expect(positive_loss(rows({{0, 0}, {0, 0}}), rows({{1, 0}, {0, 3}})) == 5, "Lp 5");

  const auto m = MarginMatrix::from_rows({{0, 1, 2}, {1, 0, 1}, {2, 1, 0}});
  const std::vector<std::size_t> a0{0}, n1{1}, n2{2}, a00{0, 0}, n12{1, 2};
  expect(negative_loss(rows({{0, 0}}), rows({{0, 1}}), m, a0, n1) == 0, "Ln exact margin");
  expect(negative_loss(rows({{3, 3}}), rows({{3, 3}}), m, a0, n2) == 4, "Ln collapsed m^2");
  expect(negative_loss(rows({{0, 0}, {0, 0}}), rows({{2, 0}, {0, 2}}), m, a00, n12) == 0.5,
         "Ln 0.5");

  // Ten triplets: three anchor-positive pairs one apart (Lp = 0.3) and seven
  // anchor-negative gaps of one (Ln = 0.7).
  {
    const auto two = MarginMatrix::from_rows({{0, 1}, {1, 0}});
    const auto batch = pairing(std::vector<std::pair<std::size_t, std::size_t>>(10, {0, 1}));
    Matrix e = Matrix::Zero(30, 2);
    for (int j = 0; j < 3; ++j) e(10 + j, 0) = 1;         // positives
    for (int j = 0; j < 10; ++j) e(20 + j, 1) = j < 7 ? 2 : 1;  // negatives
    const auto t = margin_loss(e, batch, two, TrainConfig{}).terms;
    expect(t.positive == 0.3 && t.negative == 0.7 && t.total == 1.0, "total 1.0");

    Matrix e2 = Matrix::Zero(3, 2);
    e2(1, 0) = 1;
    e2(2, 1) = 3;
    TrainConfig weighted;
    weighted.lambda_p = 2;
    weighted.lambda_n = 0.5;
    const auto t2 = margin_loss(e2, pairing({{0, 1}}), two, weighted).terms;
    expect(t2.positive == 1 && t2.negative == 4 && t2.total == 4.0, "total 4.0");
  }

  // Global minimum: anchors on positives, negatives at their margins.
  {
    const auto chain = linear_chain_margins(4, 1.0);
    const auto batch = pairing({{0, 3}, {1, 2}, {2, 0}, {3, 1}});
    Matrix e = Matrix::Zero(12, 2);
    const double ax[] = {0, 1, 2, 3}, nx[] = {3, 2, 0, 1};
    for (int j = 0; j < 4; ++j) {
      e(j, 0) = e(4 + j, 0) = ax[j];
      e(8 + j, 0) = nx[j];
    }
    expect(margin_loss(e, batch, chain, TrainConfig{}).terms.total == 0, "global minimum");
  }

  // Joint orthogonal transform plus translation.
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<std::size_t> state(0, 5);
  const auto joy = canonical_margins(CanonicalManifold::joy);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (int j = 0; j < 8; ++j) {
      const std::size_t a = state(rng);
      pairs.push_back({a, (a + 1 + state(rng) % 5) % 6});
    }
    const auto batch = pairing(pairs);
    const Eigen::Index p = 2 + trial % 3;
    const Matrix e = oracle::random_matrix(24, p, rng, 2.0);
    const Matrix q = oracle::random_orthogonal(p, rng);
    const Eigen::RowVectorXd t = oracle::random_matrix(1, p, rng, 5.0);
    const Matrix moved = (e * q).rowwise() + t;
    worst = std::max(worst, std::abs(margin_loss(e, batch, joy, TrainConfig{}).terms.total -
                                     margin_loss(moved, batch, joy, TrainConfig{}).terms.total));
  }
  expect(worst < 1e-9, "isometry invariance");

  std::string detail = "10 arithmetic identities; isometry max|diff| = " + fmt(worst, 3) +
                       " (< 1e-9) over 100 cases";
  for (const auto& f : failures) detail += "; FAILED " + f;
  return {failures.empty(), detail};
}

// 5, 6 ---------------------------------------------------------------------
Verdict love_reproduction() {
  const auto run = reference_run("love_reference.json");
  const double bound = 0.15 * run.prepared.spec.margins().min_off_diagonal();
  const auto& r = run.report;
  return {r.margin_stress <= 0.10 && r.accuracy >= 0.95 && r.mean_spread() <= bound,
          "stress " + fmt(r.margin_stress) + " (<= 0.10), accuracy " + fmt(r.accuracy) +
              " (>= 0.95), mean spread " + fmt(r.mean_spread()) + " (<= " + fmt(bound) + ")"};
}

Verdict joy_reproduction() {
  const auto run = reference_run("joy_reference.json");
  const auto& r = run.report;
  return {r.margin_stress <= 0.12 && r.accuracy >= 0.93,
          "stress " + fmt(r.margin_stress) + " (<= 0.12), accuracy " + fmt(r.accuracy) +
              " (>= 0.93)"};
}

// 7 ------------------------------------------------------------------------
Verdict transfer_learning() {
  const auto base = reference_run("love_reference.json");
  TrainConfig more = base.config.train;
  more.epochs = 5;

  const auto same = continue_train(base.result.model, base.prepared.train, more);
  const double before = base.result.curve.back().total;
  const double after = same.curve.back().total;
  const bool loss_ok = after <= before + 1e-6;

  // State 1 drifts by two standard deviations along an unused input axis.
  RunConfig shifted_config = base.config;
  shifted_config.dataset["shift"] = {{"state", 1}, {"axis", 10}, {"amount", 2.0}};
  const PreparedRun shifted = prepare_run(shifted_config);
  const auto moved = continue_train(base.result.model, shifted.train, more);
  const double pre = base.report.margin_stress;
  const double post = evaluate(moved.model, shifted.test).margin_stress;
  const double drift = (moved.model.state_means[1] - base.result.model.state_means[1]).norm();
  const bool stress_ok = post <= 1.15 * pre;

  return {loss_ok && stress_ok,
          "unchanged data: final loss " + fmt(before, 6) + " -> " + fmt(after, 6) +
              (loss_ok ? " (ok)" : " (INCREASED)") + "; shifted state: stress " + fmt(pre) +
              " -> " + fmt(post) + " (ratio " + fmt(post / pre, 3) + ", <= 1.15), state mean moved " +
              fmt(drift)};
}

// 8 ------------------------------------------------------------------------
Verdict inference_contract() {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<std::size_t> dim(2, 10), states(2, 6), emb(1, 4);
  std::size_t violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t d = dim(rng), s = states(rng), p = std::min(emb(rng), d);
    const auto net = init_network(make_mlp(d, {8}, p, 0.0), static_cast<std::uint64_t>(trial));
    std::vector<std::string> names;
    for (std::size_t i = 0; i < s; ++i) names.push_back("s" + std::to_string(i));
    std::vector<Vector> means;
    for (std::size_t i = 0; i < s; ++i)
      means.push_back(oracle::random_matrix(static_cast<Eigen::Index>(p), 1, rng, 3));
    TrainedManifold model{ManifoldSpec("m", names, linear_chain_margins(s, 1.0), p, d), net, means,
                          std::nullopt};
    const Vector x = oracle::random_matrix(static_cast<Eigen::Index>(d), 1, rng);
    const Vector fx = net.embed_one(x);
    std::uniform_int_distribution<std::size_t> any(0, s - 1);

    // zero distance
    const std::size_t k = any(rng);
    TrainedManifold zero = model;
    zero.state_means[k] = fx;
    const auto rz = infer_state(zero, x);
    violations += rz.state_id != k || rz.distances[k] != 0.0;

    // ties go to the lowest id
    std::size_t i = any(rng), j = any(rng);
    while (j == i) j = any(rng);
    if (i > j) std::swap(i, j);
    TrainedManifold tie = model;
    const Vector near = fx + oracle::random_matrix(static_cast<Eigen::Index>(p), 1, rng, 0.1);
    for (auto& m : tie.state_means) m = fx + Vector::Constant(static_cast<Eigen::Index>(p), 100.0);
    tie.state_means[i] = near;
    tie.state_means[j] = near;
    const auto rt = infer_state(tie, x);
    violations += rt.state_id != i;

    // identity covariances reduce to the Euclidean rule
    TrainedManifold ident = model;
    ident.covariances = std::vector<Matrix>(s, Matrix::Identity(static_cast<Eigen::Index>(p),
                                                                static_cast<Eigen::Index>(p)));
    const auto re = infer_state(ident, x);
    const auto rm = infer_state_mahalanobis(ident, x);
    bool same = re.state_id == rm.state_id;
    for (std::size_t q = 0; q < s; ++q)
      same = same && std::abs(re.distances[q] - rm.distances[q]) <= 1e-12 * (1 + re.distances[q]);
    violations += !same;
  }

  // Anisotropic two-state case: f(x) = (5, 0), means (0, 0) and (6, 0), state
  // A stretched 100x along the first axis.
  Vector params(6);
  params << 1, 0, 0, 1, 0, 0;
  Vector a = Vector::Zero(2), b = Vector::Zero(2), x = Vector::Zero(2);
  b(0) = 6;
  x(0) = 5;
  TrainedManifold toy{ManifoldSpec("toy", {"A", "B"}, linear_chain_margins(2, 6.0), 2, 2),
                      EmbeddingNetwork({LayerSpec::dense(2, 2)}, params, 0), {a, b}, std::nullopt};
  Matrix cov_a = Matrix::Identity(2, 2);
  cov_a(0, 0) = 100;
  toy.covariances = std::vector<Matrix>{cov_a, Matrix::Identity(2, 2)};
  const bool flips = infer_state(toy, x).state_id == 1 && infer_state_mahalanobis(toy, x).state_id == 0;

  return {violations == 0 && flips,
          std::to_string(violations) + " violations over 1000 random models x 3 properties; "
          "anisotropic case Euclidean->B, Mahalanobis->A: " + (flips ? "yes" : "NO")};
}

// 9 ------------------------------------------------------------------------
Verdict idx_robustness() {
  const auto dir = scratch("idx");
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> size(0, 12), byte(0, 255);
  std::size_t round_trips = 0, crashes = 0, wrong_kind = 0;

  auto write = [](const fs::path& p, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(p, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  };
  auto read = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
  };
  // Runs f and reports the error kind it raised; anything else is a crash.
  auto kind_of = [&](auto&& f) -> std::optional<ErrorKind> {
    try {
      f();
    } catch (const Error& e) {
      return e.kind();
    } catch (...) {
      ++crashes;
    }
    return std::nullopt;
  };

  for (int trial = 0; trial < 100; ++trial) {
    IdxImages img;
    img.count = static_cast<std::uint32_t>(size(rng));
    img.rows = static_cast<std::uint32_t>(1 + size(rng));
    img.cols = static_cast<std::uint32_t>(1 + size(rng));
    img.pixels.resize(std::size_t(img.count) * img.rows * img.cols);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(byte(rng));
    IdxLabels lab;
    lab.labels.resize(img.count);
    for (auto& l : lab.labels) l = static_cast<std::uint8_t>(byte(rng) % 10);

    const auto ipath = dir / ("img" + std::to_string(trial));
    const auto lpath = dir / ("lab" + std::to_string(trial));
    write(ipath, encode_idx_images(img));
    write(lpath, encode_idx_labels(lab));
    const auto original_images = read(ipath), original_labels = read(lpath);
    if (encode_idx_images(load_idx_images(ipath)) == original_images &&
        encode_idx_labels(load_idx_labels(lpath)) == original_labels &&
        pair_idx(load_idx_images(ipath), load_idx_labels(lpath)).labels.size() == img.count)
      ++round_trips;

    // bad magic
    auto swapped = original_labels;
    write(ipath, swapped);
    wrong_kind += kind_of([&] { load_idx_images(ipath); }) != ErrorKind::format_error;
    auto corrupt = original_images;
    corrupt[static_cast<std::size_t>(trial % 4)] ^= static_cast<std::uint8_t>(1 + trial % 7);
    write(ipath, corrupt);
    wrong_kind += kind_of([&] { load_idx_images(ipath); }) != ErrorKind::format_error;

    // truncation at a random point, including the empty file
    std::uniform_int_distribution<std::size_t> cut(0, original_images.size() - 1);
    auto truncated = original_images;
    truncated.resize(cut(rng));
    write(ipath, truncated);
    wrong_kind += kind_of([&] { load_idx_images(ipath); }) != ErrorKind::format_error;
    auto short_labels = original_labels;
    short_labels.resize(std::min<std::size_t>(short_labels.size() - 1, static_cast<std::size_t>(trial % 9)));
    write(lpath, short_labels);
    wrong_kind += kind_of([&] { load_idx_labels(lpath); }) != ErrorKind::format_error;

    // pair mismatch
    IdxLabels extra = lab;
    extra.labels.push_back(1);
    wrong_kind += kind_of([&] { pair_idx(img, extra); }) != ErrorKind::consistency_error;
  }
  const bool ok = round_trips == 100 && crashes == 0 && wrong_kind == 0;
  return {ok, std::to_string(round_trips) + "/100 byte-exact round trips; " +
                  std::to_string(wrong_kind) + " wrong error kinds, " + std::to_string(crashes) +
                  " non-library exceptions over 500 malformed inputs"};
}

// 10 -----------------------------------------------------------------------
Verdict determinism() {
  std::ifstream in(kConfigs / "love_reference.json");
  std::stringstream text;
  text << in.rdbuf();
  const Json base = parse_json(text.str(), "config");

  struct Outputs {
    std::string model, loss, report, svg;
  };
  auto run_once = [&](const std::string& name) {
    const auto dir = scratch(name);
    Json config = base;
    config["output_dir"] = (dir / "out").string();
    const auto path = dir / "config.json";
    write_text_file(path, config.dump(2));
    std::ostringstream out, err, report, ignored;
    const int train = cli_main({"train", "--config", path.string()}, out, err);
    const auto model = (dir / "out" / "model.json").string();
    const int eval = cli_main({"eval", "--model", model, "--config", path.string()}, report, err);
    const auto svg = (dir / "out" / "scatter.svg").string();
    const int plot =
        cli_main({"plot", "--model", model, "--config", path.string(), "--out", svg}, ignored, err);
    if (train != 0 || eval != 0 || plot != 0) return Outputs{};
    return Outputs{read_text_file(model), read_text_file(dir / "out" / "loss.csv"), report.str(),
                   read_text_file(svg)};
  };
  const Outputs a = run_once("run_a"), b = run_once("run_b");
  const bool produced = !a.model.empty() && !a.loss.empty() && !a.report.empty() && !a.svg.empty();
  const bool ok = produced && a.model == b.model && a.loss == b.loss && a.report == b.report &&
                  a.svg == b.svg;
  return {ok, std::string(produced ? "" : "run failed; ") + "model.json " +
                  (a.model == b.model ? "identical" : "DIFFERS") + ", loss.csv " +
                  (a.loss == b.loss ? "identical" : "DIFFERS") + ", report " +
                  (a.report == b.report ? "identical" : "DIFFERS") + ", svg " +
                  (a.svg == b.svg ? "identical" : "DIFFERS")};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "canonical matrices", canonical_matrices},
      {2, "geometry cross-check", geometry_cross_check},
      {3, "gradient oracle", gradient_oracle},
      {4, "loss identities", loss_identities},
      {5, "margin reproduction (love)", love_reproduction},
      {6, "margin reproduction (joy)", joy_reproduction},
      {7, "transfer learning", transfer_learning},
      {8, "inference contract", inference_contract},
      {9, "IDX robustness", idx_robustness},
      {10, "determinism", determinism},
  };
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end())
      continue;
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << "  [" << c.id << "] " << c.name << ": " << v.detail
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
