#include "affect/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

namespace affect {

double EvalReport::mean_spread() const {
  if (intra_state_spread.empty()) return 0.0;
  return std::accumulate(intra_state_spread.begin(), intra_state_spread.end(), 0.0) /
         static_cast<double>(intra_state_spread.size());
}

EvalReport evaluate_embeddings(const Matrix& embeddings, std::span<const std::size_t> labels,
                               const std::vector<Vector>& state_means,
                               const MarginMatrix& margins) {
  const std::size_t s = margins.size();
  require(static_cast<std::size_t>(embeddings.rows()) == labels.size(),
          ErrorKind::invalid_argument, "embedding/label count mismatch");
  require(state_means.size() == s, ErrorKind::invalid_argument,
          "state mean count does not match the margin matrix");
  const auto p = embeddings.cols();

  std::vector<Vector> means(s, Vector::Zero(p));
  std::vector<std::size_t> counts(s, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] < s, ErrorKind::invalid_argument, "label outside the manifold's states");
    means[labels[i]] += embeddings.row(static_cast<Eigen::Index>(i)).transpose();
    ++counts[labels[i]];
  }
  for (std::size_t k = 0; k < s; ++k) {
    require(counts[k] > 0, ErrorKind::insufficient_data,
            "test data has no samples of state " + std::to_string(k));
    means[k] /= static_cast<double>(counts[k]);
  }

  EvalReport report;
  const auto n = static_cast<Eigen::Index>(s);
  report.realized_margins = Matrix::Zero(n, n);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t j = i + 1; j < s; ++j) {
      const double d = (means[i] - means[j]).norm();
      report.realized_margins(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d;
      report.realized_margins(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = d;
      num += (d - margins(i, j)) * (d - margins(i, j));
      den += margins(i, j) * margins(i, j);
    }
  }
  report.margin_stress = den > 0.0 ? std::sqrt(num / den) : 0.0;

  report.intra_state_spread.assign(s, 0.0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const Vector e = embeddings.row(static_cast<Eigen::Index>(i)).transpose();
    report.intra_state_spread[labels[i]] += (e - means[labels[i]]).norm();
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < s; ++k) {
      const double d = (e - state_means[k]).norm();
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    if (best == labels[i]) ++correct;
  }
  for (std::size_t k = 0; k < s; ++k)
    report.intra_state_spread[k] /= static_cast<double>(counts[k]);
  report.accuracy =
      labels.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(labels.size());
  return report;
}

EvalReport evaluate(const TrainedManifold& model, const SignalDataset& test) {
  require(test.dim() == model.spec.input_dim(), ErrorKind::invalid_argument,
          "test data width does not match the manifold input");
  require(test.state_count <= model.spec.state_count(), ErrorKind::invalid_argument,
          "test data declares more states than the manifold");
  return evaluate_embeddings(model.network.embed(test.signals), test.labels, model.state_means,
                             model.spec.margins());
}

namespace {

// Tableau-10 palette, cycled when there are more states.
constexpr std::array<const char*, 10> kPalette = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                                  "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                                                  "#bcbd22", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  std::string s(buf);
  if (s == "-0.000") s = "0.000";
  return s;
}

std::string escape_xml(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_scatter_svg(const Matrix& embeddings, std::span<const std::size_t> labels,
                               const std::vector<std::string>& state_names) {
  require(embeddings.cols() == 2 || embeddings.rows() == 0, ErrorKind::unsupported_dimension,
          "scatter plots need 2-D embeddings, got p = " + std::to_string(embeddings.cols()));
  require(static_cast<std::size_t>(embeddings.rows()) == labels.size(),
          ErrorKind::invalid_argument, "embedding/label count mismatch");
  for (std::size_t l : labels)
    require(l < state_names.size(), ErrorKind::invalid_argument, "label without a state name");

  constexpr double plot = 480.0;
  constexpr double margin = 20.0;
  constexpr double legend_width = 140.0;
  const double width = plot + 2 * margin + legend_width;
  const double height = plot + 2 * margin;

  double min_x = -1, max_x = 1, min_y = -1, max_y = 1;
  if (embeddings.rows() > 0) {
    min_x = embeddings.col(0).minCoeff();
    max_x = embeddings.col(0).maxCoeff();
    min_y = embeddings.col(1).minCoeff();
    max_y = embeddings.col(1).maxCoeff();
  }
  // One scale for both axes.
  const double span = std::max({max_x - min_x, max_y - min_y, 1e-9});
  const double cx = 0.5 * (min_x + max_x);
  const double cy = 0.5 * (min_y + max_y);
  const double scale = 0.95 * plot / span;
  auto px = [&](double x) { return margin + plot / 2 + (x - cx) * scale; };
  auto py = [&](double y) { return margin + plot / 2 - (y - cy) * scale; };

  std::string svg;
  svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" +
         num(height) + "\" viewBox=\"0 0 " + num(width) + " " + num(height) + "\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"" + num(width) + "\" height=\"" + num(height) +
         "\" fill=\"white\"/>\n";
  svg += "<g id=\"points\">\n";
  for (Eigen::Index i = 0; i < embeddings.rows(); ++i) {
    const char* color = kPalette[labels[static_cast<std::size_t>(i)] % kPalette.size()];
    svg += "<circle cx=\"" + num(px(embeddings(i, 0))) + "\" cy=\"" + num(py(embeddings(i, 1))) +
           "\" r=\"2.5\" fill=\"" + color + "\" fill-opacity=\"0.6\"/>\n";
  }
  svg += "</g>\n<g id=\"means\">\n";
  for (std::size_t k = 0; k < state_names.size(); ++k) {
    double sx = 0, sy = 0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] != k) continue;
      sx += embeddings(static_cast<Eigen::Index>(i), 0);
      sy += embeddings(static_cast<Eigen::Index>(i), 1);
      ++count;
    }
    if (count == 0) continue;
    const double x = px(sx / count);
    const double y = py(sy / count);
    svg += "<path class=\"mean\" d=\"M" + num(x - 7) + " " + num(y - 7) + " L" + num(x + 7) +
           " " + num(y + 7) + " M" + num(x - 7) + " " + num(y + 7) + " L" + num(x + 7) + " " +
           num(y - 7) + "\" stroke=\"" + kPalette[k % kPalette.size()] +
           "\" stroke-width=\"2.5\"/>\n";
  }
  svg += "</g>\n<g id=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n";
  for (std::size_t k = 0; k < state_names.size(); ++k) {
    const double y = margin + 18.0 * static_cast<double>(k);
    svg += "<rect class=\"legend\" x=\"" + num(plot + 2 * margin) + "\" y=\"" + num(y) +
           "\" width=\"10\" height=\"10\" fill=\"" + kPalette[k % kPalette.size()] + "\"/>";
    svg += "<text x=\"" + num(plot + 2 * margin + 16) + "\" y=\"" + num(y + 9) + "\">" +
           escape_xml(state_names[k]) + "</text>\n";
  }
  svg += "</g>\n</svg>\n";
  return svg;
}

void write_scatter_svg(const std::filesystem::path& path, const Matrix& embeddings,
                       std::span<const std::size_t> labels,
                       const std::vector<std::string>& state_names) {
  write_text_file(path, render_scatter_svg(embeddings, labels, state_names));
}

}  // namespace affect
