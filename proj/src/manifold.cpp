#include "affect/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include <Eigen/Eigenvalues>

namespace affect {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::insufficient_data: return "insufficient-data";
    case ErrorKind::format_error: return "format-error";
    case ErrorKind::consistency_error: return "consistency-error";
    case ErrorKind::unsupported_operation: return "unsupported-operation";
    case ErrorKind::unsupported_dimension: return "unsupported-dimension";
    case ErrorKind::diverged: return "diverged";
  }
  return "unknown";
}

MarginMatrix::MarginMatrix(Matrix entries) : entries_(std::move(entries)) {
  require(entries_.rows() == entries_.cols(), ErrorKind::invalid_argument,
          "margin matrix must be square");
  require(entries_.rows() >= 1, ErrorKind::invalid_argument, "margin matrix is empty");
  const Eigen::Index n = entries_.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    require(entries_(i, i) == 0.0, ErrorKind::invalid_argument,
            "margin matrix diagonal must be zero");
    for (Eigen::Index j = 0; j < n; ++j) {
      require(std::isfinite(entries_(i, j)), ErrorKind::invalid_argument,
              "margin matrix entries must be finite");
      require(entries_(i, j) == entries_(j, i), ErrorKind::invalid_argument,
              "margin matrix must be symmetric");
      if (i != j) {
        require(entries_(i, j) > 0.0, ErrorKind::invalid_argument,
                "off-diagonal margins must be strictly positive");
      }
    }
  }
}

MarginMatrix MarginMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  Matrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    require(static_cast<Eigen::Index>(row.size()) == n, ErrorKind::invalid_argument,
            "margin matrix must be square");
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = row[static_cast<std::size_t>(j)];
  }
  return MarginMatrix(std::move(m));
}

std::vector<std::vector<double>> MarginMatrix::rows() const {
  std::vector<std::vector<double>> out(size(), std::vector<double>(size()));
  for (std::size_t i = 0; i < size(); ++i)
    for (std::size_t j = 0; j < size(); ++j) out[i][j] = (*this)(i, j);
  return out;
}

double MarginMatrix::min_off_diagonal() const {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < size(); ++i)
    for (std::size_t j = 0; j < size(); ++j)
      if (i != j) best = std::min(best, (*this)(i, j));
  return best;
}

StateLayout::StateLayout(std::vector<Point2> coords) : coords_(std::move(coords)) {
  for (std::size_t i = 0; i < coords_.size(); ++i) {
    require(std::isfinite(coords_[i].x) && std::isfinite(coords_[i].y),
            ErrorKind::invalid_argument, "layout coordinates must be finite");
    for (std::size_t j = 0; j < i; ++j) {
      require(coords_[i].x != coords_[j].x || coords_[i].y != coords_[j].y,
              ErrorKind::invalid_argument,
              "layout points " + std::to_string(j) + " and " + std::to_string(i) +
                  " coincide");
    }
  }
}

ManifoldSpec::ManifoldSpec(std::string name, const std::vector<std::string>& state_names,
                           MarginMatrix margins, std::size_t embedding_dim,
                           std::size_t input_dim)
    : name_(std::move(name)),
      margins_(std::move(margins)),
      embedding_dim_(embedding_dim),
      input_dim_(input_dim) {
  require(!name_.empty(), ErrorKind::invalid_argument, "manifold name is empty");
  require(state_names.size() == margins_.size(), ErrorKind::invalid_argument,
          "manifold '" + name_ + "': " + std::to_string(state_names.size()) +
              " states but margin matrix of size " + std::to_string(margins_.size()));
  require(embedding_dim_ >= 1 && embedding_dim_ <= input_dim_, ErrorKind::invalid_argument,
          "manifold '" + name_ + "': need 1 <= embedding_dim <= input_dim");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < state_names.size(); ++i) {
    require(!state_names[i].empty(), ErrorKind::invalid_argument, "state name is empty");
    require(seen.insert(state_names[i]).second, ErrorKind::invalid_argument,
            "duplicate state name '" + state_names[i] + "'");
    states_.push_back({i, state_names[i]});
  }
}

std::vector<std::string> ManifoldSpec::state_names() const {
  std::vector<std::string> names;
  names.reserve(states_.size());
  for (const auto& s : states_) names.push_back(s.name);
  return names;
}

std::optional<std::size_t> ManifoldSpec::state_id(std::string_view name) const {
  for (const auto& s : states_)
    if (s.name == name) return s.id;
  return std::nullopt;
}

MindSpec::MindSpec(std::vector<ManifoldSpec> manifolds) : manifolds_(std::move(manifolds)) {
  std::set<std::string> seen;
  for (const auto& m : manifolds_) {
    require(seen.insert(m.name()).second, ErrorKind::invalid_argument,
            "duplicate manifold name '" + m.name() + "'");
  }
}

MarginMatrix linear_chain_margins(std::size_t state_count, double unit) {
  require(state_count >= 2, ErrorKind::invalid_argument, "linear chain needs at least 2 states");
  require(unit > 0.0 && std::isfinite(unit), ErrorKind::invalid_argument,
          "linear chain unit must be positive");
  const auto n = static_cast<Eigen::Index>(state_count);
  Matrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      m(i, j) = unit * static_cast<double>(i > j ? i - j : j - i);
  return MarginMatrix(std::move(m));
}

MarginMatrix layout_to_margins(const StateLayout& layout) {
  const auto n = static_cast<Eigen::Index>(layout.size());
  require(n >= 2, ErrorKind::invalid_argument, "layout needs at least 2 points");
  const auto& c = layout.coords();
  Matrix m = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const auto& a = c[static_cast<std::size_t>(i)];
      const auto& b = c[static_cast<std::size_t>(j)];
      m(i, j) = m(j, i) = std::hypot(a.x - b.x, a.y - b.y);
    }
  }
  return MarginMatrix(std::move(m));
}

namespace {

Matrix centered_gram(const MarginMatrix& margins) {
  const auto n = static_cast<Eigen::Index>(margins.size());
  const Matrix centering =
      Matrix::Identity(n, n) - Matrix::Constant(n, n, 1.0 / static_cast<double>(n));
  const Matrix squared = margins.entries().array().square().matrix();
  Matrix gram = -0.5 * centering * squared * centering;
  return 0.5 * (gram + gram.transpose());
}

}  // namespace

StateLayout classical_mds_layout(const MarginMatrix& margins) {
  const Matrix gram = centered_gram(margins);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(gram);
  const auto n = gram.rows();
  // Eigen sorts ascending; the two leading components are the last columns.
  std::vector<Point2> coords(static_cast<std::size_t>(n));
  for (int k = 0; k < 2 && k < n; ++k) {
    const Eigen::Index col = n - 1 - k;
    const double scale = std::sqrt(std::max(0.0, solver.eigenvalues()(col)));
    Vector axis = solver.eigenvectors().col(col);
    // Fix the sign so the output does not depend on the solver's convention.
    Eigen::Index pivot = 0;
    axis.cwiseAbs().maxCoeff(&pivot);
    if (axis(pivot) < 0) axis = -axis;
    for (Eigen::Index i = 0; i < n; ++i) {
      auto& p = coords[static_cast<std::size_t>(i)];
      (k == 0 ? p.x : p.y) = scale * axis(i);
    }
  }
  return StateLayout(std::move(coords));
}

CanonicalManifold parse_canonical(std::string_view name) {
  if (name == "love_linear") return CanonicalManifold::love_linear;
  if (name == "love_nonlinear") return CanonicalManifold::love_nonlinear;
  if (name == "joy") return CanonicalManifold::joy;
  fail(ErrorKind::invalid_argument, "unknown canonical manifold '" + std::string(name) + "'");
}

std::string_view to_string(CanonicalManifold which) {
  switch (which) {
    case CanonicalManifold::love_linear: return "love_linear";
    case CanonicalManifold::love_nonlinear: return "love_nonlinear";
    case CanonicalManifold::joy: return "joy";
  }
  return "unknown";
}

MarginMatrix canonical_margins(CanonicalManifold which) {
  switch (which) {
    case CanonicalManifold::love_linear:
      return MarginMatrix::from_rows({
          {0, 1, 2, 3},
          {1, 0, 1, 2},
          {2, 1, 0, 1},
          {3, 2, 1, 0},
      });
    case CanonicalManifold::love_nonlinear:
      return MarginMatrix::from_rows({
          {0, 1, 1.848, 2.404},
          {1, 0, 1, 1.848},
          {1.848, 1, 0, 1},
          {2.404, 1.848, 1, 0},
      });
    case CanonicalManifold::joy:
      return MarginMatrix::from_rows({
          {0, 1, 1.414, 2.414, 3.318, 3.318},
          {1, 0, 1, 1.788, 2.573, 2.761},
          {1.414, 1, 0, 1, 1.932, 1.932},
          {2.414, 1.788, 1, 0, 1, 1},
          {3.318, 2.573, 1.932, 1, 0, 1},
          {3.318, 2.761, 1.932, 1, 1, 0},
      });
  }
  fail(ErrorKind::invalid_argument, "unknown canonical manifold");
}

std::vector<std::string> canonical_state_names(CanonicalManifold which) {
  if (which == CanonicalManifold::joy)
    return {"suffered", "feared", "worried", "enjoying", "relaxed", "bored"};
  return {"hate", "dislike", "like", "love"};
}

StateLayout canonical_layout(CanonicalManifold which) {
  switch (which) {
    case CanonicalManifold::love_linear:
      return StateLayout({{0, 0}, {1, 0}, {2, 0}, {3, 0}});
    case CanonicalManifold::love_nonlinear: {
      // Unit chain turning by 45 degrees at each inner state (135 degree
      // interior angles), both ends bent to the same side.
      const double c = std::cos(std::numbers::pi / 4);
      const double s = std::sin(std::numbers::pi / 4);
      return StateLayout({{-c, s}, {0, 0}, {1, 0}, {1 + c, s}});
    }
    case CanonicalManifold::joy:
      return classical_mds_layout(canonical_margins(CanonicalManifold::joy));
  }
  fail(ErrorKind::invalid_argument, "unknown canonical manifold");
}

ManifoldSpec canonical_spec(CanonicalManifold which, std::size_t input_dim) {
  const std::string name = which == CanonicalManifold::joy ? "joy" : "love";
  return ManifoldSpec(name, canonical_state_names(which), canonical_margins(which), 2,
                      input_dim);
}

EmbeddabilityReport check_embeddability(const MarginMatrix& margins, std::size_t p) {
  require(p >= 1, ErrorKind::invalid_argument, "embedding dimension must be positive");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(centered_gram(margins),
                                               Eigen::EigenvaluesOnly);
  EmbeddabilityReport report;
  const auto& ev = solver.eigenvalues();
  for (Eigen::Index i = ev.size(); i-- > 0;) report.eigenvalues.push_back(ev(i));
  const double largest = report.eigenvalues.front();
  report.tolerance = 1e-6 * std::abs(largest);
  std::size_t positive = 0;
  bool negative = false;
  for (double v : report.eigenvalues) {
    if (v > report.tolerance) ++positive;
    if (v < -report.tolerance) negative = true;
  }
  report.embeddable = !negative && positive <= p;
  return report;
}

}  // namespace affect
