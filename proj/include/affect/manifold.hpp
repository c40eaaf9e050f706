#pragma once

// States, margin matrices, manifold/mind specifications and the planar layout
// geometry used to design margin matrices.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "affect/error.hpp"

namespace affect {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct AffectiveState {
  std::size_t id = 0;
  std::string name;
};

/// Symmetric matrix of desired inter-state distances with a zero diagonal and
/// strictly positive off-diagonal entries.
class MarginMatrix {
public:
  /// Validates symmetry (exact), zero diagonal and positive off-diagonal.
  explicit MarginMatrix(Matrix entries);
  static MarginMatrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t size() const noexcept { return static_cast<std::size_t>(entries_.rows()); }
  double operator()(std::size_t i, std::size_t j) const {
    return entries_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  const Matrix& entries() const noexcept { return entries_; }
  std::vector<std::vector<double>> rows() const;
  double min_off_diagonal() const;

  bool operator==(const MarginMatrix& other) const { return entries_ == other.entries_; }

private:
  Matrix entries_;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

class StateLayout {
public:
  explicit StateLayout(std::vector<Point2> coords);

  std::size_t size() const noexcept { return coords_.size(); }
  const std::vector<Point2>& coords() const noexcept { return coords_; }

private:
  std::vector<Point2> coords_;
};

class ManifoldSpec {
public:
  ManifoldSpec(std::string name, const std::vector<std::string>& state_names,
               MarginMatrix margins, std::size_t embedding_dim, std::size_t input_dim);

  const std::string& name() const noexcept { return name_; }
  const std::vector<AffectiveState>& states() const noexcept { return states_; }
  std::size_t state_count() const noexcept { return states_.size(); }
  std::vector<std::string> state_names() const;
  std::optional<std::size_t> state_id(std::string_view name) const;
  const MarginMatrix& margins() const noexcept { return margins_; }
  std::size_t embedding_dim() const noexcept { return embedding_dim_; }
  std::size_t input_dim() const noexcept { return input_dim_; }

private:
  std::string name_;
  std::vector<AffectiveState> states_;
  MarginMatrix margins_;
  std::size_t embedding_dim_;
  std::size_t input_dim_;
};

/// A collection of manifolds. State names may repeat across manifolds.
class MindSpec {
public:
  explicit MindSpec(std::vector<ManifoldSpec> manifolds);

  const std::vector<ManifoldSpec>& manifolds() const noexcept { return manifolds_; }
  std::size_t size() const noexcept { return manifolds_.size(); }

private:
  std::vector<ManifoldSpec> manifolds_;
};

/// entries[i][j] = unit * |i - j|.
MarginMatrix linear_chain_margins(std::size_t state_count, double unit);

/// Pairwise Euclidean distances of the layout points.
MarginMatrix layout_to_margins(const StateLayout& layout);

/// Planar coordinates whose distances approximate `margins`, from classical
/// multidimensional scaling onto the two leading eigenvectors of the
/// double-centered squared-distance matrix. Negative eigenvalues are clipped.
StateLayout classical_mds_layout(const MarginMatrix& margins);

enum class CanonicalManifold { love_linear, love_nonlinear, joy };

CanonicalManifold parse_canonical(std::string_view name);
std::string_view to_string(CanonicalManifold which);

/// Fixed margin matrices of the canonical manifolds.
MarginMatrix canonical_margins(CanonicalManifold which);
std::vector<std::string> canonical_state_names(CanonicalManifold which);

/// Layout generating each canonical matrix: a straight unit chain, the unit
/// chain bent by 135 degrees at both inner states, and the classical MDS
/// reconstruction of the joy matrix.
StateLayout canonical_layout(CanonicalManifold which);

/// Canonical manifold with a planar embedding (p = 2).
ManifoldSpec canonical_spec(CanonicalManifold which, std::size_t input_dim);

struct EmbeddabilityReport {
  bool embeddable = false;
  std::vector<double> eigenvalues;  // descending
  double tolerance = 0.0;
};

/// Whether the margins are realizable as Euclidean distances in R^p, judged by
/// the spectrum of G = -1/2 J D^2 J with tolerance 1e-6 times its largest
/// eigenvalue.
EmbeddabilityReport check_embeddability(const MarginMatrix& margins, std::size_t p);

}  // namespace affect
