#pragma once

// Signal datasets: IDX (MNIST) containers, raw-label to state assignment, a
// synthetic Gaussian-cluster generator and CSV export.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "affect/error.hpp"

namespace affect {

using Matrix = Eigen::MatrixXd;

enum class Provenance { idx, synthetic, csv };

/// Rows of `signals` are samples; labels are state ids in [0, state_count).
struct SignalDataset {
  Matrix signals;
  std::vector<std::size_t> labels;
  std::size_t state_count = 0;
  Provenance provenance = Provenance::synthetic;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(signals.cols()); }
  std::vector<std::size_t> state_counts() const;
  /// Labels in range, at least one sample per state, finite signals.
  void validate() const;
};

struct IdxImages {
  std::uint32_t count = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<std::uint8_t> pixels;  // count * rows * cols, row-major per image
};

struct IdxLabels {
  std::vector<std::uint8_t> labels;
};

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

IdxImages parse_idx_images(std::span<const std::uint8_t> bytes);
IdxLabels parse_idx_labels(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_idx_images(const IdxImages& images);
std::vector<std::uint8_t> encode_idx_labels(const IdxLabels& labels);

IdxImages load_idx_images(const std::filesystem::path& path);
IdxLabels load_idx_labels(const std::filesystem::path& path);

/// Signals with their original (unassigned) labels.
struct RawDataset {
  Matrix signals;
  std::vector<int> labels;
};

/// Pixels scaled to [0, 1]; each image flattened row-major. Throws
/// consistency-error when the two files disagree on the sample count.
RawDataset pair_idx(const IdxImages& images, const IdxLabels& labels);

/// Partial map from raw label to state id. Mapped ids must cover [0, s).
class StateAssignment {
public:
  explicit StateAssignment(std::map<int, std::size_t> mapping);
  static StateAssignment identity(std::size_t state_count);

  const std::map<int, std::size_t>& mapping() const noexcept { return mapping_; }
  std::size_t state_count() const noexcept { return state_count_; }

private:
  std::map<int, std::size_t> mapping_;
  std::size_t state_count_ = 0;
};

/// Drops unmapped samples and relabels the rest. Throws insufficient-data if
/// some state ends up without samples.
SignalDataset assign_states(const RawDataset& raw, const StateAssignment& assignment);

/// State i is an isotropic unit-variance Gaussian centred at separation * e_i.
/// Requires dim >= state_count so the centres are distinct and orthogonal.
SignalDataset synth_gaussian_dataset(std::size_t state_count, std::size_t per_state,
                                     std::size_t dim, double separation, std::uint64_t seed);

/// Stratified split: each state contributes round(fraction * n_i) samples
/// (at least one when n_i >= 2) to the second dataset.
std::pair<SignalDataset, SignalDataset> split_holdout(const SignalDataset& data,
                                                      double holdout_fraction,
                                                      std::uint64_t seed);

/// "label,x0,...,x{d-1}" with a header line.
std::string dataset_to_csv(const SignalDataset& data);
SignalDataset dataset_from_csv(const std::string& text, std::size_t state_count = 0);

/// Rows of comma-separated numbers; a leading non-numeric header line is skipped.
Matrix read_matrix_csv(const std::string& text);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace affect
