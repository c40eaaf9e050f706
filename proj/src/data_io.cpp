#include "affect/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <sstream>

namespace affect {

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::string hex32(std::uint32_t v) {
  std::ostringstream os;
  os << "0x" << std::hex;
  os.width(8);
  os.fill('0');
  os << v;
  return os.str();
}

void check_header(std::span<const std::uint8_t> bytes, std::size_t header_size,
                  std::uint32_t magic, const char* what) {
  require(bytes.size() >= header_size, ErrorKind::format_error,
          std::string(what) + " file truncated: header needs " + std::to_string(header_size) +
              " bytes, got " + std::to_string(bytes.size()));
  const std::uint32_t found = read_be32(bytes, 0);
  require(found == magic, ErrorKind::format_error,
          std::string(what) + " file has magic " + hex32(found) + ", expected " + hex32(magic));
}

void check_payload(std::size_t expected, std::size_t actual, const char* what) {
  require(actual == expected, ErrorKind::format_error,
          std::string(what) + " payload size mismatch: expected " + std::to_string(expected) +
              " bytes, got " + std::to_string(actual));
}

std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::format_error,
          "cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

bool parse_double(std::string_view token, double& out) {
  while (!token.empty() && (token.front() == ' ' || token.front() == '\t')) token.remove_prefix(1);
  while (!token.empty() &&
         (token.back() == ' ' || token.back() == '\t' || token.back() == '\r'))
    token.remove_suffix(1);
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  if (token.empty()) return false;
  auto res = std::from_chars(token.data(), token.data() + token.size(), out);
  return res.ec == std::errc() && res.ptr == token.data() + token.size();
}

std::vector<std::vector<double>> parse_rows(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::vector<double> row;
    bool numeric = true;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      const std::string_view token(line.data() + start,
                                   (comma == std::string::npos ? line.size() : comma) - start);
      double v = 0.0;
      if (!parse_double(token, v)) {
        numeric = false;
        break;
      }
      row.push_back(v);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (!numeric) {
      require(rows.empty() && line_no == 1, ErrorKind::format_error,
              "non-numeric CSV content on line " + std::to_string(line_no));
      continue;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      fail(ErrorKind::format_error, "CSV line " + std::to_string(line_no) + " has " +
                                        std::to_string(row.size()) + " fields, expected " +
                                        std::to_string(rows.front().size()));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::vector<std::size_t> SignalDataset::state_counts() const {
  std::vector<std::size_t> counts(state_count, 0);
  for (std::size_t l : labels)
    if (l < state_count) ++counts[l];
  return counts;
}

void SignalDataset::validate() const {
  require(static_cast<std::size_t>(signals.rows()) == labels.size(), ErrorKind::consistency_error,
          "dataset has " + std::to_string(signals.rows()) + " signals but " +
              std::to_string(labels.size()) + " labels");
  for (std::size_t l : labels)
    require(l < state_count, ErrorKind::invalid_argument,
            "label " + std::to_string(l) + " outside [0, " + std::to_string(state_count) + ")");
  const auto counts = state_counts();
  for (std::size_t s = 0; s < counts.size(); ++s)
    require(counts[s] >= 1, ErrorKind::insufficient_data,
            "state " + std::to_string(s) + " has no samples");
  require(signals.allFinite(), ErrorKind::invalid_argument, "dataset contains non-finite values");
}

IdxImages parse_idx_images(std::span<const std::uint8_t> bytes) {
  check_header(bytes, 16, kIdxImageMagic, "IDX image");
  IdxImages images;
  images.count = read_be32(bytes, 4);
  images.rows = read_be32(bytes, 8);
  images.cols = read_be32(bytes, 12);
  const std::uint64_t expected =
      std::uint64_t{images.count} * std::uint64_t{images.rows} * std::uint64_t{images.cols};
  check_payload(static_cast<std::size_t>(expected), bytes.size() - 16, "IDX image");
  images.pixels.assign(bytes.begin() + 16, bytes.end());
  return images;
}

IdxLabels parse_idx_labels(std::span<const std::uint8_t> bytes) {
  check_header(bytes, 8, kIdxLabelMagic, "IDX label");
  const std::uint32_t count = read_be32(bytes, 4);
  check_payload(count, bytes.size() - 8, "IDX label");
  return {std::vector<std::uint8_t>(bytes.begin() + 8, bytes.end())};
}

std::vector<std::uint8_t> encode_idx_images(const IdxImages& images) {
  std::vector<std::uint8_t> out;
  out.reserve(16 + images.pixels.size());
  write_be32(out, kIdxImageMagic);
  write_be32(out, images.count);
  write_be32(out, images.rows);
  write_be32(out, images.cols);
  out.insert(out.end(), images.pixels.begin(), images.pixels.end());
  return out;
}

std::vector<std::uint8_t> encode_idx_labels(const IdxLabels& labels) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + labels.labels.size());
  write_be32(out, kIdxLabelMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.labels.size()));
  out.insert(out.end(), labels.labels.begin(), labels.labels.end());
  return out;
}

IdxImages load_idx_images(const std::filesystem::path& path) {
  return parse_idx_images(read_binary_file(path));
}

IdxLabels load_idx_labels(const std::filesystem::path& path) {
  return parse_idx_labels(read_binary_file(path));
}

RawDataset pair_idx(const IdxImages& images, const IdxLabels& labels) {
  require(images.count == labels.labels.size(), ErrorKind::consistency_error,
          "image file holds " + std::to_string(images.count) + " samples but label file holds " +
              std::to_string(labels.labels.size()));
  const std::size_t d = std::size_t{images.rows} * images.cols;
  RawDataset raw;
  raw.signals.resize(images.count, static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < images.count; ++i)
    for (std::size_t k = 0; k < d; ++k)
      raw.signals(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          images.pixels[i * d + k] / 255.0;
  raw.labels.assign(labels.labels.begin(), labels.labels.end());
  return raw;
}

StateAssignment::StateAssignment(std::map<int, std::size_t> mapping)
    : mapping_(std::move(mapping)) {
  require(!mapping_.empty(), ErrorKind::invalid_argument, "state assignment is empty");
  std::vector<bool> used;
  for (const auto& [raw, state] : mapping_) {
    if (state >= used.size()) used.resize(state + 1, false);
    used[state] = true;
  }
  for (std::size_t s = 0; s < used.size(); ++s)
    require(used[s], ErrorKind::invalid_argument,
            "state assignment skips state id " + std::to_string(s));
  state_count_ = used.size();
}

StateAssignment StateAssignment::identity(std::size_t state_count) {
  std::map<int, std::size_t> m;
  for (std::size_t s = 0; s < state_count; ++s) m[static_cast<int>(s)] = s;
  return StateAssignment(std::move(m));
}

SignalDataset assign_states(const RawDataset& raw, const StateAssignment& assignment) {
  require(static_cast<std::size_t>(raw.signals.rows()) == raw.labels.size(),
          ErrorKind::consistency_error, "raw dataset signal/label count mismatch");
  std::vector<Eigen::Index> keep;
  SignalDataset out;
  out.state_count = assignment.state_count();
  out.provenance = Provenance::idx;
  for (std::size_t i = 0; i < raw.labels.size(); ++i) {
    auto it = assignment.mapping().find(raw.labels[i]);
    if (it == assignment.mapping().end()) continue;
    keep.push_back(static_cast<Eigen::Index>(i));
    out.labels.push_back(it->second);
  }
  out.signals.resize(static_cast<Eigen::Index>(keep.size()), raw.signals.cols());
  for (std::size_t k = 0; k < keep.size(); ++k)
    out.signals.row(static_cast<Eigen::Index>(k)) = raw.signals.row(keep[k]);
  const auto counts = out.state_counts();
  for (std::size_t s = 0; s < counts.size(); ++s)
    require(counts[s] > 0, ErrorKind::insufficient_data,
            "state " + std::to_string(s) + " received no samples from the assignment");
  return out;
}

SignalDataset synth_gaussian_dataset(std::size_t state_count, std::size_t per_state,
                                     std::size_t dim, double separation, std::uint64_t seed) {
  require(state_count >= 2, ErrorKind::invalid_argument, "synthetic dataset needs >= 2 states");
  require(dim >= 1, ErrorKind::invalid_argument, "synthetic dataset needs dim >= 1");
  require(dim >= state_count, ErrorKind::invalid_argument,
          "dim " + std::to_string(dim) + " cannot hold " + std::to_string(state_count) +
              " orthogonal centres");
  require(per_state >= 1, ErrorKind::invalid_argument, "per_state must be positive");
  require(std::isfinite(separation) && separation >= 0.0, ErrorKind::invalid_argument,
          "separation must be finite and non-negative");

  SignalDataset out;
  out.state_count = state_count;
  out.provenance = Provenance::synthetic;
  const auto n = static_cast<Eigen::Index>(state_count * per_state);
  out.signals.resize(n, static_cast<Eigen::Index>(dim));
  out.labels.reserve(static_cast<std::size_t>(n));
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::Index row = 0;
  for (std::size_t s = 0; s < state_count; ++s) {
    for (std::size_t k = 0; k < per_state; ++k, ++row) {
      for (Eigen::Index c = 0; c < out.signals.cols(); ++c) out.signals(row, c) = gauss(engine);
      out.signals(row, static_cast<Eigen::Index>(s)) += separation;
      out.labels.push_back(s);
    }
  }
  return out;
}

std::pair<SignalDataset, SignalDataset> split_holdout(const SignalDataset& data,
                                                      double holdout_fraction,
                                                      std::uint64_t seed) {
  require(holdout_fraction >= 0.0 && holdout_fraction < 1.0, ErrorKind::invalid_argument,
          "holdout fraction must lie in [0, 1)");
  std::vector<std::vector<std::size_t>> by_state(data.state_count);
  for (std::size_t i = 0; i < data.size(); ++i) by_state[data.labels[i]].push_back(i);

  std::mt19937_64 engine(seed);
  std::vector<bool> held(data.size(), false);
  for (auto& members : by_state) {
    std::shuffle(members.begin(), members.end(), engine);
    auto take = static_cast<std::size_t>(
        std::llround(holdout_fraction * static_cast<double>(members.size())));
    if (holdout_fraction > 0.0 && members.size() >= 2) take = std::max<std::size_t>(take, 1);
    take = std::min(take, members.size() > 0 ? members.size() - 1 : 0);
    for (std::size_t k = 0; k < take; ++k) held[members[k]] = true;
  }

  auto gather = [&](bool want) {
    SignalDataset part;
    part.state_count = data.state_count;
    part.provenance = data.provenance;
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < data.size(); ++i)
      if (held[i] == want) rows.push_back(static_cast<Eigen::Index>(i));
    part.signals.resize(static_cast<Eigen::Index>(rows.size()), data.signals.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      part.signals.row(static_cast<Eigen::Index>(k)) = data.signals.row(rows[k]);
      part.labels.push_back(data.labels[static_cast<std::size_t>(rows[k])]);
    }
    return part;
  };
  return {gather(false), gather(true)};
}

std::string dataset_to_csv(const SignalDataset& data) {
  std::string out = "label";
  for (std::size_t c = 0; c < data.dim(); ++c) out += ",x" + std::to_string(c);
  out += '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    out += std::to_string(data.labels[i]);
    for (std::size_t c = 0; c < data.dim(); ++c) {
      out += ',';
      out += format_double(data.signals(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)));
    }
    out += '\n';
  }
  return out;
}

SignalDataset dataset_from_csv(const std::string& text, std::size_t state_count) {
  const auto rows = parse_rows(text);
  require(!rows.empty(), ErrorKind::format_error, "dataset CSV has no rows");
  require(rows.front().size() >= 2, ErrorKind::format_error,
          "dataset CSV needs a label column and at least one signal column");
  SignalDataset out;
  out.provenance = Provenance::csv;
  out.signals.resize(static_cast<Eigen::Index>(rows.size()),
                     static_cast<Eigen::Index>(rows.front().size() - 1));
  std::size_t max_label = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double label = rows[i][0];
    require(label >= 0 && label == std::floor(label), ErrorKind::format_error,
            "dataset CSV row " + std::to_string(i + 1) + " has a non-integer label");
    out.labels.push_back(static_cast<std::size_t>(label));
    max_label = std::max(max_label, out.labels.back());
    for (std::size_t c = 1; c < rows[i].size(); ++c)
      out.signals(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c - 1)) = rows[i][c];
  }
  out.state_count = state_count > 0 ? state_count : max_label + 1;
  return out;
}

Matrix read_matrix_csv(const std::string& text) {
  const auto rows = parse_rows(text);
  require(!rows.empty(), ErrorKind::format_error, "CSV has no numeric rows");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < rows[i].size(); ++c)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
  return m;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::format_error, "cannot open '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::format_error,
          "cannot write '" + path.string() + "'");
  out << text;
}

}  // namespace affect
