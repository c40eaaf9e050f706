#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "affect/data_io.hpp"

using namespace affect;
using Vector = Eigen::VectorXd;
namespace fs = std::filesystem;

namespace {

using Bytes = std::vector<std::uint8_t>;

Bytes be32(std::uint32_t v) {
  return {std::uint8_t(v >> 24), std::uint8_t(v >> 16), std::uint8_t(v >> 8), std::uint8_t(v)};
}

Bytes concat(std::initializer_list<Bytes> parts) {
  Bytes out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

Error error_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e;
  }
  FAIL("expected an affect::Error");
  return Error(ErrorKind::diverged, "");
}

fs::path scratch_dir() {
  auto dir = fs::temp_directory_path() / "affect_data_io_test";
  fs::create_directories(dir);
  return dir;
}

void write_bytes(const fs::path& path, const Bytes& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("minimal image file") {
  const Bytes file = concat({{0, 0, 8, 3}, be32(1), be32(2), be32(2), {0, 51, 255, 102}});
  const auto img = parse_idx_images(file);
  CHECK(img.count == 1);
  CHECK(img.rows == 2);
  CHECK(img.cols == 2);
  CHECK(img.pixels == Bytes{0, 51, 255, 102});
  CHECK(encode_idx_images(img) == file);

  const auto path = scratch_dir() / "one.idx3";
  write_bytes(path, file);
  CHECK(load_idx_images(path).pixels == img.pixels);
}

TEST_CASE("minimal label file") {
  const Bytes file = concat({{0, 0, 8, 1}, be32(3), {7, 0, 9}});
  CHECK(parse_idx_labels(file).labels == Bytes{7, 0, 9});
  CHECK(encode_idx_labels(parse_idx_labels(file)) == file);
  const auto path = scratch_dir() / "three.idx1";
  write_bytes(path, file);
  CHECK(load_idx_labels(path).labels == Bytes{7, 0, 9});
}

TEST_CASE("malformed IDX files") {
  const Bytes label_magic = concat({be32(2049), be32(1), be32(2), be32(2), {1, 2, 3, 4}});
  CHECK(error_of([&] { parse_idx_images(label_magic); }).kind() == ErrorKind::format_error);
  const Bytes image_magic = concat({be32(2051), be32(1), {1}});
  CHECK(error_of([&] { parse_idx_labels(image_magic); }).kind() == ErrorKind::format_error);

  const Bytes truncated = concat({be32(2051), be32(2), be32(2), be32(2), {1, 2, 3, 4, 5}});
  const auto e = error_of([&] { parse_idx_images(truncated); });
  CHECK(e.kind() == ErrorKind::format_error);
  CHECK(std::string(e.what()).find("expected 8") != std::string::npos);
  CHECK(std::string(e.what()).find("got 5") != std::string::npos);

  const Bytes trailing = concat({be32(2049), be32(1), {1, 2}});
  CHECK(error_of([&] { parse_idx_labels(trailing); }).kind() == ErrorKind::format_error);

  CHECK(error_of([] { parse_idx_labels(Bytes{}); }).kind() == ErrorKind::format_error);
  CHECK(error_of([] { parse_idx_images(Bytes{0, 0, 8}); }).kind() == ErrorKind::format_error);

  const auto empty = scratch_dir() / "empty.idx1";
  write_bytes(empty, {});
  CHECK(error_of([&] { load_idx_labels(empty); }).kind() == ErrorKind::format_error);
  CHECK(error_of([] { load_idx_labels("/nonexistent/labels"); }).kind() ==
        ErrorKind::format_error);
}

TEST_CASE("pairing images with labels") {
  IdxImages img{2, 1, 3, {0, 255, 51, 102, 0, 255}};
  const auto raw = pair_idx(img, IdxLabels{{4, 1}});
  CHECK(raw.signals.rows() == 2);
  CHECK(raw.signals.cols() == 3);
  CHECK(raw.signals(0, 1) == 1.0);
  CHECK(raw.signals(0, 2) == 51.0 / 255.0);
  CHECK(raw.labels == std::vector<int>{4, 1});
  CHECK(error_of([&] { pair_idx(img, IdxLabels{{1, 2, 3}}); }).kind() ==
        ErrorKind::consistency_error);
}

TEST_CASE("property: IDX round trip on random well-formed files") {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> dim(0, 6), byte(0, 255);
  for (int trial = 0; trial < 200; ++trial) {
    IdxImages img;
    img.count = static_cast<std::uint32_t>(dim(rng));
    img.rows = static_cast<std::uint32_t>(dim(rng));
    img.cols = static_cast<std::uint32_t>(dim(rng));
    img.pixels.resize(std::size_t(img.count) * img.rows * img.cols);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(byte(rng));
    const Bytes file = encode_idx_images(img);
    CHECK(file.size() == 16 + img.pixels.size());
    CHECK(encode_idx_images(parse_idx_images(file)) == file);

    IdxLabels lab;
    lab.labels.resize(static_cast<std::size_t>(dim(rng)) * 3);
    for (auto& l : lab.labels) l = static_cast<std::uint8_t>(byte(rng));
    const Bytes lfile = encode_idx_labels(lab);
    CHECK(encode_idx_labels(parse_idx_labels(lfile)) == lfile);
  }
}

TEST_CASE("assigning digits to states") {
  RawDataset raw;
  raw.signals = Matrix(10, 2);
  for (int i = 0; i < 10; ++i) raw.signals.row(i) << i, -i;
  raw.labels = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  const StateAssignment digits({{0, 0}, {1, 1}, {2, 2}, {3, 3}});
  const auto data = assign_states(raw, digits);
  CHECK(data.state_count == 4);
  CHECK(data.size() == 4);
  CHECK(data.labels == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(data.signals(3, 0) == 3);
  CHECK(data.provenance == Provenance::idx);

  const StateAssignment single(std::map<int, std::size_t>{{5, 0}});
  CHECK(assign_states(raw, single).state_count == 1);

  // A mapped state without samples.
  const StateAssignment gap({{0, 0}, {42, 1}});
  CHECK(error_of([&] { assign_states(raw, gap); }).kind() == ErrorKind::insufficient_data);
  // Mapped ids must be contiguous from zero.
  CHECK(error_of([] { StateAssignment(std::map<int, std::size_t>{{0, 0}, {1, 2}}); }).kind() == ErrorKind::invalid_argument);
}

TEST_CASE("property: assignment never invents samples") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> digit(0, 9);
  for (int trial = 0; trial < 100; ++trial) {
    RawDataset raw;
    const int n = 30 + trial;
    raw.signals = Matrix::Random(n, 3);
    for (int i = 0; i < n; ++i) raw.labels.push_back(digit(rng));
    // every digit present so the mapping always succeeds
    for (int d = 0; d < 10; ++d) raw.labels[static_cast<std::size_t>(d)] = d;
    std::map<int, std::size_t> m;
    const std::size_t s = 2 + static_cast<std::size_t>(trial % 5);
    for (std::size_t k = 0; k < s; ++k) m[static_cast<int>((k * 3 + trial) % 10)] = k;
    const auto data = assign_states(raw, StateAssignment(m));
    CHECK(data.size() <= raw.labels.size());
    const auto counts = data.state_counts();
    std::size_t total = 0;
    for (auto c : counts) total += c;
    CHECK(total == data.size());
  }
}

TEST_CASE("identity assignment leaves a synthetic dataset unchanged") {
  const auto synth = synth_gaussian_dataset(3, 5, 4, 2.0, 8);
  RawDataset raw{synth.signals, {}};
  for (auto l : synth.labels) raw.labels.push_back(static_cast<int>(l));
  const auto back = assign_states(raw, StateAssignment::identity(3));
  CHECK(back.signals == synth.signals);
  CHECK(back.labels == synth.labels);
}

TEST_CASE("synthetic Gaussian clusters") {
  const auto a = synth_gaussian_dataset(4, 500, 20, 6.0, 1);
  const auto b = synth_gaussian_dataset(4, 500, 20, 6.0, 1);
  CHECK(a.signals == b.signals);
  CHECK(a.labels == b.labels);
  CHECK(a.size() == 2000);
  CHECK(a.dim() == 20);
  CHECK(a.state_counts() == std::vector<std::size_t>(4, 500));
  CHECK(synth_gaussian_dataset(4, 500, 20, 6.0, 2).signals != a.signals);

  // Every coordinate of each empirical mean within 5 sigma / sqrt(n) of the
  // configured centre separation * e_i.
  for (std::size_t s = 0; s < 4; ++s) {
    Vector centre = Vector::Zero(20);
    centre(static_cast<Eigen::Index>(s)) = 6.0;
    Vector mean = Vector::Zero(20);
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a.labels[i] == s) mean += a.signals.row(static_cast<Eigen::Index>(i)).transpose();
    mean /= 500.0;
    CHECK((mean - centre).cwiseAbs().maxCoeff() <= 5.0 / std::sqrt(500.0));
    for (std::size_t t = 0; t < s; ++t) {
      Vector other = Vector::Zero(20);
      other(static_cast<Eigen::Index>(t)) = 6.0;
      CHECK((centre - other).norm() == doctest::Approx(6 * std::sqrt(2.0)));
    }
  }

  // Zero separation: both states share one distribution.
  const auto flat = synth_gaussian_dataset(2, 2000, 2, 0.0, 3);
  const Vector m0 = flat.signals.topRows(2000).colwise().mean();
  const Vector m1 = flat.signals.bottomRows(2000).colwise().mean();
  CHECK((m0 - m1).cwiseAbs().maxCoeff() < 10 / std::sqrt(2000.0));

  CHECK(error_of([] { synth_gaussian_dataset(5, 10, 4, 1.0, 0); }).kind() ==
        ErrorKind::invalid_argument);
  CHECK(error_of([] { synth_gaussian_dataset(1, 10, 4, 1.0, 0); }).kind() ==
        ErrorKind::invalid_argument);
}

TEST_CASE("stratified holdout") {
  const auto data = synth_gaussian_dataset(3, 50, 3, 4.0, 2);
  const auto [train, test] = split_holdout(data, 0.2, 9);
  CHECK(train.size() + test.size() == data.size());
  CHECK(test.state_counts() == std::vector<std::size_t>(3, 10));
  const auto [t2, h2] = split_holdout(data, 0.2, 9);
  CHECK(t2.signals == train.signals);
  CHECK(h2.labels == test.labels);
}

TEST_CASE("CSV export and import") {
  const auto data = synth_gaussian_dataset(2, 3, 2, 1.5, 4);
  const std::string csv = dataset_to_csv(data);
  CHECK(csv.rfind("label,x0,x1\n", 0) == 0);
  const auto back = dataset_from_csv(csv);
  CHECK(back.labels == data.labels);
  CHECK(back.signals == data.signals);
  CHECK(back.state_count == 2);

  CHECK(read_matrix_csv("a,b\n1,2\n3,4\n") == (Matrix(2, 2) << 1, 2, 3, 4).finished());
  CHECK(error_of([] { read_matrix_csv("1,2\nx,y\n"); }).kind() == ErrorKind::format_error);
  CHECK(error_of([] { read_matrix_csv("1,2\n3\n"); }).kind() == ErrorKind::format_error);

  const auto path = scratch_dir() / "nested" / "d.csv";
  write_text_file(path, csv);
  CHECK(read_text_file(path) == csv);
}

TEST_CASE("dataset validation") {
  auto data = synth_gaussian_dataset(2, 3, 2, 1.5, 4);
  data.validate();
  data.labels[0] = 5;
  CHECK(error_of([&] { data.validate(); }).kind() == ErrorKind::invalid_argument);
  data = synth_gaussian_dataset(2, 3, 2, 1.5, 4);
  data.state_count = 3;
  CHECK(error_of([&] { data.validate(); }).kind() == ErrorKind::insufficient_data);
}
