#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <cstdlib>
#include <set>
#include <numeric>
#include <vector>

#include "sybilwall/data.hpp"
#include "sybilwall/errors.hpp"
#include "sybilwall/rng.hpp"

using namespace sybilwall;
namespace fs = std::filesystem;

namespace {

using Row = std::pair<std::vector<double>, ClassLabel>;

std::multiset<Row> as_multiset(const std::vector<LabeledDataset>& parts) {
  std::multiset<Row> out;
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      auto r = p.row(i);
      out.emplace(std::vector<double>(r.begin(), r.end()), p.label(i));
    }
  }
  return out;
}

LabeledDataset labels_only(const std::vector<ClassLabel>& labels, std::size_t classes) {
  LabeledDataset d(2, classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double row[2] = {0.1 * static_cast<double>(i), 0.5};
    d.add(row, labels[i]);
  }
  return d;
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

struct IdxFixture {
  fs::path dir;
  std::vector<std::uint8_t> images;
  std::vector<std::uint8_t> labels;

  IdxFixture() : dir(fs::temp_directory_path() / "sybilwall_idx_fixture") {
    fs::create_directories(dir);
    put_be32(images, 0x00000803);
    put_be32(images, 4);
    put_be32(images, 28);
    put_be32(images, 28);
    for (std::size_t i = 0; i < 4 * 784; ++i) images.push_back(static_cast<std::uint8_t>((i * 7) % 256));
    put_be32(labels, 0x00000801);
    put_be32(labels, 4);
    for (std::uint8_t l : {3, 0, 9, 3}) labels.push_back(l);
  }
  ~IdxFixture() { fs::remove_all(dir); }

  LabeledDataset load() {
    write_bytes(dir / "img", images);
    write_bytes(dir / "lbl", labels);
    return load_idx(dir / "img", dir / "lbl");
  }
};

}  // namespace

TEST_SUITE("data") {

TEST_CASE("blobs have one sample per label at per_class 1") {
  const auto d = synth_blobs(2, 1, 2, 0.1, 5);
  REQUIRE(d.size() == 2);
  CHECK(d.label(0) == 0);
  CHECK(d.label(1) == 1);
}

TEST_CASE("blobs are deterministic, clipped and balanced") {
  const auto a = synth_blobs(10, 30, 16, 0.3, 9);
  CHECK(a == synth_blobs(10, 30, 16, 0.3, 9));
  CHECK_FALSE(a == synth_blobs(10, 30, 16, 0.3, 10));
  CHECK(std::all_of(a.features().begin(), a.features().end(), [](double v) { return v >= 0 && v <= 1; }));
  for (ClassLabel c = 0; c < 10; ++c) CHECK(std::count(a.labels().begin(), a.labels().end(), c) == 30);
}

TEST_CASE("tight blobs are learnable by softmax") {
  const auto d = synth_blobs(10, 100, 64, 0.05, 3);
  const Model m = Model::initialize({64, 10, 0}, 0.01, 1);
  CHECK(evaluate_accuracy(train_sgd(m, d, {0.05, 50, 8, 2}), d) >= 0.9);
}

TEST_CASE("stratified split takes the first rows of every class") {
  const auto d = synth_blobs(3, 10, 4, 0.1, 1);
  const auto [train, test] = stratified_split(d, 4);
  CHECK(test.size() == 12);
  CHECK(train.size() == 18);
  for (ClassLabel c = 0; c < 3; ++c) CHECK(std::count(test.labels().begin(), test.labels().end(), c) == 4);
  CHECK(as_multiset({train, test}) == as_multiset({d}));
}

TEST_CASE("IDX fixture round trip") {
  IdxFixture fx;
  const auto d = fx.load();
  REQUIRE(d.size() == 4);
  CHECK(d.dim() == 784);
  CHECK(d.labels() == std::vector<ClassLabel>{3, 0, 9, 3});
  CHECK(d.classes() == 10);
  for (std::size_t i = 0; i < 4 * 784; i += 97) {
    CHECK(d.features()[i] == static_cast<double>((i * 7) % 256) / 255.0);
  }
}

TEST_CASE("IDX errors carry byte offsets") {
  SUBCASE("bad image magic") {
    IdxFixture fx;
    fx.images[3] = 0x01;
    try {
      fx.load();
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.offset() == 0);
    }
  }
  SUBCASE("mismatched counts") {
    IdxFixture fx;
    fx.labels[7] = 5;
    fx.labels.push_back(1);
    try {
      fx.load();
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.offset() == 4);
    }
  }
  SUBCASE("truncated pixels") {
    IdxFixture fx;
    fx.images.resize(16 + 3 * 784);
    try {
      fx.load();
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.offset() == 16 + 3 * 784);
    }
  }
  SUBCASE("truncated header") {
    IdxFixture fx;
    fx.labels.resize(6);
    try {
      fx.load();
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.offset() == 4);
    }
  }
}

TEST_CASE("MNIST test file has 10000 samples when present") {
  const char* dir = std::getenv("SYBILWALL_MNIST_DIR");
  if (dir == nullptr || !fs::exists(fs::path(dir) / "t10k-images-idx3-ubyte")) {
    MESSAGE("SYBILWALL_MNIST_DIR not set; skipped");
    return;
  }
  const auto d = load_idx(fs::path(dir) / "t10k-images-idx3-ubyte", fs::path(dir) / "t10k-labels-idx1-ubyte");
  CHECK(d.size() == 10000);
}

TEST_CASE("single-node partition holds the whole input") {
  const auto d = synth_blobs(4, 10, 3, 0.2, 1);
  const auto parts = dirichlet_partition(d, {1, 0.1, 5});
  REQUIRE(parts.size() == 1);
  CHECK(as_multiset(parts) == as_multiset({d}));
}

TEST_CASE("partitions conserve the sample multiset and are deterministic") {
  const auto d = synth_blobs(10, 20, 3, 0.2, 2);
  for (double alpha : {0.05, 0.1, 1.0, 100.0}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const PartitionSpec spec{7, alpha, seed};
      const auto parts = dirichlet_partition(d, spec);
      CHECK(parts.size() == 7);
      CHECK(as_multiset(parts) == as_multiset({d}));
      CHECK(parts == dirichlet_partition(d, spec));
    }
  }
}

TEST_CASE("huge alpha approaches uniform class fractions") {
  const auto d = synth_blobs(10, 1000, 2, 0.2, 2);
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto frac = class_fractions(dirichlet_partition(d, {10, 1e6, seed}), 10);
    for (const auto& row : frac) {
      for (double f : row) CHECK(std::abs(f - 0.1) <= 0.02);
    }
  }
}

TEST_CASE("small alpha fraction rows sum to one") {
  const auto d = synth_blobs(10, 50, 2, 0.2, 2);
  const auto frac = class_fractions(dirichlet_partition(d, {10, 0.1, 3}), 10);
  for (const auto& row : frac) CHECK(std::accumulate(row.begin(), row.end(), 0.0) == doctest::Approx(1.0));
}

TEST_CASE("partition rejects bad specs") {
  const auto d = synth_blobs(2, 2, 2, 0.2, 2);
  CHECK_THROWS_AS(dirichlet_partition(d, {0, 0.1, 1}), InvalidInput);
  CHECK_THROWS_AS(dirichlet_partition(d, {2, 0.0, 1}), InvalidInput);
  CHECK_THROWS_AS(dirichlet_partition(LabeledDataset(2, 2), {2, 0.1, 1}), InvalidInput);
}

TEST_CASE("label flip swaps the two classes") {
  const auto d = labels_only({0, 1, 2}, 5);
  const auto f = apply_label_flip(d, 0, 1);
  CHECK(f.labels() == std::vector<ClassLabel>{1, 0, 2});
  CHECK(f.features() == d.features());
  CHECK(apply_label_flip(d, 3, 4) == d);
  CHECK_THROWS_AS(apply_label_flip(d, 0, 7), InvalidInput);
  CHECK_THROWS_AS(apply_label_flip(d, 2, 2), InvalidInput);
}

TEST_CASE("label flip is an involution") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ClassLabel> labels(30);
    for (auto& l : labels) l = static_cast<ClassLabel>(rng() % 6);
    const auto d = labels_only(labels, 6);
    for (ClassLabel a = 0; a < 6; ++a) {
      for (ClassLabel b = 0; b < 6; ++b) {
        if (a != b) CHECK(apply_label_flip(apply_label_flip(d, a, b), a, b) == d);
      }
    }
  }
}

TEST_CASE("backdoor stamps the pattern and relabels everything") {
  const auto d = synth_blobs(6, 5, 4, 0.2, 1);
  const auto plain = apply_backdoor(d, {}, 5);
  CHECK(plain.features() == d.features());
  CHECK(std::all_of(plain.labels().begin(), plain.labels().end(), [](ClassLabel l) { return l == 5; }));

  const auto stamped = apply_backdoor(d, {{0, 1.0}}, 2);
  CHECK(stamped.size() == d.size());
  for (std::size_t i = 0; i < stamped.size(); ++i) {
    CHECK(stamped.row(i)[0] == 1.0);
    CHECK(stamped.row(i)[1] == d.row(i)[1]);
  }
  CHECK_THROWS_AS(apply_backdoor(d, {{4, 1.0}}, 2), InvalidInput);
  CHECK_THROWS_AS(apply_backdoor(d, {}, 6), InvalidInput);
}

TEST_CASE("default backdoor pattern") {
  const auto square = default_backdoor_pattern(64);
  REQUIRE(square.size() == 9);
  CHECK(square[3].index == 8);
  CHECK(square[8].index == 18);
  CHECK(default_backdoor_pattern(5).size() == 5);
}

TEST_CASE("attack score of an always-t2 model on a label-flip segment") {
  // 10 samples: 3 of class 1 (t1), 2 of class 7 (t2), the rest elsewhere.
  const auto test = labels_only({1, 7, 1, 0, 2, 1, 7, 3, 4, 5}, 10);
  const Architecture arch{2, 10, 0};
  ParamVector p(arch.param_count());
  p[arch.classes * arch.input_dim + 7] = 1.0;
  const Model always7(arch, p);
  // After flipping, the original t1 rows are labelled 7: 3 of 5.
  CHECK(attack_score(always7, test, LabelFlip{1, 7}) == doctest::Approx(0.6));
  CHECK_THROWS_AS(attack_score(always7, labels_only({0, 2}, 10), LabelFlip{1, 7}), UndefinedScore);
}

TEST_CASE("backdoor attack score extremes") {
  const auto test = synth_blobs(4, 5, 4, 0.2, 1);
  const Architecture arch{4, 4, 0};
  ParamVector to_target(arch.param_count());
  to_target[16 + 2] = 1.0;
  ParamVector away(arch.param_count());
  away[16 + 0] = 1.0;
  const Backdoor bd{{{0, 1.0}}, 2};
  CHECK(attack_score(Model(arch, to_target), test, bd) == 1.0);
  CHECK(attack_score(Model(arch, away), test, bd) == 0.0);
}

TEST_CASE("attack score agrees with accuracy on a transform-free segment") {
  const auto test = synth_blobs(5, 20, 4, 0.2, 1);
  const Model m = Model::initialize({4, 5, 0}, 1.0, 3);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (test.label(i) == 3) idx.push_back(i);
  }
  const auto only3 = test.subset(idx);
  CHECK(attack_score(m, only3, Backdoor{{}, 3}) == evaluate_accuracy(m, only3));
}

TEST_CASE("dataset JSON round trip") {
  const auto d = synth_blobs(3, 4, 5, 0.2, 8);
  const auto j = dataset_to_json(d);
  CHECK(j.at("labels").size() == 12);
  CHECK(dataset_from_json(j) == d);
  auto bad = j;
  bad["labels"][0] = 9;
  CHECK_THROWS(dataset_from_json(bad));
}

}  // TEST_SUITE
