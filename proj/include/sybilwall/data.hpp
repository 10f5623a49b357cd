#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "sybilwall/dataset.hpp"
#include "sybilwall/numerics.hpp"

namespace sybilwall {

// Gaussian clusters around per-class means drawn from the seed; features
// clipped to [0, 1]. Rows are interleaved class 0, 1, ..., C-1, 0, 1, ...
LabeledDataset synth_blobs(std::size_t classes, std::size_t per_class, std::size_t dim, double spread,
                           std::uint64_t seed);

// Moves the first `test_per_class` rows of every class into the second
// dataset of the pair; the rest stay in the first.
std::pair<LabeledDataset, LabeledDataset> stratified_split(const LabeledDataset& data,
                                                           std::size_t test_per_class);

// Reads an IDX image file (magic 0x00000803) and label file (0x00000801).
// Pixels are scaled to [0, 1]; the class count is max(label) + 1 (at least 2).
LabeledDataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path);

struct PartitionSpec {
  std::size_t node_count = 1;
  double alpha = 0.1;
  std::uint64_t seed = 0;
};

// Per class, draws node fractions from Dirichlet(alpha) and hands out that
// class's (shuffled) samples by largest-remainder rounding.
std::vector<LabeledDataset> dirichlet_partition(const LabeledDataset& data, const PartitionSpec& spec);

// fractions[c][n] = share of class c held by node n. Rows sum to 1 for
// classes that occur at all.
std::vector<std::vector<double>> class_fractions(const std::vector<LabeledDataset>& parts,
                                                 std::size_t classes);

struct LabelFlip {
  ClassLabel t1 = 0;
  ClassLabel t2 = 1;
  friend bool operator==(const LabelFlip&, const LabelFlip&) = default;
};

struct PatternPixel {
  std::size_t index = 0;
  double value = 1.0;
  friend bool operator==(const PatternPixel&, const PatternPixel&) = default;
};

struct Backdoor {
  std::vector<PatternPixel> pattern;
  ClassLabel target = 0;
  friend bool operator==(const Backdoor&, const Backdoor&) = default;
};

using AttackSpec = std::variant<LabelFlip, Backdoor>;

// 3x3 top-left block at full intensity when dim is a square image of side
// >= 3, otherwise the first min(9, dim) features.
std::vector<PatternPixel> default_backdoor_pattern(std::size_t dim);

void validate_attack(const AttackSpec& spec, std::size_t dim, std::size_t classes);

LabeledDataset apply_label_flip(const LabeledDataset& data, ClassLabel t1, ClassLabel t2);
LabeledDataset apply_backdoor(const LabeledDataset& data, const std::vector<PatternPixel>& pattern,
                              ClassLabel target);
LabeledDataset apply_attack(const LabeledDataset& data, const AttackSpec& spec);

// The evaluation segment an attack alters, already transformed.
LabeledDataset attack_segment(const LabeledDataset& clean_test, const AttackSpec& spec);

// Accuracy on attack_segment(clean_test, spec). Throws UndefinedScore when a
// label-flip segment is empty.
double attack_score(const Model& model, const LabeledDataset& clean_test, const AttackSpec& spec);

// {"dim": d, "classes": c, "features": [[...], ...], "labels": [...]}
nlohmann::json dataset_to_json(const LabeledDataset& data);
LabeledDataset dataset_from_json(const nlohmann::json& j);

}  // namespace sybilwall
