#include "sybilwall/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <string>

#include "sybilwall/errors.hpp"
#include "sybilwall/rng.hpp"

namespace sybilwall {

LabeledDataset synth_blobs(std::size_t classes, std::size_t per_class, std::size_t dim, double spread,
                           std::uint64_t seed) {
  if (classes < 2) throw InvalidInput("synth_blobs: classes must be >= 2");
  if (per_class < 1) throw InvalidInput("synth_blobs: per_class must be >= 1");
  if (dim < 1) throw InvalidInput("synth_blobs: dim must be >= 1");
  if (!(spread >= 0.0)) throw InvalidInput("synth_blobs: spread must be >= 0");

  Rng mean_rng = make_rng({seed, tag(Stream::dataset), 0});
  std::uniform_real_distribution<double> center(0.2, 0.8);
  std::vector<double> means(classes * dim);
  for (double& m : means) m = center(mean_rng);

  Rng sample_rng = make_rng({seed, tag(Stream::dataset), 1});
  std::normal_distribution<double> noise(0.0, spread);
  std::vector<double> features;
  std::vector<ClassLabel> labels;
  features.reserve(classes * per_class * dim);
  labels.reserve(classes * per_class);
  for (std::size_t i = 0; i < per_class; ++i) {
    for (std::size_t c = 0; c < classes; ++c) {
      for (std::size_t k = 0; k < dim; ++k) {
        const double v = means[c * dim + k] + (spread > 0.0 ? noise(sample_rng) : 0.0);
        features.push_back(std::clamp(v, 0.0, 1.0));
      }
      labels.push_back(static_cast<ClassLabel>(c));
    }
  }
  return LabeledDataset(dim, classes, std::move(features), std::move(labels));
}

std::pair<LabeledDataset, LabeledDataset> stratified_split(const LabeledDataset& data,
                                                           std::size_t test_per_class) {
  std::vector<std::size_t> taken(data.classes(), 0);
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> test_idx;
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto& n = taken[static_cast<std::size_t>(data.label(i))];
    if (n < test_per_class) {
      test_idx.push_back(i);
      ++n;
    } else {
      train_idx.push_back(i);
    }
  }
  return {data.subset(train_idx), data.subset(test_idx)};
}

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                        const std::string& file) {
  if (offset + 4 > bytes.size()) throw ParseError(file + ": truncated header", offset);
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

}  // namespace

LabeledDataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path) {
  const std::string img_name = images_path.string();
  const std::string lbl_name = labels_path.string();
  const auto images = read_file(images_path);
  const auto labels = read_file(labels_path);

  if (read_be32(images, 0, img_name) != 0x00000803u) {
    throw ParseError(img_name + ": bad magic, expected 0x00000803", 0);
  }
  if (read_be32(labels, 0, lbl_name) != 0x00000801u) {
    throw ParseError(lbl_name + ": bad magic, expected 0x00000801", 0);
  }
  const std::size_t count = read_be32(images, 4, img_name);
  const std::size_t rows = read_be32(images, 8, img_name);
  const std::size_t cols = read_be32(images, 12, img_name);
  const std::size_t label_count = read_be32(labels, 4, lbl_name);
  if (count != label_count) {
    throw ParseError("image count " + std::to_string(count) + " does not match label count " +
                         std::to_string(label_count),
                     4);
  }
  const std::size_t dim = rows * cols;
  if (dim == 0) throw ParseError(img_name + ": zero-sized images", 8);
  if (images.size() < 16 + count * dim) {
    throw ParseError(img_name + ": truncated pixel data", images.size());
  }
  if (labels.size() < 8 + count) throw ParseError(lbl_name + ": truncated label data", labels.size());

  std::vector<double> features(count * dim);
  for (std::size_t i = 0; i < count * dim; ++i) features[i] = images[16 + i] / 255.0;
  std::vector<ClassLabel> out_labels(count);
  int max_label = 1;
  for (std::size_t i = 0; i < count; ++i) {
    out_labels[i] = labels[8 + i];
    max_label = std::max(max_label, static_cast<int>(labels[8 + i]));
  }
  return LabeledDataset(dim, static_cast<std::size_t>(max_label) + 1, std::move(features),
                        std::move(out_labels));
}

namespace {

// Splits `total` items over weights that sum to 1 so the counts sum to total.
std::vector<std::size_t> largest_remainder(const std::vector<double>& fractions, std::size_t total) {
  std::vector<std::size_t> counts(fractions.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    const double exact = fractions[i] * static_cast<double>(total);
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[i];
    remainders.emplace_back(exact - std::floor(exact), i);
  }
  // Floating-point slack can leave floor sums one above total.
  while (assigned > total) {
    auto it = std::max_element(counts.begin(), counts.end());
    --*it;
    --assigned;
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) {
    ++counts[remainders[k % remainders.size()].second];
  }
  return counts;
}

}  // namespace

std::vector<LabeledDataset> dirichlet_partition(const LabeledDataset& data, const PartitionSpec& spec) {
  if (spec.node_count < 1) throw InvalidInput("dirichlet_partition: node_count must be >= 1");
  if (!(spec.alpha > 0.0)) throw InvalidInput("dirichlet_partition: alpha must be > 0");
  if (data.empty()) throw InvalidInput("dirichlet_partition: empty dataset");

  const std::size_t n = spec.node_count;
  std::vector<std::vector<std::size_t>> by_class(data.classes());
  for (std::size_t i = 0; i < data.size(); ++i) {
    by_class[static_cast<std::size_t>(data.label(i))].push_back(i);
  }

  std::vector<std::vector<std::size_t>> assigned(n);
  Rng rng = make_rng({spec.seed, tag(Stream::partition)});
  std::gamma_distribution<double> gamma(spec.alpha, 1.0);
  for (auto& members : by_class) {
    std::vector<double> p(n);
    double sum = 0.0;
    for (double& x : p) {
      x = gamma(rng);
      sum += x;
    }
    if (sum > 0.0) {
      for (double& x : p) x /= sum;
    } else {
      // Every gamma draw underflowed; give the class to one node.
      std::fill(p.begin(), p.end(), 0.0);
      p[static_cast<std::size_t>(rng() % n)] = 1.0;
    }
    std::shuffle(members.begin(), members.end(), rng);
    const auto counts = largest_remainder(p, members.size());
    std::size_t pos = 0;
    for (std::size_t node = 0; node < n; ++node) {
      for (std::size_t k = 0; k < counts[node]; ++k) assigned[node].push_back(members[pos++]);
    }
  }

  std::vector<LabeledDataset> parts;
  parts.reserve(n);
  for (auto& idx : assigned) parts.push_back(data.subset(idx));
  return parts;
}

std::vector<std::vector<double>> class_fractions(const std::vector<LabeledDataset>& parts,
                                                 std::size_t classes) {
  std::vector<std::vector<double>> frac(classes, std::vector<double>(parts.size(), 0.0));
  for (std::size_t node = 0; node < parts.size(); ++node) {
    for (ClassLabel l : parts[node].labels()) frac[static_cast<std::size_t>(l)][node] += 1.0;
  }
  for (auto& row : frac) {
    const double total = std::accumulate(row.begin(), row.end(), 0.0);
    if (total > 0.0) {
      for (double& x : row) x /= total;
    }
  }
  return frac;
}

std::vector<PatternPixel> default_backdoor_pattern(std::size_t dim) {
  std::vector<PatternPixel> pattern;
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(dim))));
  if (side >= 3 && side * side == dim) {
    for (std::size_t r = 0; r < 3; ++r) {
      for (std::size_t c = 0; c < 3; ++c) pattern.push_back({r * side + c, 1.0});
    }
    return pattern;
  }
  for (std::size_t i = 0; i < std::min<std::size_t>(9, dim); ++i) pattern.push_back({i, 1.0});
  return pattern;
}

namespace {

void check_class(ClassLabel c, std::size_t classes, const char* what) {
  if (c < 0 || static_cast<std::size_t>(c) >= classes) {
    throw InvalidInput(std::string(what) + ": class " + std::to_string(c) + " outside [0, " +
                       std::to_string(classes) + ")");
  }
}

}  // namespace

void validate_attack(const AttackSpec& spec, std::size_t dim, std::size_t classes) {
  if (const auto* flip = std::get_if<LabelFlip>(&spec)) {
    check_class(flip->t1, classes, "label_flip");
    check_class(flip->t2, classes, "label_flip");
    if (flip->t1 == flip->t2) throw InvalidInput("label_flip: t1 and t2 must differ");
    return;
  }
  const auto& bd = std::get<Backdoor>(spec);
  check_class(bd.target, classes, "backdoor");
  for (const auto& px : bd.pattern) {
    if (px.index >= dim) {
      throw InvalidInput("backdoor: pattern index " + std::to_string(px.index) +
                         " outside feature dimension " + std::to_string(dim));
    }
  }
}

LabeledDataset apply_label_flip(const LabeledDataset& data, ClassLabel t1, ClassLabel t2) {
  validate_attack(LabelFlip{t1, t2}, data.dim(), data.classes());
  LabeledDataset out = data;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out.label(i) == t1) {
      out.set_label(i, t2);
    } else if (out.label(i) == t2) {
      out.set_label(i, t1);
    }
  }
  return out;
}

LabeledDataset apply_backdoor(const LabeledDataset& data, const std::vector<PatternPixel>& pattern,
                              ClassLabel target) {
  validate_attack(Backdoor{pattern, target}, data.dim(), data.classes());
  LabeledDataset out = data;
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto row = out.row(i);
    for (const auto& px : pattern) row[px.index] = px.value;
    out.set_label(i, target);
  }
  return out;
}

LabeledDataset apply_attack(const LabeledDataset& data, const AttackSpec& spec) {
  if (const auto* flip = std::get_if<LabelFlip>(&spec)) {
    return apply_label_flip(data, flip->t1, flip->t2);
  }
  const auto& bd = std::get<Backdoor>(spec);
  return apply_backdoor(data, bd.pattern, bd.target);
}

LabeledDataset attack_segment(const LabeledDataset& clean_test, const AttackSpec& spec) {
  if (const auto* flip = std::get_if<LabelFlip>(&spec)) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < clean_test.size(); ++i) {
      if (clean_test.label(i) == flip->t1 || clean_test.label(i) == flip->t2) idx.push_back(i);
    }
    return apply_label_flip(clean_test.subset(idx), flip->t1, flip->t2);
  }
  return apply_attack(clean_test, spec);
}

double attack_score(const Model& model, const LabeledDataset& clean_test, const AttackSpec& spec) {
  if (clean_test.empty()) throw InvalidInput("attack_score: empty test set");
  const LabeledDataset segment = attack_segment(clean_test, spec);
  if (segment.empty()) {
    throw UndefinedScore("attack_score: test set has no samples of the flipped classes");
  }
  return evaluate_accuracy(model, segment);
}

nlohmann::json dataset_to_json(const LabeledDataset& data) {
  nlohmann::json features = nlohmann::json::array();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto r = data.row(i);
    features.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return {{"dim", data.dim()},
          {"classes", data.classes()},
          {"features", std::move(features)},
          {"labels", data.labels()}};
}

LabeledDataset dataset_from_json(const nlohmann::json& j) {
  const auto& rows = j.at("features");
  const auto labels = j.at("labels").get<std::vector<ClassLabel>>();
  std::size_t dim = j.contains("dim") ? j.at("dim").get<std::size_t>() : 0;
  if (dim == 0 && !rows.empty()) dim = rows.front().size();
  std::size_t classes = 2;
  if (j.contains("classes")) {
    classes = j.at("classes").get<std::size_t>();
  } else {
    for (ClassLabel l : labels) classes = std::max(classes, static_cast<std::size_t>(l) + 1);
  }
  std::vector<double> features;
  features.reserve(rows.size() * dim);
  for (const auto& r : rows) {
    if (r.size() != dim) throw InvalidInput("dataset_from_json: ragged feature rows");
    for (const auto& v : r) features.push_back(v.get<double>());
  }
  return LabeledDataset(dim, classes, std::move(features), labels);
}

}  // namespace sybilwall
