#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "sybilwall/dataset.hpp"
#include "sybilwall/param_vector.hpp"

namespace sybilwall {

/// Classifier shape. hidden == 0 selects softmax regression; otherwise a
/// one-hidden-layer tanh MLP.
struct Architecture {
  std::size_t input_dim = 0;
  std::size_t classes = 0;
  std::size_t hidden = 0;

  std::size_t param_count() const noexcept;
  friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Parameter layout (row-major):
///   softmax: W[classes x input], b[classes]
///   mlp:     W1[hidden x input], b1[hidden], W2[classes x hidden], b2[classes]
class Model {
 public:
  Model() = default;
  Model(Architecture arch, ParamVector params);

  // Gaussian init with standard deviation `scale`, deterministic per seed.
  static Model initialize(const Architecture& arch, double scale, std::uint64_t seed);

  const Architecture& arch() const noexcept { return arch_; }
  const ParamVector& params() const noexcept { return params_; }
  ParamVector& params() noexcept { return params_; }

  // Writes arch.classes logits for one input row.
  void logits(std::span<const double> x, std::span<double> out) const;
  // Argmax of the logits; ties go to the lowest class index.
  ClassLabel predict(std::span<const double> x) const;

  friend bool operator==(const Model&, const Model&) = default;

 private:
  Architecture arch_;
  ParamVector params_;
};

struct TrainConfig {
  double learning_rate = 0.01;
  int local_epochs = 1;
  int batch_size = 8;
  std::uint64_t seed = 0;

  void validate() const;
};

// Mean cross-entropy over `batch` rows; writes the matching gradient into
// `grad` (resized to the parameter count).
double loss_and_gradient(const Model& model, const LabeledDataset& data,
                         std::span<const std::size_t> batch, ParamVector& grad);

// Mini-batch SGD on cross-entropy, reshuffling every epoch from cfg.seed.
Model train_sgd(const Model& model, const LabeledDataset& data, const TrainConfig& cfg);

// Fraction of rows whose predicted class equals the label.
double evaluate_accuracy(const Model& model, const LabeledDataset& data);

// Returns 0 when either vector is all zeros.
double cosine_similarity(const ParamVector& a, const ParamVector& b);

}  // namespace sybilwall
