#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sybilwall {

using ClassLabel = int;

/// Row-major feature matrix with one class label per row.
class LabeledDataset {
 public:
  LabeledDataset() = default;
  LabeledDataset(std::size_t dim, std::size_t classes);
  // Validates shape and label range; throws InvalidInput.
  LabeledDataset(std::size_t dim, std::size_t classes, std::vector<double> features,
                 std::vector<ClassLabel> labels);

  std::size_t size() const noexcept { return labels_.size(); }
  bool empty() const noexcept { return labels_.empty(); }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t classes() const noexcept { return classes_; }

  std::span<const double> row(std::size_t i) const {
    return {features_.data() + i * dim_, dim_};
  }
  std::span<double> row(std::size_t i) { return {features_.data() + i * dim_, dim_}; }
  ClassLabel label(std::size_t i) const { return labels_[i]; }
  void set_label(std::size_t i, ClassLabel label);

  const std::vector<double>& features() const noexcept { return features_; }
  const std::vector<ClassLabel>& labels() const noexcept { return labels_; }

  void add(std::span<const double> row, ClassLabel label);
  LabeledDataset subset(std::span<const std::size_t> indices) const;

  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;

 private:
  std::size_t dim_ = 0;
  std::size_t classes_ = 0;
  std::vector<double> features_;
  std::vector<ClassLabel> labels_;
};

}  // namespace sybilwall
