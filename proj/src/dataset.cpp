#include "sybilwall/dataset.hpp"

#include <string>

#include "sybilwall/errors.hpp"

namespace sybilwall {

namespace {

void check_label(ClassLabel label, std::size_t classes) {
  if (label < 0 || static_cast<std::size_t>(label) >= classes) {
    throw InvalidInput("label " + std::to_string(label) + " outside [0, " +
                       std::to_string(classes) + ")");
  }
}

}  // namespace

LabeledDataset::LabeledDataset(std::size_t dim, std::size_t classes) : dim_(dim), classes_(classes) {
  if (dim == 0) throw InvalidInput("dataset feature dimension must be positive");
  if (classes < 2) throw InvalidInput("dataset needs at least 2 classes");
}

LabeledDataset::LabeledDataset(std::size_t dim, std::size_t classes, std::vector<double> features,
                               std::vector<ClassLabel> labels)
    : LabeledDataset(dim, classes) {
  if (features.size() != labels.size() * dim) {
    throw InvalidInput("feature matrix has " + std::to_string(features.size()) +
                       " values, expected " + std::to_string(labels.size() * dim));
  }
  for (ClassLabel l : labels) check_label(l, classes);
  features_ = std::move(features);
  labels_ = std::move(labels);
}

void LabeledDataset::set_label(std::size_t i, ClassLabel label) {
  check_label(label, classes_);
  labels_.at(i) = label;
}

void LabeledDataset::add(std::span<const double> row, ClassLabel label) {
  if (row.size() != dim_) {
    throw InvalidInput("row has " + std::to_string(row.size()) + " features, expected " +
                       std::to_string(dim_));
  }
  check_label(label, classes_);
  features_.insert(features_.end(), row.begin(), row.end());
  labels_.push_back(label);
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
  LabeledDataset out(dim_, classes_);
  out.features_.reserve(indices.size() * dim_);
  out.labels_.reserve(indices.size());
  for (std::size_t i : indices) {
    const auto r = row(i);
    out.features_.insert(out.features_.end(), r.begin(), r.end());
    out.labels_.push_back(labels_[i]);
  }
  return out;
}

}  // namespace sybilwall
