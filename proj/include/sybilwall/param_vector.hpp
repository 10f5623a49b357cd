#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace sybilwall {

/// Flat vector of model parameters. All aggregation, similarity and
/// history arithmetic operates on this type.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::size_t size, double fill = 0.0) : values_(size, fill) {}
  explicit ParamVector(std::vector<double> values) : values_(std::move(values)) {}
  ParamVector(std::initializer_list<double> values) : values_(values) {}

  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> span() noexcept { return values_; }
  std::span<const double> span() const noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  auto begin() noexcept { return values_.begin(); }
  auto end() noexcept { return values_.end(); }
  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }

  ParamVector& operator+=(const ParamVector& other);
  ParamVector& operator-=(const ParamVector& other);
  ParamVector& operator*=(double scale);

  friend ParamVector operator+(ParamVector lhs, const ParamVector& rhs) { return lhs += rhs; }
  friend ParamVector operator-(ParamVector lhs, const ParamVector& rhs) { return lhs -= rhs; }
  friend ParamVector operator*(ParamVector lhs, double scale) { return lhs *= scale; }
  friend ParamVector operator*(double scale, ParamVector rhs) { return rhs *= scale; }
  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  std::vector<double> values_;
};

double dot(const ParamVector& a, const ParamVector& b);
double norm(const ParamVector& v);
double squared_distance(const ParamVector& a, const ParamVector& b);

// y += alpha * x
void axpy(double alpha, const ParamVector& x, ParamVector& y);

bool all_finite(const ParamVector& v);

// Throws InvalidInput naming `what` when sizes differ.
void require_same_size(const ParamVector& a, const ParamVector& b, const char* what);

}  // namespace sybilwall
