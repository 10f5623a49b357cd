#include "sybilwall/param_vector.hpp"

#include <cmath>
#include <string>

#include "sybilwall/errors.hpp"

namespace sybilwall {

void require_same_size(const ParamVector& a, const ParamVector& b, const char* what) {
  if (a.size() != b.size()) {
    throw InvalidInput(std::string(what) + ": length mismatch (" + std::to_string(a.size()) +
                       " vs " + std::to_string(b.size()) + ")");
  }
}

ParamVector& ParamVector::operator+=(const ParamVector& other) {
  require_same_size(*this, other, "ParamVector +=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

ParamVector& ParamVector::operator-=(const ParamVector& other) {
  require_same_size(*this, other, "ParamVector -=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

ParamVector& ParamVector::operator*=(double scale) {
  for (double& v : values_) v *= scale;
  return *this;
}

double dot(const ParamVector& a, const ParamVector& b) {
  require_same_size(a, b, "dot");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

double norm(const ParamVector& v) { return std::sqrt(dot(v, v)); }

double squared_distance(const ParamVector& a, const ParamVector& b) {
  require_same_size(a, b, "squared_distance");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

void axpy(double alpha, const ParamVector& x, ParamVector& y) {
  require_same_size(x, y, "axpy");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

bool all_finite(const ParamVector& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace sybilwall
