#include "sybilwall/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "sybilwall/errors.hpp"
#include "sybilwall/rng.hpp"

namespace sybilwall {

std::size_t Architecture::param_count() const noexcept {
  if (hidden == 0) return classes * input_dim + classes;
  return hidden * input_dim + hidden + classes * hidden + classes;
}

Model::Model(Architecture arch, ParamVector params) : arch_(arch), params_(std::move(params)) {
  if (arch_.input_dim == 0 || arch_.classes < 2) {
    throw InvalidInput("architecture needs input_dim >= 1 and classes >= 2");
  }
  if (params_.size() != arch_.param_count()) {
    throw InvalidInput("model has " + std::to_string(params_.size()) + " parameters, arch implies " +
                       std::to_string(arch_.param_count()));
  }
}

Model Model::initialize(const Architecture& arch, double scale, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  ParamVector params(arch.param_count());
  for (double& p : params) p = normal(rng);
  return Model(arch, std::move(params));
}

namespace {

// Dense forward pass that keeps the hidden activations for backprop.
struct Forward {
  std::vector<double> hidden;
  std::vector<double> logits;
};

void forward(const Model& m, std::span<const double> x, Forward& f) {
  const auto& a = m.arch();
  const double* p = m.params().span().data();
  f.logits.assign(a.classes, 0.0);
  if (a.hidden == 0) {
    const double* w = p;
    const double* b = p + a.classes * a.input_dim;
    for (std::size_t c = 0; c < a.classes; ++c) {
      const double* wc = w + c * a.input_dim;
      double z = b[c];
      for (std::size_t k = 0; k < a.input_dim; ++k) z += wc[k] * x[k];
      f.logits[c] = z;
    }
    return;
  }
  const double* w1 = p;
  const double* b1 = w1 + a.hidden * a.input_dim;
  const double* w2 = b1 + a.hidden;
  const double* b2 = w2 + a.classes * a.hidden;
  f.hidden.assign(a.hidden, 0.0);
  for (std::size_t h = 0; h < a.hidden; ++h) {
    const double* wh = w1 + h * a.input_dim;
    double z = b1[h];
    for (std::size_t k = 0; k < a.input_dim; ++k) z += wh[k] * x[k];
    f.hidden[h] = std::tanh(z);
  }
  for (std::size_t c = 0; c < a.classes; ++c) {
    const double* wc = w2 + c * a.hidden;
    double z = b2[c];
    for (std::size_t h = 0; h < a.hidden; ++h) z += wc[h] * f.hidden[h];
    f.logits[c] = z;
  }
}

void check_shape(const Model& model, const LabeledDataset& data) {
  const auto& a = model.arch();
  if (data.dim() != a.input_dim) {
    throw InvalidInput("dataset has " + std::to_string(data.dim()) +
                       " features, model expects " + std::to_string(a.input_dim));
  }
  if (data.classes() != a.classes) {
    throw InvalidInput("dataset has " + std::to_string(data.classes()) +
                       " classes, model expects " + std::to_string(a.classes));
  }
}

ClassLabel argmax_class(const Model& m, std::span<const double> x, Forward& f) {
  forward(m, x, f);
  // max_element returns the first maximum, which is the lowest index.
  return static_cast<ClassLabel>(std::max_element(f.logits.begin(), f.logits.end()) -
                                 f.logits.begin());
}

}  // namespace

void Model::logits(std::span<const double> x, std::span<double> out) const {
  Forward f;
  forward(*this, x, f);
  std::copy(f.logits.begin(), f.logits.end(), out.begin());
}

ClassLabel Model::predict(std::span<const double> x) const {
  Forward f;
  return argmax_class(*this, x, f);
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidInput("learning_rate must be a finite non-negative number");
  }
  if (local_epochs < 1) throw InvalidInput("local_epochs must be >= 1");
  if (batch_size < 1) throw InvalidInput("batch_size must be >= 1");
}

double loss_and_gradient(const Model& model, const LabeledDataset& data,
                         std::span<const std::size_t> batch, ParamVector& grad) {
  check_shape(model, data);
  if (batch.empty()) throw InvalidInput("loss_and_gradient: empty batch");
  const auto& a = model.arch();
  grad = ParamVector(a.param_count());
  double* g = grad.span().data();
  const double* p = model.params().span().data();

  Forward f;
  std::vector<double> dz(a.classes);
  std::vector<double> dh(a.hidden);
  double loss = 0.0;

  for (std::size_t idx : batch) {
    const auto x = data.row(idx);
    const auto y = static_cast<std::size_t>(data.label(idx));
    forward(model, x, f);

    const double zmax = *std::max_element(f.logits.begin(), f.logits.end());
    double sum = 0.0;
    for (std::size_t c = 0; c < a.classes; ++c) {
      dz[c] = std::exp(f.logits[c] - zmax);
      sum += dz[c];
    }
    loss += std::log(sum) + zmax - f.logits[y];
    for (std::size_t c = 0; c < a.classes; ++c) dz[c] /= sum;
    dz[y] -= 1.0;

    if (a.hidden == 0) {
      double* gw = g;
      double* gb = g + a.classes * a.input_dim;
      for (std::size_t c = 0; c < a.classes; ++c) {
        double* gwc = gw + c * a.input_dim;
        for (std::size_t k = 0; k < a.input_dim; ++k) gwc[k] += dz[c] * x[k];
        gb[c] += dz[c];
      }
      continue;
    }

    double* gw1 = g;
    double* gb1 = gw1 + a.hidden * a.input_dim;
    double* gw2 = gb1 + a.hidden;
    double* gb2 = gw2 + a.classes * a.hidden;
    const double* w2 = p + a.hidden * a.input_dim + a.hidden;
    std::fill(dh.begin(), dh.end(), 0.0);
    for (std::size_t c = 0; c < a.classes; ++c) {
      double* gwc = gw2 + c * a.hidden;
      const double* wc = w2 + c * a.hidden;
      for (std::size_t h = 0; h < a.hidden; ++h) {
        gwc[h] += dz[c] * f.hidden[h];
        dh[h] += dz[c] * wc[h];
      }
      gb2[c] += dz[c];
    }
    for (std::size_t h = 0; h < a.hidden; ++h) {
      const double da = dh[h] * (1.0 - f.hidden[h] * f.hidden[h]);
      double* gwh = gw1 + h * a.input_dim;
      for (std::size_t k = 0; k < a.input_dim; ++k) gwh[k] += da * x[k];
      gb1[h] += da;
    }
  }

  const double inv = 1.0 / static_cast<double>(batch.size());
  grad *= inv;
  return loss * inv;
}

Model train_sgd(const Model& model, const LabeledDataset& data, const TrainConfig& cfg) {
  cfg.validate();
  check_shape(model, data);
  if (data.empty()) throw InvalidInput("train_sgd: empty dataset");

  Model out = model;
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  ParamVector grad;

  for (int epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t len = std::min(batch, order.size() - start);
      const double loss =
          loss_and_gradient(out, data, std::span<const std::size_t>(order).subspan(start, len), grad);
      if (!std::isfinite(loss)) {
        throw NumericError("train_sgd: non-finite loss in epoch " + std::to_string(epoch));
      }
      axpy(-cfg.learning_rate, grad, out.params());
    }
  }
  if (!all_finite(out.params())) throw NumericError("train_sgd: non-finite parameters");
  return out;
}

double evaluate_accuracy(const Model& model, const LabeledDataset& data) {
  check_shape(model, data);
  if (data.empty()) throw InvalidInput("evaluate_accuracy: empty dataset");
  Forward f;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (argmax_class(model, data.row(i), f) == data.label(i)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

double cosine_similarity(const ParamVector& a, const ParamVector& b) {
  require_same_size(a, b, "cosine_similarity");
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

}  // namespace sybilwall
