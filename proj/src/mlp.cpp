#include "larp/mlp.hpp"

#include <cmath>
#include <numbers>

#include "larp/errors.hpp"

namespace larp {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity:
      return "identity";
    case Activation::gelu:
      return "gelu";
    case Activation::tanh:
      return "tanh";
  }
  return "identity";
}

Activation activation_from_string(const std::string& name) {
  if (name == "identity") return Activation::identity;
  if (name == "gelu") return Activation::gelu;
  if (name == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + name + "'");
}

// Exact GELU: x * Phi(x).
Matrix activate(const Matrix& x, Activation a) {
  switch (a) {
    case Activation::identity:
      return x;
    case Activation::tanh:
      return x.array().tanh().matrix();
    case Activation::gelu:
      return x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0)); });
  }
  return x;
}

Matrix activate_grad(const Matrix& pre, Activation a) {
  switch (a) {
    case Activation::identity:
      return Matrix::Ones(pre.rows(), pre.cols());
    case Activation::tanh:
      return (1.0 - pre.array().tanh().square()).matrix();
    case Activation::gelu: {
      const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
      return pre.unaryExpr([inv_sqrt_2pi](double v) {
        const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
        return cdf + v * inv_sqrt_2pi * std::exp(-0.5 * v * v);
      });
    }
  }
  return Matrix::Ones(pre.rows(), pre.cols());
}

Mlp::Mlp(const std::vector<int>& widths, Activation hidden_activation, Rng& rng)
    : widths_(widths), activation_(hidden_activation) {
  if (widths.size() < 2) throw ConfigError("Mlp needs at least input and output widths");
  for (int w : widths) {
    if (w <= 0) throw ConfigError("Mlp widths must be positive");
  }
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const int in = widths[i];
    const int out = widths[i + 1];
    // Glorot-normal
    const double sigma = std::sqrt(2.0 / static_cast<double>(in + out));
    DenseLayer layer{ParamTensor(random_normal(out, in, sigma, rng)), ParamTensor(Matrix::Zero(1, out))};
    layers_.push_back(std::move(layer));
  }
}

Matrix Mlp::forward(const Matrix& x, MlpCache* cache) const {
  if (x.cols() != input_dim()) {
    throw ShapeError("Mlp::forward: expected " + std::to_string(input_dim()) + " input columns, got " +
                     std::to_string(x.cols()));
  }
  if (cache) {
    cache->inputs.clear();
    cache->pre_activations.clear();
  }
  Matrix h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& layer = layers_[i];
    Matrix pre = h * layer.weight.value.transpose();
    pre.rowwise() += layer.bias.value.row(0);
    const bool last = i + 1 == layers_.size();
    if (cache) {
      cache->inputs.push_back(std::move(h));
      cache->pre_activations.push_back(pre);
    }
    h = last ? std::move(pre) : activate(pre, activation_);
  }
  return h;
}

Matrix Mlp::backward(const MlpCache& cache, const Matrix& grad_out) {
  Matrix g = grad_out;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    auto& layer = layers_[k];
    const bool last = k + 1 == layers_.size();
    if (!last) g = g.cwiseProduct(activate_grad(cache.pre_activations[k], activation_));
    layer.weight.grad.noalias() += g.transpose() * cache.inputs[k];
    layer.bias.grad.row(0) += g.colwise().sum();
    g = g * layer.weight.value;
  }
  return g;
}

ParamList Mlp::params() {
  ParamList out;
  for (auto& layer : layers_) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  return out;
}

std::vector<const ParamTensor*> Mlp::params() const {
  std::vector<const ParamTensor*> out;
  for (const auto& layer : layers_) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  return out;
}

void Mlp::set_identity() {
  for (auto& layer : layers_) {
    if (layer.weight.value.rows() != layer.weight.value.cols()) {
      throw ShapeError("Mlp::set_identity: non-square layer");
    }
    layer.weight.value.setIdentity();
    layer.bias.value.setZero();
  }
}

}  // namespace larp
