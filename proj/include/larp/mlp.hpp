#pragma once

#include <string>
#include <vector>

#include "larp/numkit.hpp"

namespace larp {

enum class Activation { identity, gelu, tanh };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

// One affine layer y = x W^T + b. weight is (out x in), bias is (1 x out).
struct DenseLayer {
  ParamTensor weight;
  ParamTensor bias;
};

// Intermediate values kept by Mlp::forward for the backward pass.
struct MlpCache {
  std::vector<Matrix> inputs;       // input to each layer
  std::vector<Matrix> pre_activations;
};

// Feed-forward network. `widths` lists every layer size including the
// input and the output, so {32, 64, 16} is one hidden layer of 64. The
// activation applies after every layer except the last.
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::vector<int>& widths, Activation hidden_activation, Rng& rng);

  Matrix forward(const Matrix& x, MlpCache* cache = nullptr) const;

  // Accumulates parameter gradients and returns dL/dx.
  Matrix backward(const MlpCache& cache, const Matrix& grad_out);

  ParamList params();
  std::vector<const ParamTensor*> params() const;

  // Square identity weights and zero biases on every layer; only valid when
  // all widths are equal.
  void set_identity();

  int input_dim() const { return widths_.empty() ? 0 : widths_.front(); }
  int output_dim() const { return widths_.empty() ? 0 : widths_.back(); }
  const std::vector<int>& widths() const { return widths_; }
  Activation activation() const { return activation_; }
  std::size_t num_layers() const { return layers_.size(); }
  const DenseLayer& layer(std::size_t i) const { return layers_[i]; }
  DenseLayer& layer(std::size_t i) { return layers_[i]; }

 private:
  std::vector<int> widths_;
  Activation activation_ = Activation::identity;
  std::vector<DenseLayer> layers_;
};

// Applies the activation elementwise and its derivative.
Matrix activate(const Matrix& x, Activation a);
Matrix activate_grad(const Matrix& pre, Activation a);

}  // namespace larp
