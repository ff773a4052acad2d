#pragma once

#include <vector>

#include "larp/numkit.hpp"

namespace larp {

// Adam with optional L2 penalty folded into the gradient.
class Adam {
 public:
  Adam(double beta1 = 0.9, double beta2 = 0.99, double eps = 1e-8, double weight_decay = 0.0)
      : beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {}

  // The parameter list must keep the same order and shapes across calls.
  void step(const ParamList& params, double lr);
  long steps() const { return t_; }

 private:
  double beta1_, beta2_, eps_, weight_decay_;
  long t_ = 0;
  std::vector<Matrix> m_, v_;
};

// SGD with heavy-ball momentum and L2 penalty.
class SgdMomentum {
 public:
  explicit SgdMomentum(double momentum = 0.9, double weight_decay = 0.0)
      : momentum_(momentum), weight_decay_(weight_decay) {}

  void step(const ParamList& params, double lr);

 private:
  double momentum_, weight_decay_;
  std::vector<Matrix> velocity_;
};

}  // namespace larp
