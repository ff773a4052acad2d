#include "larp/optim.hpp"

#include <cmath>

namespace larp {

void Adam::step(const ParamList& params, double lr) {
  if (m_.empty()) {
    for (const auto* p : params) {
      m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto* p = params[i];
    Matrix g = p->grad;
    if (weight_decay_ != 0.0) g += weight_decay_ * p->value;
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
    // A zero gradient with zero moments leaves the parameter untouched.
    p->value.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

void SgdMomentum::step(const ParamList& params, double lr) {
  if (velocity_.empty()) {
    for (const auto* p : params) velocity_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto* p = params[i];
    Matrix g = p->grad;
    if (weight_decay_ != 0.0) g += weight_decay_ * p->value;
    velocity_[i] = momentum_ * velocity_[i] + g;
    p->value -= lr * velocity_[i];
  }
}

}  // namespace larp
