#include "larp/numkit.hpp"

#include <cmath>
#include <string>

#include "larp/errors.hpp"

namespace larp {

Vector softmax(const Vector& logits, double temperature) {
  if (!(temperature > 0.0)) {
    throw DomainError("softmax: temperature must be positive, got " + std::to_string(temperature));
  }
  if (logits.size() == 0) return logits;
  Vector scaled = logits / temperature;
  const double peak = scaled.maxCoeff();
  Vector out = (scaled.array() - peak).exp().matrix();
  out /= out.sum();
  return out;
}

void softmax_rows(Matrix& logits) {
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    const double peak = row.maxCoeff();
    row = (row.array() - peak).exp().matrix();
    row /= row.sum();
  }
}

double cosine_sim(const Vector& u, const Vector& v) {
  if (u.size() != v.size()) {
    throw ShapeError("cosine_sim: length mismatch " + std::to_string(u.size()) + " vs " +
                     std::to_string(v.size()));
  }
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0) throw DomainError("cosine_sim: zero-norm vector");
  const double c = u.dot(v) / (nu * nv);
  return std::clamp(c, -1.0, 1.0);
}

double cross_entropy(const Vector& target, const Vector& pred) {
  if (target.size() != pred.size()) {
    throw ShapeError("cross_entropy: length mismatch " + std::to_string(target.size()) + " vs " +
                     std::to_string(pred.size()));
  }
  double ce = 0.0;
  for (Eigen::Index i = 0; i < target.size(); ++i) {
    if (target[i] == 0.0) continue;
    ce -= target[i] * std::log(std::max(pred[i], kLogClamp));
  }
  return ce;
}

Vector l2_normalized(const Vector& v) {
  const double n = v.norm();
  if (n == 0.0) throw DomainError("l2_normalized: zero vector");
  return v / n;
}

Matrix normalize_rows(const Matrix& x, Vector* norms) {
  Vector n = x.rowwise().norm();
  for (Eigen::Index r = 0; r < n.size(); ++r) {
    if (n[r] == 0.0) throw DomainError("normalize_rows: zero row " + std::to_string(r));
  }
  Matrix y = n.cwiseInverse().asDiagonal() * x;
  if (norms) *norms = std::move(n);
  return y;
}

Matrix normalize_rows_backward(const Matrix& y, const Vector& norms, const Matrix& grad_y) {
  Vector proj = (y.cwiseProduct(grad_y)).rowwise().sum();
  Matrix g = grad_y - proj.asDiagonal() * y;
  return norms.cwiseInverse().asDiagonal() * g;
}

void zero_grads(const ParamList& params) {
  for (auto* p : params) p->zero_grad();
}

double finite_diff_check(const std::function<double()>& f, const ParamList& params, double h) {
  double worst = 0.0;
  for (auto* p : params) {
    for (Eigen::Index k = 0; k < p->value.size(); ++k) {
      double& slot = p->value.data()[k];
      const double saved = slot;
      slot = saved + h;
      const double plus = f();
      slot = saved - h;
      const double minus = f();
      slot = saved;
      if (!std::isfinite(plus) || !std::isfinite(minus)) {
        throw DivergenceError("finite_diff_check: objective is not finite");
      }
      const double numeric = (plus - minus) / (2.0 * h);
      const double analytic = p->grad.data()[k];
      const double scale = std::abs(analytic) + std::abs(numeric);
      if (scale > 1e-8) worst = std::max(worst, std::abs(analytic - numeric) / scale);
    }
  }
  return worst;
}

Matrix random_normal(Eigen::Index rows, Eigen::Index cols, double sigma, Rng& rng) {
  std::normal_distribution<double> dist(0.0, sigma);
  Matrix m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = dist(rng);
  return m;
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace larp
