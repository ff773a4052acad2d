#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace larp {

// Row-major so that one row is one sample/embedding.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

// Clamp applied to predicted probabilities before taking the log.
inline constexpr double kLogClamp = 1e-12;

/// Temperature-scaled softmax, computed with max subtraction.
/// Throws DomainError when temperature <= 0.
Vector softmax(const Vector& logits, double temperature = 1.0);

// In-place row-wise softmax (temperature 1).
void softmax_rows(Matrix& logits);

/// Cosine similarity. Throws DomainError if either vector has zero norm
/// and ShapeError on length mismatch.
double cosine_sim(const Vector& u, const Vector& v);

/// CE = -sum target_i * ln(max(pred_i, kLogClamp)).
double cross_entropy(const Vector& target, const Vector& pred);

// Unit-length copy of v. Throws DomainError for a zero vector.
Vector l2_normalized(const Vector& v);

// Row-wise L2 normalization. `norms` receives the pre-normalization norms.
Matrix normalize_rows(const Matrix& x, Vector* norms = nullptr);

// Backward of normalize_rows: given y = x / |x| (row-wise), the norms and
// dL/dy, returns dL/dx = (g - y (y.g)) / |x|.
Matrix normalize_rows_backward(const Matrix& y, const Vector& norms, const Matrix& grad_y);

// A trainable tensor with its accumulated gradient.
struct ParamTensor {
  Matrix value;
  Matrix grad;

  ParamTensor() = default;
  explicit ParamTensor(Matrix v) : value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  Eigen::Index size() const { return value.size(); }
};

using ParamList = std::vector<ParamTensor*>;

void zero_grads(const ParamList& params);

/// Compares the gradients stored in `params` against central differences
/// (f(θ+h) - f(θ-h)) / 2h, one coordinate at a time. `f` must evaluate the
/// objective at the current parameter values without touching `grad`.
/// Returns the largest relative error |g - n| / (|g| + |n|) over coordinates
/// where |g| + |n| > 1e-8, or 0 when no coordinate qualifies.
double finite_diff_check(const std::function<double()>& f, const ParamList& params, double h = 1e-5);

// Draws an n x m matrix of i.i.d. N(0, sigma^2) values.
Matrix random_normal(Eigen::Index rows, Eigen::Index cols, double sigma, Rng& rng);

// Elementwise check that every entry is finite.
bool all_finite(const Matrix& m);

}  // namespace larp
