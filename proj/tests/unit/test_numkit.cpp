#include <doctest.h>

#include "larp/errors.hpp"
#include "larp/mlp.hpp"
#include "larp/numkit.hpp"
#include "larp/optim.hpp"
#include "oracles.hpp"

using namespace larp;

namespace {
Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}
}  // namespace

TEST_SUITE("numkit") {
  TEST_CASE("softmax examples") {
    const Vector a = softmax(vec({0, 0}));
    CHECK(a(0) == doctest::Approx(0.5));
    CHECK(a(1) == doctest::Approx(0.5));

    // e / (e + 1)
    const double e = std::exp(1.0);
    const Vector b = softmax(vec({1, 0}));
    CHECK(b(0) == doctest::Approx(e / (e + 1)).epsilon(1e-12));
    CHECK(b(0) == doctest::Approx(0.7311).epsilon(1e-4));
    CHECK(b(1) == doctest::Approx(0.2689).epsilon(1e-4));

    const Vector c = softmax(vec({1000, 999}));
    CHECK(all_finite(c));
    CHECK(c(0) == doctest::Approx(b(0)).epsilon(1e-12));

    CHECK_THROWS_AS(softmax(vec({1, 2}), 0.0), DomainError);
    CHECK_THROWS_AS(softmax(vec({1, 2}), -1.0), DomainError);
  }

  TEST_CASE("softmax properties") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, 5.0);
    std::uniform_real_distribution<double> tau(0.01, 10.0);
    for (int trial = 0; trial < 200; ++trial) {
      Vector v(7);
      for (auto& x : v) x = g(rng);
      const double t = tau(rng);
      const Vector p = softmax(v, t);
      CHECK(std::abs(p.sum() - 1.0) < 1e-12);
      CHECK((p.array() >= 0).all());
      // temperature equivalence
      const Vector q = softmax(v / t, 1.0);
      CHECK((p - q).cwiseAbs().maxCoeff() < 1e-12);
      // monotone in v
      for (int i = 0; i < 7; ++i)
        for (int j = 0; j < 7; ++j)
          if (v(i) > v(j)) CHECK(p(i) >= p(j));
      const auto o = oracle::softmax(std::vector<double>(v.data(), v.data() + v.size()), t);
      for (int i = 0; i < 7; ++i) CHECK(p(i) == doctest::Approx(o[i]).epsilon(1e-12));
    }
  }

  TEST_CASE("cosine_sim examples and properties") {
    const Vector v = vec({0.3, -2, 5});
    CHECK(cosine_sim(v, v) == doctest::Approx(1.0));
    CHECK(cosine_sim(vec({1, 0}), vec({0, 1})) == doctest::Approx(0.0));
    CHECK(cosine_sim(vec({1, 1}), vec({1, 0})) == doctest::Approx(1 / std::sqrt(2.0)).epsilon(1e-12));
    CHECK_THROWS_AS(cosine_sim(vec({0, 0}), vec({1, 0})), DomainError);
    CHECK_THROWS_AS(cosine_sim(vec({1, 0, 0}), vec({1, 0})), ShapeError);

    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> s(0.01, 100.0);
    for (int i = 0; i < 100; ++i) {
      Vector u(5), w(5);
      for (auto& x : u) x = g(rng);
      for (auto& x : w) x = g(rng);
      const double c = cosine_sim(u, w);
      CHECK(c <= 1.0);
      CHECK(c >= -1.0);
      CHECK(c == doctest::Approx(cosine_sim(w, u)).epsilon(1e-14));
      CHECK(c == doctest::Approx(cosine_sim(s(rng) * u, s(rng) * w)).epsilon(1e-12));
    }
  }

  TEST_CASE("cross_entropy examples") {
    CHECK(cross_entropy(vec({1, 0}), vec({1, 0})) == doctest::Approx(0.0));
    CHECK(cross_entropy(vec({1, 0}), vec({0.5, 0.5})) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(cross_entropy(vec({0.5, 0.5}), vec({0.5, 0.5})) == doctest::Approx(0.6931).epsilon(1e-4));
    CHECK_THROWS_AS(cross_entropy(vec({1, 0, 0}), vec({1, 0})), ShapeError);
    // clamp keeps the value finite
    CHECK(cross_entropy(vec({1, 0}), vec({0, 1})) == doctest::Approx(-std::log(1e-12)));
  }

  TEST_CASE("finite_diff_check examples") {
    ParamTensor theta(Matrix::Constant(1, 1, 3.0));
    ParamList ps{&theta};
    auto half_sq = [&] { return 0.5 * theta.value.squaredNorm(); };
    theta.grad(0, 0) = 3.0;
    CHECK(finite_diff_check(half_sq, ps) < 1e-8);

    theta.grad.setZero();
    CHECK(finite_diff_check([] { return 4.0; }, ps) == 0.0);

    ParamTensor xy(Matrix(1, 2));
    xy.value << 2, 5;
    xy.grad << 5, 2;
    ParamList p2{&xy};
    CHECK(finite_diff_check([&] { return xy.value(0, 0) * xy.value(0, 1); }, p2) < 1e-6);

    // a wrong gradient is detected
    xy.grad << 5, 3;
    CHECK(finite_diff_check([&] { return xy.value(0, 0) * xy.value(0, 1); }, p2) > 0.1);
  }

  TEST_CASE("normalize_rows backward matches finite differences") {
    std::mt19937_64 rng(11);
    ParamTensor x(random_normal(3, 6, 1.0, rng));
    const Matrix w = random_normal(3, 6, 1.0, rng);
    auto f = [&] { return (normalize_rows(x.value).array() * w.array()).sum(); };
    Vector norms;
    const Matrix y = normalize_rows(x.value, &norms);
    x.grad = normalize_rows_backward(y, norms, w);
    CHECK(oracle::fd_max_rel_error(f, {&x}) < 1e-6);
    CHECK((y.rowwise().norm().array() - 1.0).abs().maxCoeff() < 1e-12);
  }

  TEST_CASE("mlp backward matches finite differences") {
    for (Activation act : {Activation::gelu, Activation::tanh, Activation::identity}) {
      std::mt19937_64 rng(17);
      Mlp net({5, 7, 6, 4}, act, rng);
      const Matrix x = random_normal(3, 5, 1.0, rng);
      const Matrix w = random_normal(3, 4, 1.0, rng);
      auto f = [&] { return (net.forward(x).array() * w.array()).sum(); };
      zero_grads(net.params());
      MlpCache cache;
      net.forward(x, &cache);
      net.backward(cache, w);
      CHECK(oracle::fd_max_rel_error(f, net.params()) < 1e-6);
    }
  }

  TEST_CASE("mlp identity init reproduces its input") {
    Rng rng(1);
    Mlp net({4, 4}, Activation::identity, rng);
    net.set_identity();
    Matrix x(1, 4);
    x << 1, 0, 0, 0;
    CHECK(net.forward(x) == x);
  }

  TEST_CASE("optimizers leave parameters unchanged under zero gradient") {
    std::mt19937_64 rng(2);
    ParamTensor p(random_normal(3, 3, 1.0, rng));
    const Matrix before = p.value;
    Adam adam(0.9, 0.99);
    for (int i = 0; i < 5; ++i) {
      p.zero_grad();
      adam.step({&p}, 1e-2);
    }
    CHECK(p.value == before);
    SgdMomentum sgd(0.9);
    p.zero_grad();
    sgd.step({&p}, 1e-2);
    CHECK(p.value == before);
  }

  TEST_CASE("adam first step moves each coordinate by about lr against the gradient sign") {
    ParamTensor p(Matrix::Zero(1, 3));
    p.grad << 2.0, -0.5, 1e-3;
    Adam adam;
    adam.step({&p}, 0.1);
    CHECK(p.value(0, 0) == doctest::Approx(-0.1).epsilon(1e-6));
    CHECK(p.value(0, 1) == doctest::Approx(0.1).epsilon(1e-6));
    CHECK(p.value(0, 2) == doctest::Approx(-0.1).epsilon(1e-4));
  }
}
