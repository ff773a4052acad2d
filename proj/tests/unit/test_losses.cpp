#include <doctest.h>

#include <cmath>
#include <numeric>

#include "gradchecks.hpp"
#include "larp/errors.hpp"
#include "larp/losses.hpp"
#include "oracles.hpp"

using namespace larp;

namespace {

Matrix mat(int r, int c, std::initializer_list<double> xs) {
  Matrix m(r, c);
  auto it = xs.begin();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = *it++;
  return m;
}

const double kHand = -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0));  // 0.3133

}  // namespace

TEST_SUITE("losses") {
  TEST_CASE("contrast on the orthogonal B=2 instance") {
    const Matrix e = Matrix::Identity(2, 2);
    const Matrix y = relation_targets(2, 2, 0);
    ContrastResult r = contrast(ContrastBatch{e, e, Matrix(0, 2), Matrix(0, 2), y, y}, 1.0);
    CHECK(kHand == doctest::Approx(0.3133).epsilon(1e-4));
    CHECK(r.loss == doctest::Approx(kHand).epsilon(1e-12));
    CHECK(r.loss_a2t == doctest::Approx(kHand).epsilon(1e-12));
    CHECK(r.loss_t2a == doctest::Approx(kHand).epsilon(1e-12));
    const auto rows = oracle::rows_of(e);
    CHECK(r.loss == doctest::Approx(oracle::contrast(rows, rows, {}, {}, oracle::eye_targets(2, 0),
                                                     oracle::eye_targets(2, 0), 1.0)));
  }

  TEST_CASE("uniform targets with equal similarities give ln(B+Q)") {
    for (int b = 1; b <= 4; ++b) {
      for (int q = 0; q <= 3; ++q) {
        const Matrix a = Matrix::Zero(b, 3);
        const Matrix qa = Matrix::Zero(q, 3);
        const Matrix y = Matrix::Constant(b, b + q, 1.0 / (b + q));
        ContrastResult r = contrast(ContrastBatch{a, a, qa, qa, y, y}, 0.3);
        CHECK(r.loss == doctest::Approx(std::log(b + q)).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("contrast matches the loop oracle on random instances") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 50; ++trial) {
      const int b = 1 + trial % 4, q = trial % 5, d = 3 + trial % 6;
      const Matrix a = oracle::unit_rows(b, d, rng), t = oracle::unit_rows(b, d, rng);
      const Matrix qa = oracle::unit_rows(q, d, rng), qt = oracle::unit_rows(q, d, rng);
      const Matrix y1 = gradcheck::pad(gradcheck::random_targets(b, rng), q);
      const Matrix y2 = gradcheck::pad(gradcheck::random_targets(b, rng), q);
      const double tau = 0.07 + 0.1 * trial;
      const double got = contrast(ContrastBatch{a, t, qa, qt, y1, y2}, tau).loss;
      const double want = oracle::contrast(oracle::rows_of(a), oracle::rows_of(t), oracle::rows_of(qa),
                                           oracle::rows_of(qt), oracle::rows_of(y1), oracle::rows_of(y2), tau);
      CHECK(got == doctest::Approx(want).epsilon(1e-10));
      CHECK(got >= 0.0);
    }
  }

  TEST_CASE("contrast gradients, B=3 d=8 Q=2") {
    std::mt19937_64 rng(1);
    CHECK(gradcheck::contrast(rng, 3, 8, 2) < 1e-4);
  }

  TEST_CASE("contrast errors") {
    const Matrix e(0, 2);
    CHECK_THROWS_AS(contrast(ContrastBatch{e, e, e, e, Matrix(0, 0), Matrix(0, 0)}, 1.0), DomainError);
    const Matrix a = Matrix::Identity(2, 2);
    const Matrix y = relation_targets(2, 2, 0);
    CHECK_THROWS_AS(contrast(ContrastBatch{a, a, Matrix(0, 2), Matrix(0, 2), y, y}, 0.0), DomainError);
  }

  TEST_CASE("contrast is invariant to a common permutation of rows") {
    std::mt19937_64 rng(2);
    const int b = 4, q = 2, d = 5;
    const Matrix a = oracle::unit_rows(b, d, rng), t = oracle::unit_rows(b, d, rng);
    const Matrix qa = oracle::unit_rows(q, d, rng), qt = oracle::unit_rows(q, d, rng);
    const Matrix y = gradcheck::random_targets(b, rng);
    const double base = contrast(ContrastBatch{a, t, qa, qt, gradcheck::pad(y, q), gradcheck::pad(y, q)}, 0.5).loss;
    std::vector<int> perm{2, 0, 3, 1};
    Matrix pa(b, d), pt(b, d), py(b, b);
    for (int i = 0; i < b; ++i) {
      pa.row(i) = a.row(perm[i]);
      pt.row(i) = t.row(perm[i]);
      for (int j = 0; j < b; ++j) py(i, j) = y(perm[i], perm[j]);
    }
    const double permuted =
        contrast(ContrastBatch{pa, pt, qa, qt, gradcheck::pad(py, q), gradcheck::pad(py, q)}, 0.5).loss;
    CHECK(permuted == doctest::Approx(base).epsilon(1e-12));
  }

  TEST_CASE("temperature equivalence") {
    std::mt19937_64 rng(3);
    const Matrix a = oracle::unit_rows(3, 4, rng), t = oracle::unit_rows(3, 4, rng);
    const Matrix y = relation_targets(3, 3, 0);
    const double c = 0.25;
    const double scaled = contrast(ContrastBatch{a, t, Matrix(0, 4), Matrix(0, 4), y, y}, c).loss;
    // logits pre-divided by c: scale one side by 1/c
    const double pre = contrast(ContrastBatch{a / c, t, Matrix(0, 4), Matrix(0, 4), y, y}, 1.0).loss;
    CHECK(scaled == doctest::Approx(pre).epsilon(1e-12));
  }

  TEST_CASE("relation_targets rows are distributions with zero queue mass") {
    const Matrix y = relation_targets(3, 3, 2, [](std::size_t r, std::size_t c) { return r == 0 && c == 2; });
    CHECK(y.rows() == 3);
    CHECK(y.cols() == 5);
    for (int r = 0; r < 3; ++r) CHECK(y.row(r).sum() == doctest::Approx(1.0));
    CHECK(y(0, 0) == 0.5);
    CHECK(y(0, 2) == 0.5);
    CHECK(y(1, 1) == 1.0);
    CHECK(y.rightCols(2).isZero());
  }

  TEST_CASE("wtc examples") {
    SUBCASE("aligned distinct embeddings, small temperature") {
      const Matrix e = Matrix::Identity(3, 3);
      CHECK(wtc(e, e, Matrix(0, 3), Matrix(0, 3), 0.01).loss < 1e-30);
    }
    SUBCASE("batch of one with an empty queue") {
      std::mt19937_64 rng(4);
      CHECK(wtc(oracle::unit_rows(1, 4, rng), oracle::unit_rows(1, 4, rng), Matrix(0, 4), Matrix(0, 4), 0.07).loss ==
            0.0);
    }
    SUBCASE("random embeddings, B=4: close to ln 4 on average") {
      std::mt19937_64 rng(5);
      double total = 0.0;
      for (int s = 0; s < 100; ++s) {
        total += wtc(oracle::unit_rows(4, 256, rng), oracle::unit_rows(4, 256, rng), Matrix(0, 256), Matrix(0, 256), 1.0)
                     .loss;
      }
      CHECK(std::abs(total / 100 - std::log(4.0)) < 0.02);
    }
  }

  TEST_CASE("ttc examples") {
    SUBCASE("identical partner features reduce to WTC") {
      EncoderState s = gradcheck::tiny_encoder(4, 7);
      std::mt19937_64 rng(6);
      const Matrix fa = random_normal(3, 5, 1.0, rng), ft = random_normal(3, 4, 1.0, rng);
      const Matrix eye = relation_targets(3, 3, 0);
      const double w = wtc_loss(s, fa, ft).loss;
      const double t = ttc_loss(s, fa, ft, fa, ft, PairTargets{eye, eye}).loss;
      CHECK(t == doctest::Approx(w).epsilon(1e-12));
    }
    SUBCASE("two disjoint pairs, orthogonal, tau 1") {
      const Matrix e = Matrix::Identity(2, 2);
      const Matrix y = relation_targets(2, 2, 0);
      PairContrastResult r = ttc(e, e, e, e, Matrix(0, 2), Matrix(0, 2), y, y, 1.0);
      CHECK(r.loss == doctest::Approx(0.3133).epsilon(1e-4));
    }
    SUBCASE("non co-occurring pair is a contract violation") {
      InteractionGraph g({"p", "q"}, {"a", "b", "c"}, {{"p", "a"}, {"p", "b"}, {"q", "c"}});
      const CooccurrenceGraph o = derive_cooccurrence(g);
      CHECK_NOTHROW(ttc_targets(o, {0}, {1}));
      CHECK_THROWS_AS(ttc_targets(o, {0}, {2}), DomainError);
    }
    SUBCASE("multi-positive targets follow the in-batch co-occurrence") {
      // p1 = {a, b, c}: every in-batch partner of a co-occurs with a
      InteractionGraph g({"p1", "p2"}, {"a", "b", "c", "d"}, {{"p1", "a"}, {"p1", "b"}, {"p1", "c"}, {"p2", "d"}, {"p2", "c"}});
      const CooccurrenceGraph o = derive_cooccurrence(g);
      PairTargets t = ttc_targets(o, {0, 3}, {1, 2});
      CHECK(t.left_right(0, 0) == 0.5);
      CHECK(t.left_right(0, 1) == 0.5);
      CHECK(t.left_right(1, 0) == 0.0);
      CHECK(t.left_right(1, 1) == 1.0);
    }
  }

  TEST_CASE("encoder-level gradients") {
    std::mt19937_64 rng(8);
    for (int i = 0; i < 3; ++i) {
      CHECK(gradcheck::wtc(rng, 1 + i, 6, i) < 1e-4);
      CHECK(gradcheck::ttc(rng, 2 + i, 5, 3 - i) < 1e-4);
      CHECK(gradcheck::tpc(rng, 2 + i, 4, i, 3) < 1e-4);
    }
  }

  TEST_CASE("fuse_playlist examples") {
    const int d = 3;
    FusionParams id;
    id.query = ParamTensor(Matrix::Identity(d, d));
    id.key = ParamTensor(Matrix::Identity(d, d));
    id.value = ParamTensor(Matrix::Identity(d, d));
    Matrix x = mat(1, 3, {0.6, 0.8, 0});
    CHECK(fuse_playlist(id, x).isApprox(x.row(0).transpose(), 1e-15));

    Rng rng(9);
    FusionParams any = make_fusion_params(d, rng, 1.0);
    any.value.value += random_normal(d, d, 0.5, rng);
    Matrix twice(2, d);
    twice << x, x;
    CHECK(fuse_playlist(any, twice).isApprox(fuse_playlist(any, x), 1e-14));

    const Matrix m = random_normal(3, d, 1.0, rng);
    const Matrix w = attention_weights(any, m);
    for (int r = 0; r < 3; ++r) CHECK(w.row(r).sum() == doctest::Approx(1.0).epsilon(1e-14));

    Matrix shuffled(3, d);
    shuffled << m.row(2), m.row(0), m.row(1);
    CHECK(fuse_playlist(any, shuffled).isApprox(fuse_playlist(any, m), 1e-13));
    CHECK(fuse_playlist(any, m).norm() == doctest::Approx(1.0));

    CHECK_THROWS_AS(fuse_playlist(any, Matrix(0, d)), DomainError);
  }

  TEST_CASE("tpc examples") {
    SUBCASE("playlist of copies of the anchor reduces to WTC") {
      std::mt19937_64 rng(10);
      const int d = 4;
      FusionParams id;
      id.query = ParamTensor(Matrix::Identity(d, d));
      id.key = ParamTensor(Matrix::Identity(d, d));
      id.value = ParamTensor(Matrix::Identity(d, d));
      const Matrix a = oracle::unit_rows(3, d, rng), t = oracle::unit_rows(3, d, rng);
      Matrix pa(3, d), pt(3, d);
      for (int i = 0; i < 3; ++i) {
        pa.row(i) = fuse_playlist(id, a.row(i).replicate(3, 1)).transpose();
        pt.row(i) = fuse_playlist(id, t.row(i).replicate(3, 1)).transpose();
      }
      const Matrix eye = relation_targets(3, 3, 0);
      const double w = wtc(a, t, Matrix(0, d), Matrix(0, d), 0.5).loss;
      const double p = tpc(a, t, pa, pt, Matrix(0, d), Matrix(0, d), eye, eye, 0.5).loss;
      CHECK(p == doctest::Approx(w).epsilon(1e-12));
    }
    SUBCASE("fused reps match the anchors' opposite modality, tau 1") {
      const Matrix e = Matrix::Identity(2, 2);
      const Matrix y = relation_targets(2, 2, 0);
      CHECK(tpc(e, e, e, e, Matrix(0, 2), Matrix(0, 2), y, y, 1.0).loss == doctest::Approx(0.3133).epsilon(1e-4));
    }
    SUBCASE("targets mark every playlist containing the track") {
      InteractionGraph g({"p", "q"}, {"a", "b"}, {{"p", "a"}, {"p", "b"}, {"q", "b"}});
      PairTargets t = tpc_targets(g, {0, 1}, {0, 1});
      // track b is in both p and q
      CHECK(t.left_right(1, 0) == 0.5);
      CHECK(t.left_right(1, 1) == 0.5);
      CHECK(t.right_left(0, 0) == 0.5);
      CHECK(t.right_left(0, 1) == 0.5);
      CHECK_THROWS_AS(tpc_targets(g, {0}, {1}), DomainError);
    }
  }

  TEST_CASE("stage_objective") {
    CHECK(stage_objective(1, {0.5, {}, {}}) == 0.5);
    CHECK(stage_objective(3, {0.1, 0.2, 0.3}) == doctest::Approx(0.6));
    CHECK(stage_objective(2, {1.0, 2.0, {}}, 0.5) == 1.5);
    CHECK_THROWS_AS(stage_objective(2, {1.0, {}, {}}), ConfigError);
    CHECK_THROWS_AS(stage_objective(4, {1.0, 1.0, 1.0}), ConfigError);
  }

  TEST_CASE("stage-2 gradient is the sum of the WTC and TTC gradients") {
    std::mt19937_64 rng(12);
    EncoderState s = gradcheck::tiny_encoder(5, 3);
    const Matrix ai = random_normal(3, 5, 1.0, rng), ti = random_normal(3, 4, 1.0, rng);
    const Matrix aj = random_normal(3, 5, 1.0, rng), tj = random_normal(3, 4, 1.0, rng);
    PairTargets y{gradcheck::random_targets(3, rng), gradcheck::random_targets(3, rng)};

    auto grads = [&] {
      std::vector<Matrix> g;
      for (auto* p : s.trainable()) g.push_back(p->grad);
      return g;
    };
    zero_grads(s.trainable());
    wtc_loss(s, ai, ti);
    const auto gw = grads();
    zero_grads(s.trainable());
    ttc_loss(s, ai, ti, aj, tj, y);
    const auto gt = grads();
    zero_grads(s.trainable());
    wtc_loss(s, ai, ti);
    ttc_loss(s, ai, ti, aj, tj, y);
    const auto both = grads();
    for (std::size_t i = 0; i < both.size(); ++i) CHECK(both[i].isApprox(gw[i] + gt[i], 1e-13));

    auto f = [&] {
      auto [a, t] = encode_batch(s, ai, ti);
      auto [pa, pt] = encode_batch(s, aj, tj);
      const Matrix q(0, 5);
      return stage_objective(2, {wtc(a, t, q, q, s.config.temperature).loss,
                                 ttc(a, t, pa, pt, q, q, y.left_right, y.right_left, s.config.temperature).loss,
                                 {}});
    };
    CHECK(oracle::fd_max_rel_error(f, s.trainable()) < 1e-4);
  }

  TEST_CASE("losses are finite and non-negative on random inputs") {
    std::mt19937_64 rng(13);
    for (int i = 0; i < 30; ++i) {
      const Matrix a = oracle::unit_rows(4, 6, rng), t = oracle::unit_rows(4, 6, rng);
      const Matrix q = oracle::unit_rows(3, 6, rng);
      const double w = wtc(a, t, q, q, 0.07).loss;
      CHECK(std::isfinite(w));
      CHECK(w >= 0.0);
    }
  }
}
