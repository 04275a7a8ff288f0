#include <doctest.h>

#include <cmath>
#include <vector>

#include "mml/ops.hpp"
#include "mml/rng.hpp"

using namespace mml;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = scale * rng.normal();
  return t;
}

}  // namespace

TEST_CASE("tensor at() validates rank and range") {
  Tensor t({2, 3});
  for (std::size_t i = 0; i < 6; ++i) t[i] = static_cast<double>(i);
  CHECK(t.at({1, 2}) == 5.0);
  CHECK_THROWS_AS(t.at({1}), Error);
  CHECK_THROWS_AS(t.at({2, 0}), Error);
}

TEST_CASE("matmul matches the triple-loop oracle") {
  Rng rng(42);
  Tensor a = random_tensor({4, 7}, rng);
  Tensor b = random_tensor({7, 5}, rng);
  Var c = matmul(make_leaf(a), make_leaf(b));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      double want = 0.0;
      for (std::size_t k = 0; k < 7; ++k)
        want += a.at({i, k}) * b.at({k, j});
      CHECK(c->value.at({i, j}) == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
  Tensor a({2, 3}), b({4, 2});
  CHECK_THROWS_AS(matmul(make_leaf(a), make_leaf(b)), Error);
}

TEST_CASE("conv2d matches the six-nested-loop oracle") {
  Rng rng(7);
  const std::size_t B = 2, C = 3, H = 6, W = 6, F = 4, K = 3;
  const std::size_t stride = 2, pad = 1;
  Tensor x = random_tensor({B, C, H, W}, rng);
  Tensor k = random_tensor({F, C, K, K}, rng);
  Var y = conv2d(make_leaf(x), make_leaf(k), stride, pad);
  const std::size_t Ho = (H + 2 * pad - K) / stride + 1;
  const std::size_t Wo = (W + 2 * pad - K) / stride + 1;
  REQUIRE(y->value.shape == std::vector<std::size_t>{B, F, Ho, Wo});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t i = 0; i < Ho; ++i)
        for (std::size_t j = 0; j < Wo; ++j) {
          double want = 0.0;
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t u = 0; u < K; ++u)
              for (std::size_t v = 0; v < K; ++v) {
                const long ii = static_cast<long>(i * stride + u) -
                                static_cast<long>(pad);
                const long jj = static_cast<long>(j * stride + v) -
                                static_cast<long>(pad);
                if (ii < 0 || jj < 0 || ii >= static_cast<long>(H) ||
                    jj >= static_cast<long>(W))
                  continue;
                want += x.at({b, c, static_cast<std::size_t>(ii),
                              static_cast<std::size_t>(jj)}) *
                        k.at({f, c, u, v});
              }
          CHECK(y->value.at({b, f, i, j}) ==
                doctest::Approx(want).epsilon(1e-12));
        }
}

TEST_CASE("conv2d rejects channel mismatch") {
  Tensor x({1, 3, 6, 6}), k({2, 4, 3, 3});
  CHECK_THROWS_AS(conv2d(make_leaf(x), make_leaf(k), 1, 1), Error);
}

TEST_CASE("softmax_cross_entropy matches the log-sum-exp oracle") {
  Rng rng(3);
  const std::size_t B = 5, K = 7;
  Tensor logits = random_tensor({B, K}, rng, 3.0);
  std::vector<int> labels = {0, 3, 6, 2, 2};
  Var loss = softmax_cross_entropy(make_leaf(logits), labels);
  double want = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    double mx = logits.at({b, 0});
    for (std::size_t k = 1; k < K; ++k) mx = std::max(mx, logits.at({b, k}));
    double lse = 0.0;
    for (std::size_t k = 0; k < K; ++k) lse += std::exp(logits.at({b, k}) - mx);
    lse = mx + std::log(lse);
    want += lse - logits.at({b, static_cast<std::size_t>(labels[b])});
  }
  want /= static_cast<double>(B);
  CHECK(loss->value[0] == doctest::Approx(want).epsilon(1e-10));
}

TEST_CASE("softmax_cross_entropy validates labels") {
  Tensor logits({2, 3});
  CHECK_THROWS_AS(softmax_cross_entropy(make_leaf(logits), {0, 3}), Error);
  CHECK_THROWS_AS(softmax_cross_entropy(make_leaf(logits), {0}), Error);
}

TEST_CASE("global_avg_pool averages spatial cells and is linear") {
  Rng rng(9);
  Tensor x = random_tensor({2, 3, 4, 5}, rng);
  Var p = global_avg_pool(make_leaf(x));
  REQUIRE(p->value.shape == std::vector<std::size_t>{2, 3});
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t c = 0; c < 3; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 5; ++j) s += x.at({b, c, i, j});
      CHECK(p->value.at({b, c}) == doctest::Approx(s / 20.0).epsilon(1e-12));
    }
  // linearity: pool(2x) == 2 pool(x)
  Tensor x2 = x;
  for (auto& v : x2.data) v *= 2.0;
  Var p2 = global_avg_pool(make_leaf(x2));
  for (std::size_t i = 0; i < p->value.size(); ++i)
    CHECK(p2->value[i] == doctest::Approx(2.0 * p->value[i]).epsilon(1e-12));
}

TEST_CASE("channel_scale with w = 0 is an exact identity") {
  Rng rng(12);
  Tensor a = random_tensor({2, 4, 3, 3}, rng);
  Tensor w({4});  // zeros: 2*sigmoid(0) == 1.0 exactly
  Var out = channel_scale(make_leaf(a), make_leaf(w));
  REQUIRE(out->value.shape == a.shape);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(out->value[i] == a[i]);
}

TEST_CASE("channel_scale applies 2*sigmoid(w) per channel") {
  Tensor a({1, 2, 1, 1});
  a[0] = 3.0;
  a[1] = -2.0;
  Tensor w = Tensor::vec({0.7, -1.3});
  Var out = channel_scale(make_leaf(a), make_leaf(w));
  auto g = [](double x) { return 2.0 / (1.0 + std::exp(-x)); };
  CHECK(out->value[0] == doctest::Approx(3.0 * g(0.7)).epsilon(1e-12));
  CHECK(out->value[1] == doctest::Approx(-2.0 * g(-1.3)).epsilon(1e-12));
}

TEST_CASE("channel_scale accepts per-sample gates") {
  Tensor a({2, 2});
  a.data = {1.0, 2.0, 3.0, 4.0};
  Tensor w({2, 2});
  w.data = {0.0, 0.5, -0.5, 0.0};
  Var out = channel_scale(make_leaf(a), make_leaf(w));
  auto g = [](double x) { return 2.0 / (1.0 + std::exp(-x)); };
  CHECK(out->value[0] == doctest::Approx(1.0 * g(0.0)));
  CHECK(out->value[1] == doctest::Approx(2.0 * g(0.5)));
  CHECK(out->value[2] == doctest::Approx(3.0 * g(-0.5)));
  CHECK(out->value[3] == doctest::Approx(4.0 * g(0.0)));
}

TEST_CASE("concat_channels joins rows and validates batch sizes") {
  Tensor a({2, 2}), b({2, 3});
  a.data = {1, 2, 3, 4};
  b.data = {5, 6, 7, 8, 9, 10};
  Var c = concat_channels(make_leaf(a), make_leaf(b));
  REQUIRE(c->value.shape == std::vector<std::size_t>{2, 5});
  CHECK(c->value.data == std::vector<double>{1, 2, 5, 6, 7, 3, 4, 8, 9, 10});
  Tensor bad({3, 3});
  CHECK_THROWS_AS(concat_channels(make_leaf(a), make_leaf(bad)), Error);
}

TEST_CASE("batch_norm normalizes per channel in training mode") {
  Rng rng(5);
  Tensor x = random_tensor({4, 2, 3, 3}, rng, 2.0);
  Var gamma = make_leaf(Tensor({2}, 1.0), true, "g");
  Var beta = make_leaf(Tensor({2}, 0.0), true, "b");
  BatchNormState st;
  st.init(2);
  Var y = batch_norm(make_leaf(x), gamma, beta, st, /*training=*/true);
  // per-channel mean ~0, population variance ~1
  for (std::size_t c = 0; c < 2; ++c) {
    double s = 0.0, s2 = 0.0;
    std::size_t n = 0;
    for (std::size_t b = 0; b < 4; ++b)
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
          double v = y->value.at({b, c, i, j});
          s += v;
          s2 += v * v;
          ++n;
        }
    const double mean = s / n;
    CHECK(mean == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(s2 / n - mean * mean == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("batch_norm eval mode reads running stats and mutates nothing") {
  Tensor x({1, 1, 2, 2});
  x.data = {1.0, 2.0, 3.0, 4.0};
  Var gamma = make_leaf(Tensor({1}, 2.0), true, "g");
  Var beta = make_leaf(Tensor({1}, 0.5), true, "b");
  BatchNormState st;
  st.init(1);
  st.running_mean[0] = 1.0;
  st.running_var[0] = 4.0;
  Var y = batch_norm(make_leaf(x), gamma, beta, st, /*training=*/false);
  const double is = 1.0 / std::sqrt(4.0 + 1e-5);
  CHECK(y->value[0] == doctest::Approx(2.0 * (1.0 - 1.0) * is + 0.5));
  CHECK(y->value[3] == doctest::Approx(2.0 * (4.0 - 1.0) * is + 0.5));
  CHECK(st.running_mean[0] == 1.0);
  CHECK(st.running_var[0] == 4.0);
}

TEST_CASE("group norms sum over a parameter group and reject empty groups") {
  Var a = make_leaf(Tensor::vec({3.0, 4.0}), true, "a");
  Var b = make_leaf(Tensor::vec({1.0}), true, "b");
  CHECK(group_sq_norm({a, b}) == doctest::Approx(26.0));
  a->ensure_grad().data = {1.0, 2.0};
  b->ensure_grad().data = {3.0};
  CHECK(group_grad_sq_norm({a, b}) == doctest::Approx(14.0));
  CHECK_THROWS_AS(group_sq_norm({}), Error);
}

TEST_CASE("backward accumulates through a small expression") {
  // loss = sum(relu(a) * b); da = b where a>0 else 0, db = relu(a)
  Var a = make_leaf(Tensor::vec({1.0, -2.0, 3.0}), true, "a");
  Var b = make_leaf(Tensor::vec({4.0, 5.0, -6.0}), true, "b");
  Var loss = sum_all(mul(relu(a), b));
  backward(loss);
  CHECK(a->grad.data == std::vector<double>{4.0, 0.0, -6.0});
  CHECK(b->grad.data == std::vector<double>{1.0, 0.0, 3.0});
}

TEST_CASE("backward requires a scalar loss") {
  Var a = make_leaf(Tensor::vec({1.0, 2.0}), true, "a");
  CHECK_THROWS_AS(backward(relu(a)), Error);
}

TEST_CASE("NoGradGuard produces detached value-only nodes") {
  Var a = make_leaf(Tensor::vec({1.0, -1.0}), true, "a");
  NoGradGuard ng;
  Var y = relu(a);
  CHECK(y->parents.empty());
  CHECK_FALSE(y->requires_grad);
}
