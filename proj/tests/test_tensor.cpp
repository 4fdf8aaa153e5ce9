#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "skelfall/tensor.hpp"

using namespace skelfall;
using oracles::gradcheck;
using oracles::random_weights;
using oracles::weighted_total;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, bool requires_grad = true,
                     real offset = real(0)) {
  Tensor t = Tensor::uniform(shape, real(1), rng, requires_grad);
  if (offset != real(0))
    for (auto& v : t.data()) v += v >= 0 ? offset : -offset;  // keep clear of relu kinks
  return t;
}

}  // namespace

TEST_CASE("matmul identity and dot product") {
  Tensor eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  Tensor out = matmul(eye, a);
  CHECK(out.data() == a.data());

  Tensor row = Tensor::from_data({1, 2}, {1, 2});
  Tensor col = Tensor::from_data({2, 1}, {3, 4});
  CHECK(matmul(row, col).item() == real(11));
}

TEST_CASE("matmul shape error names both shapes") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({2, 3});
  CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[2, 3]"), Error);
}

TEST_CASE("matmul gradient matches finite differences") {
  std::mt19937_64 rng(7);
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({4, 2}, rng);
  const auto w = random_weights(6, rng);
  const double err = gradcheck([&] { return weighted_total(matmul(a, b), w); }, {a, b});
  CHECK(err < 1e-6);
}

TEST_CASE("conv2d identity kernel is exact") {
  Tensor x = Tensor::from_data({1, 1, 3, 1}, {1, 2, 3});
  Tensor k = Tensor::from_data({1, 1, 1, 1}, {1});
  Tensor out = conv2d(x, k, {});
  CHECK(out.shape() == Shape{1, 1, 3, 1});
  CHECK(out.data() == x.data());
}

TEST_CASE("conv2d hand-computed temporal window") {
  Tensor x = Tensor::from_data({1, 1, 3, 1}, {1, 2, 3});
  Tensor k = Tensor::from_data({1, 1, 2, 1}, {1, 1});
  Tensor out = conv2d(x, k, {});
  REQUIRE(out.shape() == Shape{1, 1, 2, 1});
  CHECK(out.data()[0] == real(3));
  CHECK(out.data()[1] == real(5));
}

TEST_CASE("conv2d rejects oversized kernels") {
  Tensor x = Tensor::zeros({1, 1, 3, 2});
  Tensor k = Tensor::zeros({1, 1, 5, 1});
  CHECK_THROWS_AS(conv2d(x, k, {}), Error);
}

TEST_CASE("conv2d gradient matches finite differences") {
  std::mt19937_64 rng(11);
  Tensor x = random_tensor({2, 3, 8, 5}, rng);
  Tensor w = random_tensor({4, 3, 3, 1}, rng);
  Conv2dOpts opts;
  opts.stride_t = 2;
  opts.pad_t = 1;
  const auto weights = random_weights(2 * 4 * 4 * 5, rng);
  const double err =
      gradcheck([&] { return weighted_total(conv2d(x, w, opts), weights); }, {x, w});
  CHECK(err < 1e-6);
}

TEST_CASE("conv2d padded joint axis gradient") {
  std::mt19937_64 rng(13);
  Tensor x = random_tensor({1, 2, 5, 4}, rng);
  Tensor w = random_tensor({3, 2, 3, 3}, rng);
  Conv2dOpts opts;
  opts.pad_t = 1;
  opts.pad_v = 1;
  const auto weights = random_weights(1 * 3 * 5 * 4, rng);
  const double err =
      gradcheck([&] { return weighted_total(conv2d(x, w, opts), weights); }, {x, w});
  CHECK(err < 1e-6);
}

TEST_CASE("batch_norm maps constant channels to zero via the epsilon guard") {
  BatchNorm bn = BatchNorm::make(2);
  Tensor x = Tensor::full({3, 2, 4, 5}, real(9));
  Tensor out = batch_norm(x, bn, true);
  for (real v : out.data()) CHECK(v == real(0));
}

TEST_CASE("batch_norm normalizes batch statistics") {
  std::mt19937_64 rng(17);
  BatchNorm bn = BatchNorm::make(1);
  Tensor x = Tensor::uniform({4, 1, 10, 10}, real(2), rng);
  for (auto& v : x.data()) v = v * 1 + 5;  // mean 5-ish, nontrivial spread
  Tensor out = batch_norm(x, bn, true);
  double mean = 0;
  for (real v : out.data()) mean += static_cast<double>(v);
  mean /= static_cast<double>(out.numel());
  double var = 0;
  for (real v : out.data()) var += (static_cast<double>(v) - mean) * (static_cast<double>(v) - mean);
  var /= static_cast<double>(out.numel());
  CHECK(std::abs(mean) < 1e-6);
  CHECK(std::sqrt(var) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("batch_norm eval mode is the running-stat affine map") {
  BatchNorm bn = BatchNorm::make(1);
  bn.gamma.data()[0] = 2;
  bn.beta.data()[0] = 3;
  bn.running_mean[0] = 0;
  bn.running_var[0] = 1;
  bn.eps = 0;  // exact affine for the closed-form check
  Tensor x = Tensor::from_data({1, 1, 1, 1}, {1});
  Tensor out = batch_norm(x, bn, false);
  CHECK(out.item() == doctest::Approx(5).epsilon(1e-12));
}

TEST_CASE("batch_norm gradients match finite differences") {
  std::mt19937_64 rng(19);
  for (const bool training : {true, false}) {
    CAPTURE(training);
    BatchNorm bn = BatchNorm::make(3);
    bn.gamma = random_tensor({3}, rng);
    bn.beta = random_tensor({3}, rng);
    bn.running_mean = {real(0.1), real(-0.2), real(0.3)};
    bn.running_var = {real(1.1), real(0.9), real(1.3)};
    Tensor x = random_tensor({2, 3, 4, 3}, rng);
    const auto weights = random_weights(x.numel(), rng);
    const double err = gradcheck(
        [&] { return weighted_total(batch_norm(x, bn, training), weights); }, {x, bn.gamma, bn.beta});
    CHECK(err < 1e-5);
  }
}

TEST_CASE("relu sign cases and subgradient at zero") {
  Tensor x = Tensor::from_data({3}, {-1, 0, 2}, true);
  Tensor out = relu(x);
  CHECK(out.data() == std::vector<real>{0, 0, 2});
  weighted_total(out, {1, 1, 1}).backward();
  CHECK(x.grad() == std::vector<real>{0, 0, 1});
}

TEST_CASE("add broadcasts trailing shapes and rejects mismatches") {
  Tensor a = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor b = Tensor::from_data({3}, {10, 20, 30});
  Tensor out = add(a, b);
  CHECK(out.data() == std::vector<real>{11, 22, 33, 14, 25, 36});
  Tensor bad = Tensor::zeros({2});
  CHECK_THROWS_AS(add(a, bad), Error);
}

TEST_CASE("elementwise and reduction gradients") {
  std::mt19937_64 rng(23);
  SUBCASE("add with broadcast") {
    Tensor a = random_tensor({2, 3, 2}, rng);
    Tensor b = random_tensor({3, 2}, rng);
    const auto w = random_weights(a.numel(), rng);
    CHECK(gradcheck([&] { return weighted_total(add(a, b), w); }, {a, b}) < 1e-6);
  }
  SUBCASE("mul") {
    Tensor a = random_tensor({4, 5}, rng);
    Tensor b = random_tensor({4, 5}, rng);
    const auto w = random_weights(a.numel(), rng);
    CHECK(gradcheck([&] { return weighted_total(mul(a, b), w); }, {a, b}) < 1e-6);
  }
  SUBCASE("relu away from the kink") {
    Tensor x = random_tensor({3, 4}, rng, true, real(0.25));
    const auto w = random_weights(x.numel(), rng);
    CHECK(gradcheck([&] { return weighted_total(relu(x), w); }, {x}) < 1e-6);
  }
  SUBCASE("channel bias") {
    Tensor x = random_tensor({2, 3, 2, 2}, rng);
    Tensor b = random_tensor({3}, rng);
    const auto w = random_weights(x.numel(), rng);
    CHECK(gradcheck([&] { return weighted_total(add_channel_bias(x, b), w); }, {x, b}) < 1e-6);
  }
  SUBCASE("global average pool") {
    Tensor x = random_tensor({2, 3, 4, 5}, rng);
    const auto w = random_weights(6, rng);
    CHECK(gradcheck([&] { return weighted_total(global_avg_pool(x), w); }, {x}) < 1e-6);
  }
  SUBCASE("group mean") {
    Tensor x = random_tensor({6, 4}, rng);
    const auto w = random_weights(12, rng);
    CHECK(gradcheck([&] { return weighted_total(group_mean(x, 2), w); }, {x}) < 1e-6);
  }
  SUBCASE("transpose2d") {
    Tensor x = random_tensor({3, 5}, rng);
    const auto w = random_weights(15, rng);
    CHECK(gradcheck([&] { return weighted_total(transpose2d(x), w); }, {x}) < 1e-6);
  }
}

TEST_CASE("global_avg_pool of a constant tensor returns the constant") {
  Tensor x = Tensor::full({2, 3, 4, 5}, real(7));
  Tensor out = global_avg_pool(x);
  for (real v : out.data()) CHECK(v == doctest::Approx(7).epsilon(1e-12));
}

TEST_CASE("linear gradient matches finite differences") {
  std::mt19937_64 rng(29);
  Tensor x = random_tensor({4, 3}, rng);
  Tensor w = random_tensor({3, 2}, rng);
  Tensor b = random_tensor({2}, rng);
  const auto weights = random_weights(8, rng);
  CHECK(gradcheck([&] { return weighted_total(linear(x, w, b), weights); }, {x, w, b}) < 1e-6);
}

TEST_CASE("softmax cross entropy closed forms") {
  Tensor uniform = Tensor::from_data({1, 2}, {0, 0});
  CHECK(softmax_cross_entropy(uniform, {0}).item() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Tensor confident = Tensor::from_data({1, 2}, {10, -10});
  CHECK(softmax_cross_entropy(confident, {0}).item() ==
        doctest::Approx(std::log1p(std::exp(-20.0))).epsilon(1e-6));

  CHECK_THROWS_AS(softmax_cross_entropy(uniform, {2}), Error);
  CHECK_THROWS_AS(softmax_cross_entropy(uniform, {-1}), Error);
}

TEST_CASE("softmax cross entropy gradient matches finite differences") {
  std::mt19937_64 rng(31);
  Tensor logits = random_tensor({5, 3}, rng);
  const std::vector<int> labels{0, 2, 1, 1, 0};
  CHECK(gradcheck([&] { return softmax_cross_entropy(logits, labels); }, {logits}) < 1e-6);
}

TEST_CASE("ops never mutate inputs and forwards are deterministic") {
  std::mt19937_64 rng(37);
  Tensor a = random_tensor({3, 3}, rng);
  Tensor b = random_tensor({3, 3}, rng);
  const auto a_before = a.data();
  const auto b_before = b.data();
  Tensor out1 = matmul(a, b);
  weighted_total(out1, random_weights(9, rng)).backward();
  CHECK(a.data() == a_before);
  CHECK(b.data() == b_before);

  Tensor out2 = matmul(a, b);
  CHECK(out1.data() == out2.data());  // bit-identical
}

TEST_CASE("backward accumulates only into grad fields") {
  Tensor x = Tensor::from_data({2}, {1, 2}, true);
  Tensor loss = weighted_total(relu(x), {1, 1});
  loss.backward();
  const auto g1 = x.grad();
  loss = weighted_total(relu(x), {1, 1});
  loss.backward();
  for (size_t i = 0; i < g1.size(); ++i)
    CHECK(x.grad()[i] == doctest::Approx(2 * g1[i]).epsilon(1e-12));
}

TEST_CASE("randomized gradient property across every differentiable op") {
  // The tensor-core gradient property: analytic == central differences within
  // 1e-5 on randomized small shapes, many seeds.
  int checked = 0;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed * 977 + 13);
    const int64_t m = 2 + static_cast<int64_t>(rng() % 3);
    const int64_t k = 2 + static_cast<int64_t>(rng() % 3);
    const int64_t n = 2 + static_cast<int64_t>(rng() % 3);
    switch (seed % 5) {
      case 0: {
        Tensor a = random_tensor({m, k}, rng);
        Tensor b = random_tensor({k, n}, rng);
        const auto w = random_weights(m * n, rng);
        CHECK(gradcheck([&] { return weighted_total(matmul(a, b), w); }, {a, b}) < 1e-5);
        break;
      }
      case 1: {
        Tensor x = random_tensor({m, k, 4, n}, rng);
        Tensor w = random_tensor({2, k, 3, 1}, rng);
        Conv2dOpts opts;
        opts.pad_t = 1;
        const auto weights = random_weights(m * 2 * 4 * n, rng);
        CHECK(gradcheck([&] { return weighted_total(conv2d(x, w, opts), weights); }, {x, w}) <
              1e-5);
        break;
      }
      case 2: {
        BatchNorm bn = BatchNorm::make(k);
        Tensor x = random_tensor({m, k, 3, n}, rng);
        const auto w = random_weights(x.numel(), rng);
        CHECK(gradcheck([&] { return weighted_total(batch_norm(x, bn, true), w); },
                        {x, bn.gamma, bn.beta}) < 1e-5);
        break;
      }
      case 3: {
        Tensor x = random_tensor({m, k}, rng, true, real(0.25));
        const auto w = random_weights(m * k, rng);
        CHECK(gradcheck([&] { return weighted_total(relu(x), w); }, {x}) < 1e-5);
        break;
      }
      case 4: {
        Tensor x = random_tensor({m, k}, rng);
        Tensor w = random_tensor({k, n}, rng);
        Tensor b = random_tensor({n}, rng);
        const std::vector<int> labels(static_cast<size_t>(m), static_cast<int>(n - 1));
        CHECK(gradcheck([&] { return softmax_cross_entropy(linear(x, w, b), labels); },
                        {x, w, b}) < 1e-5);
        break;
      }
    }
    ++checked;
  }
  CHECK(checked == 100);
}
