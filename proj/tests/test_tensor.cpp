// Copyright 2026 The advsig Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <catch2/catch_amalgamated.hpp>

#include "advsig/conv.hpp"
#include "advsig/features.hpp"
#include "advsig/nn.hpp"
#include "advsig/tensor.hpp"
#include "gradcheck.hpp"

using namespace advsig;
using advsig::testutil::max_grad_error;
using advsig::testutil::random_vec;

TEST_CASE("elementwise and reduction gradients match finite differences", "[tensor][gradcheck]") {
  Rng rng(7);
  auto x = random_vec(12, rng, 0.2, 1.5);  // positive domain so log/sqrt are safe

  auto check = [&](const char* name, std::function<Tensor(const Tensor&)> f) {
    INFO(name);
    REQUIRE(max_grad_error(f, x, {12}) < 1e-6);
  };

  check("sum(relu)", [](const Tensor& t) { return sum_all(relu(add_scalar(t, -0.8))); });
  check("mean(square)", [](const Tensor& t) { return mean_all(square(t)); });
  check("sum(tanh)", [](const Tensor& t) { return sum_all(tanh_t(t)); });
  check("sum(sigmoid)", [](const Tensor& t) { return sum_all(sigmoid_t(t)); });
  check("sum(log)", [](const Tensor& t) { return sum_all(log_t(t)); });
  check("sum(sqrt)", [](const Tensor& t) { return sum_all(sqrt_t(t)); });
  check("sum(abs(x-1))", [](const Tensor& t) { return sum_all(abs_t(add_scalar(t, -1.0))); });
  check("sum(clamp_min)", [](const Tensor& t) { return sum_all(clamp_min_t(t, 0.7)); });
  check("mul/div mix", [](const Tensor& t) {
    Tensor a = mul(t, add_scalar(t, 0.5));
    return sum_all(div(a, add_scalar(square(t), 1.0)));
  });
  check("softmax entropy-ish", [](const Tensor& t) {
    Tensor s = softmax_vec(t);
    return neg(sum_all(mul(s, log_t(add_scalar(s, 1e-12)))));
  });
}

TEST_CASE("channel/broadcast op gradients", "[tensor][gradcheck]") {
  Rng rng(11);
  auto x = random_vec(2 * 3 * 4, rng);

  REQUIRE(max_grad_error([](const Tensor& t) { return sum_all(square(channel_mean(t))); }, x, {2, 3, 4}) < 1e-6);
  REQUIRE(max_grad_error([](const Tensor& t) { return sum_all(square(freq_mean(t))); }, x, {2, 3, 4}) < 1e-6);

  auto v = random_vec(2, rng);
  Tensor vc = Tensor::from(v, {2});
  REQUIRE(max_grad_error([&](const Tensor& t) { return sum_all(square(mul_channels(t, vc))); }, x, {2, 3, 4}) < 1e-6);
  REQUIRE(max_grad_error([&](const Tensor& t) { return sum_all(square(add_channels(t, vc))); }, x, {2, 3, 4}) < 1e-6);

  auto f = random_vec(3, rng);
  Tensor fv = Tensor::from(f, {3});
  REQUIRE(max_grad_error([&](const Tensor& t) { return sum_all(square(mul_freq(t, fv))); }, x, {2, 3, 4}) < 1e-6);

  // gradient with respect to the scaling vector too
  auto xv = random_vec(2 * 5, rng);
  Tensor xc = Tensor::from(xv, {2, 5});
  REQUIRE(max_grad_error([&](const Tensor& t) { return sum_all(square(mul_time(xc, t))); },
                         random_vec(5, rng), {5}) < 1e-6);
  REQUIRE(max_grad_error([&](const Tensor& t) { return sum_all(square(mul_channels(xc, t))); },
                         random_vec(2, rng), {2}) < 1e-6);
}

TEST_CASE("matmul and linear gradients", "[tensor][gradcheck]") {
  Rng rng(13);
  auto a = random_vec(6, rng);
  Tensor b = Tensor::from(random_vec(12, rng), {3, 4});
  REQUIRE(max_grad_error([&](const Tensor& t) { return sum_all(square(matmul(reshape(t, {2, 3}), b))); }, a, {6}) <
          1e-6);

  Tensor w = Tensor::from(random_vec(15, rng), {5, 3});
  Tensor bias = Tensor::from(random_vec(5, rng), {5});
  REQUIRE(max_grad_error([&](const Tensor& t) { return sum_all(square(linear(t, w, bias))); },
                         random_vec(3, rng), {3}) < 1e-6);
  // weight gradient
  Tensor xin = Tensor::from(random_vec(3, rng), {3});
  REQUIRE(max_grad_error([&](const Tensor& t) { return sum_all(square(linear(xin, reshape(t, {5, 3}), bias))); },
                         random_vec(15, rng), {15}) < 1e-6);
}

TEST_CASE("cross entropy, gather, masked_max gradients", "[tensor][gradcheck]") {
  Rng rng(17);
  auto z = random_vec(8, rng, -2.0, 2.0);
  REQUIRE(max_grad_error([](const Tensor& t) { return cross_entropy_logits(t, 3); }, z, {8}) < 1e-6);
  REQUIRE(max_grad_error([](const Tensor& t) { return gather_index(t, 2); }, z, {8}) < 1e-6);
  REQUIRE(max_grad_error([](const Tensor& t) { return masked_max(mul(t, t), 1); }, z, {8}) < 1e-6);

  SECTION("cross entropy rejects out-of-range labels") {
    Tensor t = Tensor::from(z, {8});
    REQUIRE_THROWS_AS(cross_entropy_logits(t, 8), DataError);
    REQUIRE_THROWS_AS(cross_entropy_logits(t, -1), DataError);
  }
}

TEST_CASE("shape op gradients", "[tensor][gradcheck]") {
  Rng rng(19);
  auto x = random_vec(10, rng);
  REQUIRE(max_grad_error([](const Tensor& t) { return sum_all(square(crop1d(t, 2, 5))); }, x, {10}) < 1e-6);
  REQUIRE(max_grad_error([](const Tensor& t) { return sum_all(square(pad1d(t, 3, 2))); }, x, {10}) < 1e-6);
  REQUIRE(max_grad_error([](const Tensor& t) { return sum_all(square(concat_vec({crop1d(t, 0, 4), crop1d(t, 4, 6)}))); },
                         x, {10}) < 1e-6);
}

TEST_CASE("conv gradients match finite differences", "[conv][gradcheck]") {
  Rng rng(23);

  SECTION("conv2d input gradient") {
    auto x = random_vec(2 * 5 * 6, rng);
    Tensor w = Tensor::from(random_vec(3 * 2 * 3 * 3, rng), {3, 2, 3, 3});
    Tensor b = Tensor::from(random_vec(3, rng), {3});
    REQUIRE(max_grad_error([&](const Tensor& t) { return sum_all(square(conv2d(t, w, b, 2, 2, 1, 1))); }, x,
                           {2, 5, 6}) < 1e-6);
  }
  SECTION("conv2d weight/bias gradient") {
    Tensor x = Tensor::from(random_vec(2 * 5 * 6, rng), {2, 5, 6});
    auto w0 = random_vec(3 * 2 * 3 * 3, rng);
    Tensor b = Tensor::from(random_vec(3, rng), {3});
    REQUIRE(max_grad_error(
                [&](const Tensor& t) { return sum_all(square(conv2d(x, reshape(t, {3, 2, 3, 3}), b, 1, 1, 1, 1))); },
                w0, {3 * 2 * 3 * 3}) < 1e-6);
    REQUIRE(max_grad_error([&](const Tensor& t) {
              Tensor w = Tensor::from(w0, {3, 2, 3, 3});
              return sum_all(square(conv2d(x, w, t, 1, 1, 1, 1)));
            },
                           random_vec(3, rng), {3}) < 1e-6);
  }
  SECTION("conv1d with dilation") {
    auto x = random_vec(3 * 14, rng);
    Tensor w = Tensor::from(random_vec(4 * 3 * 3, rng), {4, 3, 3});
    Tensor b = Tensor::from(random_vec(4, rng), {4});
    REQUIRE(max_grad_error([&](const Tensor& t) { return sum_all(square(conv1d(t, w, b, 1, 2, 2))); }, x, {3, 14}) <
            1e-6);
    auto w0 = random_vec(4 * 3 * 3, rng);
    Tensor xc = Tensor::from(x, {3, 14});
    REQUIRE(max_grad_error(
                [&](const Tensor& t) { return sum_all(square(conv1d(xc, reshape(t, {4, 3, 3}), b, 2, 1, 1))); }, w0,
                {4 * 3 * 3}) < 1e-6);
  }
  SECTION("conv_transpose1d") {
    auto x = random_vec(3 * 7, rng);
    Tensor w = Tensor::from(random_vec(3 * 2 * 8, rng), {3, 2, 8});
    Tensor b = Tensor::from(random_vec(2, rng), {2});
    REQUIRE(max_grad_error([&](const Tensor& t) { return sum_all(square(conv_transpose1d(t, w, b, 4, 2))); }, x,
                           {3, 7}) < 1e-6);
    auto w0 = random_vec(3 * 2 * 8, rng);
    Tensor xc = Tensor::from(x, {3, 7});
    REQUIRE(max_grad_error(
                [&](const Tensor& t) { return sum_all(square(conv_transpose1d(xc, reshape(t, {3, 2, 8}), b, 4, 2))); },
                w0, {3 * 2 * 8}) < 1e-6);
  }
  SECTION("conv shape arithmetic") {
    Tensor x = Tensor::from(random_vec(1 * 16, rng), {1, 16});
    Tensor w = Tensor::from(random_vec(2 * 1 * 8, rng), {2, 1, 8});
    Tensor b = Tensor::zeros({2});
    Tensor y = conv1d(x, w, b, 4, 2);
    REQUIRE(y.shape() == std::vector<int>{2, 4});  // (16+4-8)/4+1
    Tensor wt = Tensor::from(random_vec(2 * 1 * 8, rng), {2, 1, 8});
    Tensor z = conv_transpose1d(y, wt, Tensor::zeros({1}), 4, 2);
    REQUIRE(z.shape() == std::vector<int>{1, 16});  // (4-1)*4-4+8
  }
}

TEST_CASE("stft power op: forward parseval sanity and gradient", "[features][gradcheck]") {
  Rng rng(29);
  const int n_fft = 16, hop = 8;
  auto window = hann_window(n_fft);

  SECTION("gradient through stft_power") {
    auto x = random_vec(40, rng, -0.5, 0.5);
    REQUIRE(max_grad_error(
                [&](const Tensor& t) { return mean_all(log_t(add_scalar(stft_power(t, n_fft, hop, window), 1e-6))); },
                x, {40}, 1e-6) < 1e-5);
  }
  SECTION("pure tone concentrates energy in the right bin") {
    const int n = 64, k = 4;
    std::vector<Scalar> x(n);
    for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = std::sin(2.0 * M_PI * k * i / 16.0);
    std::vector<Scalar> rect(16, 1.0);
    Tensor p = stft_power(Tensor::from(x, {n}), 16, 16, rect);
    REQUIRE(p.shape() == std::vector<int>{9, 4});
    // bin 4 dominates every frame
    for (int tf = 0; tf < 4; ++tf) {
      Scalar best = -1;
      int arg = -1;
      for (int bin = 0; bin < 9; ++bin) {
        Scalar v = p.data()[static_cast<std::size_t>(bin) * 4 + tf];
        if (v > best) {
          best = v;
          arg = bin;
        }
      }
      REQUIRE(arg == k);
    }
  }
  SECTION("frames shorter than n_fft are zero padded") {
    Tensor p = stft_power(Tensor::from(random_vec(10, rng), {10}), 16, 8, window);
    REQUIRE(p.shape() == std::vector<int>{9, 1});
  }
}

TEST_CASE("log-mel frontend gradient flows to the waveform", "[features][gradcheck]") {
  FeatureConfig cfg;
  cfg.n_fft = 32;
  cfg.hop = 16;
  cfg.n_mels = 6;
  LogMelFrontend fe(cfg);
  Rng rng(31);
  auto x = random_vec(80, rng, -0.5, 0.5);
  REQUIRE(max_grad_error([&](const Tensor& t) { return mean_all(square(fe.forward(t))); }, x, {80}, 1e-6) < 1e-5);
}

TEST_CASE("module machinery: instance norm, SE blocks, pooling", "[nn][gradcheck]") {
  Rng rng(37);

  SECTION("instance norm gradient") {
    InstanceNorm norm(3);
    norm.set_training(true);
    auto x = random_vec(3 * 10, rng);
    // direction-sensitive loss; plain sum-of-squares is invariant under normalization
    Tensor r = Tensor::from(random_vec(3 * 10, rng), {3, 10});
    REQUIRE(max_grad_error([&](const Tensor& t) { return sum_all(mul(norm.forward(t), r)); }, x, {3, 10}) < 1e-6);
  }
  SECTION("SE block gradient") {
    SEBlock1d se(4, 2, rng);
    se.set_training(true);
    auto x = random_vec(4 * 9, rng);
    REQUIRE(max_grad_error([&](const Tensor& t) { return sum_all(square(se.forward(t))); }, x, {4, 9}) < 1e-6);
  }
  SECTION("attentive stats pool gradient") {
    AttentiveStatsPool pool(4, 3, rng);
    pool.set_training(true);
    auto x = random_vec(4 * 7, rng);
    REQUIRE(max_grad_error([&](const Tensor& t) { return sum_all(square(pool.forward(t))); }, x, {4, 7}, 1e-6) < 1e-5);
  }
  SECTION("residual block gradient incl. fwse") {
    ResBlock2d block(2, 3, 2, /*fwse_bins=*/3, rng);
    block.set_training(true);
    auto x = random_vec(2 * 6 * 8, rng);
    REQUIRE(max_grad_error([&](const Tensor& t) { return sum_all(square(block.forward(t))); }, x, {2, 6, 8}) < 1e-5);
  }
  SECTION("cmvn output has zero mean unit variance rows") {
    Tensor x = Tensor::from(random_vec(3 * 50, rng, -4.0, 4.0), {3, 50});
    Tensor y = cmvn(x);
    for (int f = 0; f < 3; ++f) {
      Scalar m = 0, v = 0;
      for (int t = 0; t < 50; ++t) m += y.data()[static_cast<std::size_t>(f) * 50 + t];
      m /= 50;
      for (int t = 0; t < 50; ++t) {
        Scalar d = y.data()[static_cast<std::size_t>(f) * 50 + t] - m;
        v += d * d;
      }
      v /= 50;
      REQUIRE(std::abs(m) < 1e-9);
      REQUIRE(v == Catch::Approx(1.0).margin(1e-3));
    }
  }
}

TEST_CASE("adam optimizer minimizes a quadratic", "[nn]") {
  Tensor p = Tensor::from({5.0, -3.0}, {2}, true);
  Adam opt({p}, 0.1);
  for (int i = 0; i < 300; ++i) {
    opt.zero_grad();
    Tensor loss = sum_all(square(add_scalar(p, -1.0)));
    loss.backward();
    opt.step();
  }
  REQUIRE(p.data()[0] == Catch::Approx(1.0).margin(1e-3));
  REQUIRE(p.data()[1] == Catch::Approx(1.0).margin(1e-3));
}

TEST_CASE("eval graphs record no tape", "[tensor]") {
  Tensor x = Tensor::from({1.0, 2.0}, {2}, false);
  Tensor y = sum_all(square(x));
  REQUIRE_FALSE(y.requires_grad());
  REQUIRE(y.impl()->parents.empty());
}

TEST_CASE("rng determinism and shuffle", "[common]") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
  std::vector<int> v1{1, 2, 3, 4, 5, 6}, v2{1, 2, 3, 4, 5, 6};
  Rng r1(9), r2(9);
  r1.shuffle(v1);
  r2.shuffle(v2);
  REQUIRE(v1 == v2);
}
