#include <doctest.h>

#include "ecgdnn/nn.hpp"
#include "support.hpp"

using namespace ecgdnn;
using testing::gradient_check;
using testing::probe;
using testing::random_tensor;

namespace {

// Direct-loop cross-correlation with 'same' zero padding.
Tensor<double> naive_conv(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b,
                          std::size_t stride) {
  const std::size_t n = x.dim(0), cin = x.dim(1), len = x.dim(2);
  const std::size_t cout = w.dim(0), k = w.dim(2);
  const std::size_t out_len = (len + stride - 1) / stride;
  const long total = std::max<long>(0, static_cast<long>((out_len - 1) * stride + k) - static_cast<long>(len));
  const long left = total / 2;
  Tensor<double> y(Shape{n, cout, out_len});
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t o = 0; o < cout; ++o)
      for (std::size_t t = 0; t < out_len; ++t) {
        double acc = b[o];
        for (std::size_t c = 0; c < cin; ++c)
          for (std::size_t j = 0; j < k; ++j) {
            const long pos = static_cast<long>(t * stride + j) - left;
            if (pos < 0 || pos >= static_cast<long>(len)) continue;
            acc += w[(o * cin + c) * k + j] * x[(s * cin + c) * len + static_cast<std::size_t>(pos)];
          }
        y[(s * cout + o) * out_len + t] = acc;
      }
  return y;
}

}  // namespace

TEST_SUITE("nn") {

TEST_CASE("same padding matches the ceil rule") {
  auto p = same_padding(4096, 16, 1);
  CHECK(p.out_length == 4096);
  CHECK(p.left == 7);
  CHECK(p.right == 8);
  p = same_padding(4096, 16, 4);
  CHECK(p.out_length == 1024);
  CHECK(p.left + p.right == 12);
  p = same_padding(10, 1, 1);
  CHECK(p.left + p.right == 0);
  p = same_padding(3, 16, 4);
  CHECK(p.out_length == 1);
}

TEST_CASE("conv forward equals the direct loop") {
  struct Case { std::size_t n, cin, cout, len, k, stride; };
  for (auto c : {Case{2, 3, 4, 37, 16, 1}, Case{2, 3, 5, 37, 16, 4}, Case{1, 4, 2, 64, 1, 1},
                 Case{3, 2, 2, 9, 16, 4}, Case{1, 1, 1, 5, 3, 2}}) {
    auto x = random_tensor<double>({c.n, c.cin, c.len}, 1);
    auto w = random_tensor<double>({c.cout, c.cin, c.k}, 2);
    auto b = random_tensor<double>({c.cout}, 3);
    const auto y = conv1d_forward(x, w, b, c.stride);
    const auto ref = naive_conv(x, w, b, c.stride);
    REQUIRE(y.shape() == ref.shape());
    double worst = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) worst = std::max(worst, std::abs(y[i] - ref[i]));
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("conv accepts a single unbatched signal") {
  auto x = random_tensor<float>({3, 20}, 4);
  auto w = random_tensor<float>({2, 3, 5}, 5);
  auto b = random_tensor<float>({2}, 6);
  const auto y = conv1d_forward(x, w, b, 1);
  CHECK(y.size() == 2 * 20);
}

TEST_CASE("conv gradients pass finite differences") {
  for (std::size_t stride : {1u, 4u}) {
    auto x = random_tensor<double>({2, 3, 23}, 7);
    auto w = random_tensor<double>({4, 3, 16}, 8, 0.3);
    auto b = random_tensor<double>({4}, 9);
    const auto probe_w = random_tensor<double>(conv1d_forward(x, w, b, stride).shape(), 10);
    auto loss = [&] { return probe(conv1d_forward(x, w, b, stride), probe_w); };
    const auto g = conv1d_backward(x, w, probe_w, stride);
    CHECK(gradient_check(x, g.x, loss) < 1e-6);
    CHECK(gradient_check(w, g.kernel, loss) < 1e-6);
    CHECK(gradient_check(b, g.bias, loss) < 1e-6);
  }
}

TEST_CASE("batchnorm train mode matches a two-pass computation") {
  auto x = random_tensor<double>({4, 3, 10}, 11, 2.0);
  Tensor<double> gamma(Shape{3}, std::vector<double>{1.5, 0.5, -1.0});
  Tensor<double> beta(Shape{3}, std::vector<double>{0.1, 0.0, 2.0});
  Tensor<double> rm(Shape{3}), rv(Shape{3}, 1.0);
  const auto y = batchnorm_forward(x, gamma, beta, rm, rv, Mode::Train);
  for (std::size_t c = 0; c < 3; ++c) {
    double mean = 0.0;
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t t = 0; t < 10; ++t) mean += x[(n * 3 + c) * 10 + t];
    mean /= 40.0;
    double var = 0.0;
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t t = 0; t < 10; ++t) var += std::pow(x[(n * 3 + c) * 10 + t] - mean, 2);
    var /= 40.0;
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t t = 0; t < 10; ++t) {
        const std::size_t i = (n * 3 + c) * 10 + t;
        CHECK(y[i] == doctest::Approx(gamma[c] * (x[i] - mean) / std::sqrt(var + 1e-5) + beta[c]).epsilon(1e-12));
      }
    CHECK(rm[c] == doctest::Approx(0.1 * mean).epsilon(1e-12));
    CHECK(rv[c] == doctest::Approx(0.9 + 0.1 * var).epsilon(1e-12));
  }
}

TEST_CASE("batchnorm infer mode uses running statistics only") {
  auto x = random_tensor<double>({2, 2, 5}, 12);
  Tensor<double> gamma(Shape{2}, 2.0), beta(Shape{2}, 1.0);
  Tensor<double> rm(Shape{2}, std::vector<double>{0.5, -0.5});
  Tensor<double> rv(Shape{2}, std::vector<double>{4.0, 0.25});
  const auto before_m = rm, before_v = rv;
  const auto y = batchnorm_forward(x, gamma, beta, rm, rv, Mode::Infer);
  CHECK(rm == before_m);
  CHECK(rv == before_v);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t c = (i / 5) % 2;
    CHECK(y[i] == doctest::Approx(2.0 * (x[i] - rm[c]) / std::sqrt(rv[c] + 1e-5) + 1.0));
  }
}

TEST_CASE("batchnorm gradients pass finite differences") {
  for (Mode mode : {Mode::Train, Mode::Infer}) {
    auto x = random_tensor<double>({3, 2, 7}, 13);
    auto gamma = random_tensor<double>({2}, 14);
    auto beta = random_tensor<double>({2}, 15);
    Tensor<double> rm(Shape{2}, 0.3), rv(Shape{2}, 1.7);
    const auto w = random_tensor<double>({3, 2, 7}, 16);
    auto loss = [&] {
      auto m = rm, v = rv;
      return probe(batchnorm_forward(x, gamma, beta, m, v, mode), w);
    };
    BatchNormCache<double> cache;
    auto m = rm, v = rv;
    batchnorm_forward(x, gamma, beta, m, v, mode, {}, &cache);
    const auto g = batchnorm_backward(w, gamma, cache);
    CHECK(gradient_check(x, g.x, loss) < 1e-5);
    CHECK(gradient_check(gamma, g.gamma, loss) < 1e-6);
    CHECK(gradient_check(beta, g.beta, loss) < 1e-6);
  }
}

TEST_CASE("relu derivative at zero is zero") {
  Tensor<double> x(Shape{4}, std::vector<double>{-1.0, 0.0, 2.0, 0.0});
  Tensor<double> g(Shape{4}, 1.0);
  const auto y = relu(x);
  CHECK(y[0] == 0.0);
  CHECK(y[2] == 2.0);
  const auto gx = relu_backward(x, g);
  CHECK(gx[0] == 0.0);
  CHECK(gx[1] == 0.0);
  CHECK(gx[2] == 1.0);
}

TEST_CASE("dropout is inverted and identity at inference") {
  auto x = random_tensor<float>({1, 4, 5000}, 17);
  Rng rng(3);
  CHECK(dropout(x, 0.8, Mode::Infer, rng) == x);
  Tensor<float> mask;
  const auto y = dropout(x, 0.8, Mode::Train, rng, &mask);
  std::size_t kept = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK((mask[i] == 0.0f || mask[i] == doctest::Approx(5.0f)));
    CHECK(y[i] == doctest::Approx(x[i] * mask[i]));
    kept += mask[i] != 0.0f;
  }
  CHECK(static_cast<double>(kept) / x.size() == doctest::Approx(0.2).epsilon(0.05));
  const auto g = dropout_backward(mask, Tensor<float>(x.shape(), 1.0f));
  CHECK(g == mask);

  Rng a(9), b(9);
  CHECK(dropout(x, 0.5, Mode::Train, a) == dropout(x, 0.5, Mode::Train, b));
}

TEST_CASE("maxpool takes the first maximum and routes gradients there") {
  Tensor<double> x(Shape{1, 1, 10}, std::vector<double>{1, 3, 3, 0, 5, 5, 5, 5, 2, 9});
  const auto r = maxpool1d(x, 4, 4);
  REQUIRE(r.output.size() == 3);
  CHECK(r.output[0] == 3.0);
  CHECK(r.argmax[0] == 1);
  CHECK(r.output[1] == 5.0);
  CHECK(r.argmax[1] == 4);
  CHECK(r.output[2] == 9.0);  // partial last window
  const auto g = maxpool1d_backward(x.shape(), r.argmax, Tensor<double>(Shape{1, 1, 3}, 1.0));
  CHECK(g[1] == 1.0);
  CHECK(g[2] == 0.0);
  CHECK(g[4] == 1.0);
  CHECK(g[9] == 1.0);

  auto xr = random_tensor<double>({2, 3, 17}, 18);
  const auto w = random_tensor<double>({2, 3, 5}, 19);
  auto loss = [&] { return probe(maxpool1d(xr, 4, 4).output, w); };
  const auto pooled = maxpool1d(xr, 4, 4);
  CHECK(gradient_check(xr, maxpool1d_backward(xr.shape(), pooled.argmax, w), loss) < 1e-6);
}

TEST_CASE("dense gradients pass finite differences") {
  auto x = random_tensor<double>({3, 8}, 20);
  auto w = random_tensor<double>({8, 6}, 21);
  auto b = random_tensor<double>({6}, 22);
  const auto pw = random_tensor<double>({3, 6}, 23);
  auto loss = [&] { return probe(dense_forward(x, w, b), pw); };
  const auto g = dense_backward(x, w, pw);
  CHECK(gradient_check(x, g.x, loss) < 1e-6);
  CHECK(gradient_check(w, g.weights, loss) < 1e-6);
  CHECK(gradient_check(b, g.bias, loss) < 1e-6);
}

TEST_CASE("fused cross-entropy equals the textbook form and stays finite") {
  auto z = random_tensor<double>({4, 6}, 24, 3.0);
  Tensor<double> y(Shape{4, 6});
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = (i * 7) % 3 == 0 ? 1.0 : 0.0;
  double ref = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double p = 1.0 / (1.0 + std::exp(-z[i]));
    ref -= y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p);
  }
  ref /= static_cast<double>(z.size());
  const auto r = bce_loss(z, y);
  CHECK(r.loss == doctest::Approx(ref).epsilon(1e-12));
  auto loss = [&] { return bce_loss(z, y).loss; };
  CHECK(gradient_check(z, r.grad, loss) < 1e-6);

  Tensor<float> big(Shape{1, 2}, std::vector<float>{100.0f, -100.0f});
  Tensor<float> t(Shape{1, 2}, std::vector<float>{0.0f, 1.0f});
  const auto e = bce_loss(big, t);
  CHECK(std::isfinite(e.loss));
  CHECK(e.loss == doctest::Approx(100.0));
}

TEST_CASE("sigmoid is stable at both tails") {
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(sigmoid(800.0) <= 1.0);
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(-30.0) > 0.0);
}

TEST_CASE("shape errors are reported") {
  Tensor<float> x(Shape{1, 3, 10});
  Tensor<float> w(Shape{2, 4, 3});
  Tensor<float> b(Shape{2});
  CHECK_THROWS_AS(conv1d_forward(x, w, b, 1), ShapeError);
  CHECK_THROWS_AS(Tensor<float>(Shape{2, 0}), ShapeError);
  CHECK_THROWS_AS(add(Tensor<float>(Shape{2}), Tensor<float>(Shape{3})), ShapeError);
}

TEST_CASE("small conv identities") {
  Tensor<double> x(Shape{1, 1, 5}, std::vector<double>{0, 0, 1, 0, 0});
  Tensor<double> delta(Shape{1, 1, 3}, std::vector<double>{0, 1, 0});
  Tensor<double> zero_b(Shape{1});
  CHECK(conv1d_forward(x, delta, zero_b, 1) == x);

  Tensor<double> z(Shape{1, 2, 9});
  auto w = random_tensor<double>({3, 2, 16}, 25);
  Tensor<double> b(Shape{3}, std::vector<double>{0.5, -1.0, 2.0});
  const auto y = conv1d_forward(z, w, b, 4);
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == b[i / y.dim(2)]);

  auto x8 = random_tensor<double>({1, 1, 8}, 26);
  auto k3 = random_tensor<double>({1, 1, 3}, 27);
  Tensor<double> b1(Shape{1}, 0.1);
  const auto pw = random_tensor<double>({1, 1, 8}, 28);
  auto loss = [&] { return probe(conv1d_forward(x8, k3, b1, 1), pw); };
  const auto g = conv1d_backward(x8, k3, pw, 1);
  CHECK(gradient_check(x8, g.x, loss) < 1e-6);
  CHECK(gradient_check(k3, g.kernel, loss) < 1e-6);

  const auto g0 = conv1d_backward(x8, k3, Tensor<double>(Shape{1, 1, 8}), 1);
  for (double v : g0.x.data()) CHECK(v == 0.0);
  for (double v : g0.kernel.data()) CHECK(v == 0.0);
}

TEST_CASE("batchnorm normalizes and its gamma gradient is sum of grad times x_hat") {
  auto x = random_tensor<double>({5, 2, 20}, 29, 3.0);
  Tensor<double> gamma(Shape{2}, 1.0), beta(Shape{2});
  Tensor<double> rm(Shape{2}), rv(Shape{2}, 1.0);
  BatchNormCache<double> cache;
  const auto y = batchnorm_forward(x, gamma, beta, rm, rv, Mode::Train, {}, &cache);
  for (std::size_t c = 0; c < 2; ++c) {
    double m = 0.0, v = 0.0;
    for (std::size_t n = 0; n < 5; ++n)
      for (std::size_t t = 0; t < 20; ++t) m += y[(n * 2 + c) * 20 + t];
    m /= 100.0;
    for (std::size_t n = 0; n < 5; ++n)
      for (std::size_t t = 0; t < 20; ++t) v += std::pow(y[(n * 2 + c) * 20 + t] - m, 2);
    v /= 100.0;
    CHECK(std::abs(m) < 1e-6);
    CHECK(v == doctest::Approx(1.0).epsilon(1e-4));
  }
  const auto go = random_tensor<double>(x.shape(), 30);
  const auto g = batchnorm_backward(go, gamma, cache);
  for (std::size_t c = 0; c < 2; ++c) {
    double s = 0.0;
    for (std::size_t n = 0; n < 5; ++n)
      for (std::size_t t = 0; t < 20; ++t) s += go[(n * 2 + c) * 20 + t] * cache.x_hat[(n * 2 + c) * 20 + t];
    CHECK(g.gamma[c] == doctest::Approx(s).epsilon(1e-12));
  }

  Tensor<double> k(Shape{1, 1, 4}, 1.5);
  Tensor<double> two(Shape{1}, 2.0), three(Shape{1}, 3.0), m0(Shape{1}), v1(Shape{1}, 1.0);
  const auto yi = batchnorm_forward(k, two, three, m0, v1, Mode::Infer);
  for (double v : yi.data()) CHECK(v == doctest::Approx(2.0 * 1.5 / std::sqrt(1.0 + 1e-5) + 3.0));
}

TEST_CASE("dropout at rate 0.8 preserves the mean") {
  Tensor<float> ones(Shape{1000000}, 1.0f);
  Rng rng(31);
  const auto y = dropout(ones, 0.8, Mode::Train, rng);
  double mean = 0.0;
  for (float v : y.data()) mean += v;
  mean /= static_cast<double>(y.size());
  CHECK(std::abs(mean - 1.0) < 0.01);
  Rng r0(1);
  CHECK(dropout(ones, 0.0, Mode::Train, r0) == ones);
}

TEST_CASE("maxpool matches the direct loop and dense identities hold") {
  auto x = random_tensor<double>({2, 3, 30}, 32);
  const auto r = maxpool1d(x, 4, 4);
  for (std::size_t row = 0; row < 6; ++row)
    for (std::size_t o = 0; o < 8; ++o) {
      double best = -1e300;
      for (std::size_t j = o * 4; j < std::min<std::size_t>(o * 4 + 4, 30); ++j) best = std::max(best, x[row * 30 + j]);
      CHECK(r.output[row * 8 + o] == best);
    }
  Tensor<double> mono(Shape{1, 1, 8}, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8});
  const auto m = maxpool1d(mono, 4, 4);
  CHECK(m.output[0] == 4.0);
  CHECK(m.output[1] == 8.0);

  Tensor<double> eye(Shape{3, 3});
  for (std::size_t i = 0; i < 3; ++i) eye[i * 3 + i] = 1.0;
  auto xi = random_tensor<double>({2, 3}, 33);
  CHECK(dense_forward(xi, eye, Tensor<double>(Shape{3})) == xi);
}

TEST_CASE("sigmoid against long double evaluation") {
  for (double z = -40.0; z <= 40.0; z += 0.37) {
    const long double ref = 1.0L / (1.0L + std::exp(-static_cast<long double>(z)));
    CHECK(std::abs(sigmoid(z) - static_cast<double>(ref)) < 1e-15);
    CHECK(sigmoid(z) + sigmoid(-z) == doctest::Approx(1.0).epsilon(1e-15));
  }
  Tensor<double> z(Shape{1, 1}), y(Shape{1, 1}, 1.0);
  CHECK(bce_loss(z, y).loss == doctest::Approx(std::log(2.0)));
  Tensor<double> big(Shape{1, 1}, 50.0);
  CHECK(bce_loss(big, y).loss < 1e-20);
}

}
