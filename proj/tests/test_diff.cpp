#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "irsc/adam.hpp"
#include "irsc/gradcheck.hpp"
#include "irsc/rng.hpp"
#include "irsc/tensor.hpp"
#include "fd_util.hpp"

using namespace irsc;

namespace {

std::vector<double> randn(std::size_t n, rng::Stream& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

}  // namespace

TEST_CASE("matmul identity and hand arithmetic") {
  diff::Tape tape;
  auto eye = tape.leaf({2, 2}, {1, 0, 0, 1});
  auto b = tape.leaf({2, 2}, {3, 4, 5, 6});
  auto c = diff::matmul(eye, b);
  CHECK(c.value()[0] == 3.0);
  CHECK(c.value()[1] == 4.0);
  CHECK(c.value()[2] == 5.0);
  CHECK(c.value()[3] == 6.0);

  auto row = tape.leaf({1, 2}, {1, 2});
  auto col = tape.leaf({2, 1}, {3, 4});
  CHECK(diff::matmul(row, col).scalar() == 11.0);
}

TEST_CASE("matmul rejects mismatched shapes with both named") {
  diff::Tape tape;
  auto a = tape.leaf({2, 3}, std::vector<double>(6, 1.0));
  auto b = tape.leaf({2, 3}, std::vector<double>(6, 1.0));
  CHECK_THROWS_WITH_AS(diff::matmul(a, b),
                       doctest::Contains("[2x3]"), std::invalid_argument);
}

TEST_CASE("matmul gradient matches finite differences at 1e-5") {
  rng::Stream rng(77, "matmul-fd");
  const std::size_t m = 4, k = 3, n = 5;
  std::vector<double> a0 = randn(m * k, rng);
  std::vector<double> b0 = randn(k * n, rng);
  std::vector<double> target = randn(m * n, rng);

  auto loss_of = [&](const std::vector<double>& av,
                     const std::vector<double>& bv) {
    diff::Tape tape;
    auto a = tape.leaf({m, k}, av);
    auto b = tape.leaf({k, n}, bv);
    auto t = tape.leaf({m, n}, target);
    return diff::mse_loss(diff::matmul(a, b), t).scalar();
  };

  diff::Tape tape;
  auto a = tape.leaf({m, k}, a0);
  auto b = tape.leaf({k, n}, b0);
  auto t = tape.leaf({m, n}, target);
  auto loss = diff::mse_loss(diff::matmul(a, b), t);
  tape.backward(loss);

  auto fd_a = fd::gradient(
      [&](const std::vector<double>& v) { return loss_of(v, b0); }, a0);
  auto fd_b = fd::gradient(
      [&](const std::vector<double>& v) { return loss_of(a0, v); }, b0);
  CHECK(fd::max_rel_err({a.grad().begin(), a.grad().end()}, fd_a) < 1e-5);
  CHECK(fd::max_rel_err({b.grad().begin(), b.grad().end()}, fd_b) < 1e-5);
}

TEST_CASE("affine broadcasts bias and backpropagates") {
  diff::Tape tape;
  auto x = tape.leaf({2, 3}, {1, 2, 3, 4, 5, 6});
  auto w = tape.leaf({3, 2}, std::vector<double>(6, 0.0));
  auto b = tape.leaf({2}, {7.5, -2.0});
  auto y = diff::affine(x, w, b);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(y.value()[i * 2 + 0] == 7.5);
    CHECK(y.value()[i * 2 + 1] == -2.0);
  }

  // zero input, zero bias -> zero output
  auto x0 = tape.leaf({2, 3}, std::vector<double>(6, 0.0));
  auto w1 = tape.leaf({3, 2}, {1, 2, 3, 4, 5, 6});
  auto b0 = tape.leaf({2}, {0.0, 0.0});
  for (double v : diff::affine(x0, w1, b0).value()) CHECK(v == 0.0);
}

TEST_CASE("affine gradient matches finite differences") {
  rng::Stream rng(78, "affine-fd");
  const std::size_t m = 3, k = 4, n = 2;
  std::vector<double> x0 = randn(m * k, rng);
  std::vector<double> w0 = randn(k * n, rng);
  std::vector<double> b0 = randn(n, rng);
  std::vector<double> target = randn(m * n, rng);

  auto loss_of = [&](const std::vector<double>& xv,
                     const std::vector<double>& wv,
                     const std::vector<double>& bv) {
    diff::Tape tape;
    auto x = tape.leaf({m, k}, xv);
    auto w = tape.leaf({k, n}, wv);
    auto b = tape.leaf({n}, bv);
    auto t = tape.leaf({m, n}, target);
    return diff::mse_loss(diff::affine(x, w, b), t).scalar();
  };

  diff::Tape tape;
  auto x = tape.leaf({m, k}, x0);
  auto w = tape.leaf({k, n}, w0);
  auto b = tape.leaf({n}, b0);
  auto t = tape.leaf({m, n}, target);
  auto loss = diff::mse_loss(diff::affine(x, w, b), t);
  tape.backward(loss);

  auto fd_w = fd::gradient(
      [&](const std::vector<double>& v) { return loss_of(x0, v, b0); }, w0);
  auto fd_b = fd::gradient(
      [&](const std::vector<double>& v) { return loss_of(x0, w0, v); }, b0);
  CHECK(fd::max_rel_err({w.grad().begin(), w.grad().end()}, fd_w) < 1e-5);
  CHECK(fd::max_rel_err({b.grad().begin(), b.grad().end()}, fd_b) < 1e-5);
}

TEST_CASE("activations") {
  diff::Tape tape;
  auto x = tape.leaf({1, 3}, {-1, 0, 2});
  auto y = diff::relu(x);
  CHECK(y.value()[0] == 0.0);
  CHECK(y.value()[1] == 0.0);
  CHECK(y.value()[2] == 2.0);

  auto z = tape.leaf({1, 1}, {0.0});
  CHECK(diff::tanh_act(z).scalar() == 0.0);
}

TEST_CASE("tanh gradient matches finite differences at 1e-6") {
  rng::Stream rng(79, "tanh-fd");
  std::vector<double> x0 = randn(12, rng);
  std::vector<double> target = randn(12, rng);
  auto loss_of = [&](const std::vector<double>& v) {
    diff::Tape tape;
    auto x = tape.leaf({3, 4}, v);
    auto t = tape.leaf({3, 4}, target);
    return diff::mse_loss(diff::tanh_act(x), t).scalar();
  };
  diff::Tape tape;
  auto x = tape.leaf({3, 4}, x0);
  auto t = tape.leaf({3, 4}, target);
  auto loss = diff::mse_loss(diff::tanh_act(x), t);
  tape.backward(loss);
  auto fd_x = fd::gradient(loss_of, x0);
  CHECK(fd::max_rel_err({x.grad().begin(), x.grad().end()}, fd_x) < 1e-6);
}

TEST_CASE("relu subgradient at zero is zero") {
  diff::Tape tape;
  auto x = tape.leaf({1, 1}, {0.0});
  auto loss = diff::sum(diff::relu(x));
  tape.backward(loss);
  CHECK(x.grad()[0] == 0.0);
}

TEST_CASE("concat_rows") {
  diff::Tape tape;
  auto x = tape.leaf({1, 1}, {1});
  auto y = tape.leaf({1, 2}, {2, 3});
  auto c = diff::concat_rows(x, y);
  CHECK(c.cols() == 3);
  CHECK(c.value()[0] == 1.0);
  CHECK(c.value()[1] == 2.0);
  CHECK(c.value()[2] == 3.0);

  auto empty = tape.leaf({1, 0}, {});
  auto same = diff::concat_rows(x, empty);
  CHECK(same.cols() == 1);
  CHECK(same.value()[0] == 1.0);

  auto bad = tape.leaf({2, 1}, {1, 2});
  CHECK_THROWS_AS(diff::concat_rows(x, bad), std::invalid_argument);
}

TEST_CASE("concat_rows splits the upstream gradient") {
  rng::Stream rng(80, "concat-fd");
  std::vector<double> x0 = randn(6, rng);
  std::vector<double> y0 = randn(4, rng);
  std::vector<double> target = randn(10, rng);
  auto loss_of = [&](const std::vector<double>& xv,
                     const std::vector<double>& yv) {
    diff::Tape tape;
    auto x = tape.leaf({2, 3}, xv);
    auto y = tape.leaf({2, 2}, yv);
    auto t = tape.leaf({2, 5}, target);
    return diff::mse_loss(diff::concat_rows(x, y), t).scalar();
  };
  diff::Tape tape;
  auto x = tape.leaf({2, 3}, x0);
  auto y = tape.leaf({2, 2}, y0);
  auto t = tape.leaf({2, 5}, target);
  auto loss = diff::mse_loss(diff::concat_rows(x, y), t);
  tape.backward(loss);
  CHECK(fd::max_rel_err({x.grad().begin(), x.grad().end()},
                        fd::gradient([&](const std::vector<double>& v) {
                          return loss_of(v, y0);
                        }, x0)) < 1e-6);
  CHECK(fd::max_rel_err({y.grad().begin(), y.grad().end()},
                        fd::gradient([&](const std::vector<double>& v) {
                          return loss_of(x0, v);
                        }, y0)) < 1e-6);
}

TEST_CASE("l2_normalize_scale hits the target norm") {
  const double target = std::sqrt(32.0);
  diff::Tape tape;
  auto ones = tape.leaf({1, 64}, std::vector<double>(64, 1.0));
  auto y = diff::l2_normalize_scale(ones, target);
  double sq = 0.0;
  for (double v : y.value()) sq += v * v;
  CHECK(std::abs(std::sqrt(sq) - target) < 1e-9);
  // norm was 8, so every entry is scaled by sqrt(32)/8
  CHECK(y.value()[0] == doctest::Approx(target / 8.0).epsilon(1e-12));

  std::vector<double> spike(64, 0.0);
  spike[5] = 2.0;
  auto x = tape.leaf({1, 64}, spike);
  auto z = diff::l2_normalize_scale(x, target);
  CHECK(z.value()[5] == doctest::Approx(5.65685424949238).epsilon(1e-10));
}

TEST_CASE("l2_normalize_scale rejects zero rows") {
  diff::Tape tape;
  auto x = tape.leaf({2, 4}, {1, 2, 3, 4, 0, 0, 0, 0});
  CHECK_THROWS_WITH_AS(diff::l2_normalize_scale(x, 1.0),
                       doctest::Contains("zero-norm row 1"),
                       std::runtime_error);
}

TEST_CASE("l2_normalize_scale norms and gradients on random rows") {
  rng::Stream rng(81, "norm-fd");
  const double target = std::sqrt(32.0);
  for (int rep = 0; rep < 5; ++rep) {
    std::vector<double> x0 = randn(2 * 8, rng);
    std::vector<double> tgt = randn(2 * 8, rng);
    diff::Tape tape;
    auto x = tape.leaf({2, 8}, x0);
    auto y = diff::l2_normalize_scale(x, target);
    for (std::size_t r = 0; r < 2; ++r) {
      double sq = 0.0;
      for (std::size_t j = 0; j < 8; ++j) {
        sq += y.value()[r * 8 + j] * y.value()[r * 8 + j];
      }
      CHECK(std::abs(std::sqrt(sq) - target) < 1e-9);
    }
    auto t = tape.leaf({2, 8}, tgt);
    auto loss = diff::mse_loss(y, t);
    tape.backward(loss);
    auto fd_x = fd::gradient(
        [&](const std::vector<double>& v) {
          diff::Tape tp;
          auto xx = tp.leaf({2, 8}, v);
          auto tt = tp.leaf({2, 8}, tgt);
          return diff::mse_loss(diff::l2_normalize_scale(xx, target), tt)
              .scalar();
        },
        x0);
    CHECK(fd::max_rel_err({x.grad().begin(), x.grad().end()}, fd_x) < 1e-4);
  }
}

TEST_CASE("mse_loss against a brute-force double loop") {
  diff::Tape tape;
  auto p = tape.leaf({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(diff::mse_loss(p, p).scalar() == 0.0);

  auto q = tape.leaf({2, 3}, {2, 3, 4, 5, 6, 7});
  CHECK(diff::mse_loss(p, q).scalar() == doctest::Approx(1.0).epsilon(1e-15));

  rng::Stream rng(82, "mse-oracle");
  std::vector<double> a = randn(4 * 7, rng);
  std::vector<double> b = randn(4 * 7, rng);
  double oracle = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 7; ++j) {
      const double d = a[i * 7 + j] - b[i * 7 + j];
      oracle += d * d;
    }
  }
  oracle /= 4.0 * 7.0;
  auto pa = tape.leaf({4, 7}, a);
  auto pb = tape.leaf({4, 7}, b);
  CHECK(std::abs(diff::mse_loss(pa, pb).scalar() - oracle) < 1e-12);
}

TEST_CASE("backward basics") {
  diff::Tape tape;
  auto x = tape.leaf({2, 3}, {1, 2, 3, 4, 5, 6});
  auto loss = diff::sum(x);
  tape.backward(loss);
  for (double g : x.grad()) CHECK(g == 1.0);

  diff::Tape tape2;
  auto s = tape2.leaf({1}, {1.5});
  auto zero = tape2.leaf({1}, {0.0});
  auto l2 = diff::mse_loss(s, zero);
  tape2.backward(l2);
  CHECK(s.grad()[0] == doctest::Approx(3.0).epsilon(1e-15));  // 2x
}

TEST_CASE("backward rejects non-scalar loss") {
  diff::Tape tape;
  auto x = tape.leaf({2, 2}, {1, 2, 3, 4});
  auto y = diff::scale(x, 2.0);
  CHECK_THROWS_AS(tape.backward(y), std::invalid_argument);
}

TEST_CASE("fan-out accumulates gradients additively and exactly") {
  diff::Tape tape;
  auto x = tape.leaf({1, 4}, {1, -2, 3, -4});
  auto loss = diff::sum(diff::add(diff::scale(x, 2.0), diff::scale(x, 3.0)));
  tape.backward(loss);
  for (double g : x.grad()) CHECK(g == 5.0);
}

TEST_CASE("untouched leaves receive zero gradient") {
  diff::Tape tape;
  auto x = tape.leaf({1, 2}, {1, 2});
  auto orphan = tape.leaf({1, 2}, {5, 6});
  auto loss = diff::sum(x);
  tape.backward(loss);
  CHECK(orphan.grad()[0] == 0.0);
  CHECK(orphan.grad()[1] == 0.0);
}

TEST_CASE("adam: zero gradient is the identity on parameters") {
  diff::Adam adam({});
  std::vector<double> p = {1.0, -2.0, 3.0};
  std::vector<double> g(3, 0.0);
  std::vector<std::vector<double>*> params = {&p};
  std::vector<std::span<const double>> grads = {g};
  adam.step(params, grads);
  CHECK(p[0] == 1.0);
  CHECK(p[1] == -2.0);
  CHECK(p[2] == 3.0);
}

TEST_CASE("adam: first step magnitude is about the learning rate") {
  diff::AdamConfig cfg;
  diff::Adam adam(cfg);
  std::vector<double> p = {0.0};
  std::vector<double> g = {0.37};
  std::vector<std::vector<double>*> params = {&p};
  std::vector<std::span<const double>> grads = {g};
  adam.step(params, grads);
  // Bias-corrected m-hat = g, v-hat = g^2, so the step is lr * g / (|g| + eps).
  CHECK(std::abs(p[0] + cfg.learning_rate) < 1e-9);
}

TEST_CASE("adam: three scripted steps match a hand computation") {
  diff::AdamConfig cfg;  // lr 0.001, betas 0.9/0.98, eps 1e-8
  diff::Adam adam(cfg);
  std::vector<double> p = {0.5};
  const double grads_script[3] = {0.2, -0.4, 0.1};

  double m = 0.0, v = 0.0, expect = 0.5;
  for (int t = 1; t <= 3; ++t) {
    const double g = grads_script[t - 1];
    m = 0.9 * m + 0.1 * g;
    v = 0.98 * v + 0.02 * g * g;
    const double mhat = m / (1.0 - std::pow(0.9, t));
    const double vhat = v / (1.0 - std::pow(0.98, t));
    expect -= 0.001 * mhat / (std::sqrt(vhat) + 1e-8);

    std::vector<double> gv = {g};
    std::vector<std::vector<double>*> params = {&p};
    std::vector<std::span<const double>> grads = {gv};
    adam.step(params, grads);
    CHECK(adam.step_count() == static_cast<std::uint64_t>(t));
  }
  CHECK(std::abs(p[0] - expect) < 1e-12);
}

TEST_CASE("gradient suite passes for every op") {
  auto results = gradcheck::run_gradient_suite(4242);
  for (const auto& r : results) {
    INFO(r.name, " max rel err ", r.max_rel_err);
    CHECK(r.pass);
  }
  CHECK(gradcheck::all_passed(results));
}
