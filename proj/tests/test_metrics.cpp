#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "irsc/metrics.hpp"

using namespace irsc;

namespace {

std::vector<double> random_image(rng::Stream& rng) {
  std::vector<double> img(784);
  for (double& v : img) v = rng.uniform(-1.0, 1.0);
  return img;
}

// Independent two-pass oracle: explicit mean, then variance/covariance loops.
double ssim_oracle(const std::vector<double>& s, const std::vector<double>& t) {
  const double L = 2.0;
  const double c1 = (0.01 * L) * (0.01 * L);
  const double c2 = (0.03 * L) * (0.03 * L);
  const std::size_t n = s.size();
  double mu_a = 0.0, mu_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mu_a += s[i] + 1.0;
    mu_b += t[i] + 1.0;
  }
  mu_a /= n;
  mu_b /= n;
  double va = 0.0, vb = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    va += (s[i] + 1.0 - mu_a) * (s[i] + 1.0 - mu_a);
    vb += (t[i] + 1.0 - mu_b) * (t[i] + 1.0 - mu_b);
    cov += (s[i] + 1.0 - mu_a) * (t[i] + 1.0 - mu_b);
  }
  va /= n;
  vb /= n;
  cov /= n;
  return (2 * mu_a * mu_b + c1) * (2 * cov + c2) /
         ((mu_a * mu_a + mu_b * mu_b + c1) * (va + vb + c2));
}

}  // namespace

TEST_CASE("ssim of an image with itself is 1") {
  rng::Stream rng(1, "ssim-self");
  for (int i = 0; i < 100; ++i) {
    auto img = random_image(rng);
    CHECK(std::abs(metrics::ssim(img, img) - 1.0) <= 1e-12);
  }
}

TEST_CASE("ssim on constant images matches the closed form") {
  // s = 0 (shifted to L/2=1... constants): use s = -1 (maps to 0) and
  // s_hat = +1 (maps to L): luminance term only.
  std::vector<double> zeros(784, -1.0);
  std::vector<double> fulls(784, 1.0);
  const double c1 = 4e-4;
  const double expect = c1 / (4.0 + c1);  // (2*0*2+C1)(0+C2)/((0+4+C1)(0+C2))
  CHECK(metrics::ssim(zeros, fulls) == doctest::Approx(expect).epsilon(1e-9));
  CHECK(expect == doctest::Approx(9.999e-5).epsilon(1e-3));
}

TEST_CASE("ssim symmetry and range on random pairs") {
  rng::Stream rng(2, "ssim-sym");
  for (int i = 0; i < 100; ++i) {
    auto a = random_image(rng);
    auto b = random_image(rng);
    const double ab = metrics::ssim(a, b);
    const double ba = metrics::ssim(b, a);
    CHECK(std::abs(ab - ba) < 1e-12);
    CHECK(ab >= -1.0);
    CHECK(ab <= 1.0);
  }
}

TEST_CASE("ssim equals the brute-force two-pass oracle at 1e-12") {
  rng::Stream rng(3, "ssim-oracle");
  for (int i = 0; i < 100; ++i) {
    auto a = random_image(rng);
    auto b = random_image(rng);
    CHECK(std::abs(metrics::ssim(a, b) - ssim_oracle(a, b)) < 1e-12);
  }
}

TEST_CASE("ssim rejects length mismatch") {
  std::vector<double> a(784, 0.0), b(100, 0.0);
  CHECK_THROWS_AS(metrics::ssim(a, b), std::invalid_argument);
}

namespace {

data::ImageSet tiny_set(std::size_t count, std::uint64_t seed) {
  data::ImageSet set;
  set.count = count;
  set.pixels.resize(count * 784);
  rng::Stream rng(seed, "tiny-set");
  for (double& v : set.pixels) v = rng.uniform(-1.0, 1.0);
  return set;
}

}  // namespace

TEST_CASE("evaluate: deterministic for a fixed seed") {
  transceiver::ModelConfig c;
  c.users = 2;
  c.input_dim = 784;
  c.hidden_dim = 8;
  rng::Stream init(5, "init");
  auto params = transceiver::TransceiverParams::initialize(
      transceiver::Variant::csir, c, init);
  std::vector<data::ImageSet> sets = {tiny_set(40, 1), tiny_set(40, 2)};
  metrics::EvalConfig ec;
  ec.snr_db = {0.0, 10.0};
  ec.trials = 2;
  ec.batch = 8;
  ec.seed = 77;
  auto a = metrics::evaluate(params, sets, ec);
  auto b = metrics::evaluate(params, sets, ec);
  for (std::size_t k = 0; k < 2; ++k) {
    for (std::size_t s = 0; s < a.per_user[k].size(); ++s) {
      CHECK(a.per_user[k][s].mean_ssim == b.per_user[k][s].mean_ssim);
      CHECK(a.per_user[k][s].std_ssim == b.per_user[k][s].std_ssim);
    }
  }
}

TEST_CASE("evaluate: interference_free SSIM is identical at every SNR") {
  transceiver::ModelConfig c;
  c.users = 2;
  c.hidden_dim = 8;
  rng::Stream init(6, "init");
  auto params = transceiver::TransceiverParams::initialize(
      transceiver::Variant::interference_free, c, init);
  std::vector<data::ImageSet> sets = {tiny_set(40, 3), tiny_set(40, 4)};
  metrics::EvalConfig ec;
  ec.snr_db = {0.0, 10.0, 20.0};
  ec.trials = 3;
  ec.batch = 8;
  ec.seed = 78;
  auto report = metrics::evaluate(params, sets, ec);
  for (std::size_t k = 0; k < 2; ++k) {
    const double first = report.per_user[k][0].mean_ssim;
    for (const auto& point : report.per_user[k]) {
      CHECK(point.mean_ssim == first);
    }
  }
}

TEST_CASE("eval CSV layout") {
  metrics::EvalReport report;
  report.variant = transceiver::Variant::csir;
  report.seed = 9;
  report.per_user = {{{0.0, 0.5, 0.01, 4}}, {{0.0, 0.25, 0.02, 4}}};
  std::ostringstream os;
  metrics::write_eval_csv(report, os);
  CHECK(os.str() ==
        "variant,user,snr_db,mean_ssim,std_ssim,trials,seed\n"
        "csir,1,0,0.5,0.01,4,9\n"
        "csir,2,0,0.25,0.02,4,9\n");
}
