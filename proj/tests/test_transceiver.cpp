#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "irsc/transceiver.hpp"
#include "fd_util.hpp"

using namespace irsc;
using transceiver::Variant;

namespace {

std::vector<double> randn(std::size_t n, rng::Stream& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

transceiver::ModelConfig tiny_config() {
  transceiver::ModelConfig c;
  c.users = 2;
  c.tx_antennas = 2;
  c.rx_antennas = 2;
  c.symbols = 2;  // packed width 8
  c.input_dim = 6;
  c.hidden_dim = 4;
  c.precoder_iterations = 5;
  return c;
}

std::vector<channel::ChannelRealization> draw_realizations(
    std::size_t count, const transceiver::ModelConfig& c, double sigma2,
    rng::Stream& rng) {
  std::vector<channel::ChannelRealization> out;
  for (std::size_t i = 0; i < count; ++i) {
    auto r =
        channel::sample_channel(c.users, c.tx_antennas, c.rx_antennas, rng);
    r.noise_variance = sigma2;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

TEST_CASE("default dimensions follow the layer table") {
  transceiver::ModelConfig c;  // defaults: 784 -> 256 -> 64, CSI 32
  CHECK(c.csi_dim() == 32);
  CHECK(c.encoder_out_dim(Variant::csir) == 64);
  CHECK(c.decoder_in_dim(Variant::csir) == 64);
  CHECK(c.symbol_norm() == doctest::Approx(std::sqrt(32.0)));

  rng::Stream init(1, "init");
  auto params = transceiver::TransceiverParams::initialize(Variant::csir, c,
                                                           init);
  REQUIRE(params.users.size() == 2);
  CHECK(params.users[0].alpha[0].shape == diff::Shape{784, 256});
  CHECK(params.users[0].beta[0].shape == diff::Shape{256, 64});
  // decoder input 64 + 32 CSI
  CHECK(params.users[0].gamma[0].shape == diff::Shape{96, 256});
  CHECK(params.users[0].theta[2].shape == diff::Shape{256, 784});
}

TEST_CASE("csi_free and csir have identical encoder shapes; csitr adds two") {
  transceiver::ModelConfig c = tiny_config();
  rng::Stream init(2, "init");
  auto free_params =
      transceiver::TransceiverParams::initialize(Variant::csi_free, c, init);
  auto csir_params =
      transceiver::TransceiverParams::initialize(Variant::csir, c, init);
  auto csitr_params =
      transceiver::TransceiverParams::initialize(Variant::csitr, c, init);
  for (std::size_t k = 0; k < c.users; ++k) {
    REQUIRE(free_params.users[k].beta.size() ==
            csir_params.users[k].beta.size());
    for (std::size_t i = 0; i < free_params.users[k].beta.size(); ++i) {
      CHECK(free_params.users[k].beta[i].shape ==
            csir_params.users[k].beta[i].shape);
    }
    CHECK(free_params.users[k].alpha[0].shape ==
          csir_params.users[k].alpha[0].shape);
    CHECK(csitr_params.users[k].beta.size() ==
          free_params.users[k].beta.size() + 2);
  }
}

TEST_CASE("semantic_encode: zero input and zero bias give zero features") {
  transceiver::ModelConfig c = tiny_config();
  diff::Tape tape;
  auto x = tape.leaf({3, c.input_dim},
                     std::vector<double>(3 * c.input_dim, 0.0));
  auto w = tape.leaf({c.input_dim, c.hidden_dim},
                     std::vector<double>(c.input_dim * c.hidden_dim, 0.5));
  auto b = tape.leaf({c.hidden_dim}, std::vector<double>(c.hidden_dim, 0.0));
  std::vector<diff::Tensor> alpha = {w, b};
  auto feat = transceiver::semantic_encode(x, alpha);
  CHECK(feat.cols() == c.hidden_dim);
  for (double v : feat.value()) CHECK(v == 0.0);
}

TEST_CASE("jsc_encode arity follows the variant") {
  transceiver::ModelConfig c = tiny_config();
  rng::Stream init(3, "init");
  auto params =
      transceiver::TransceiverParams::initialize(Variant::csi_free, c, init);
  diff::Tape tape;
  auto bound = transceiver::bind_params(tape, params);
  auto feat = tape.leaf({1, c.hidden_dim},
                        std::vector<double>(c.hidden_dim, 0.1));
  // csi_free path is a single affine layer: output dims immediately
  auto out = transceiver::jsc_encode(feat, std::nullopt,
                                     bound.users[0].beta, Variant::csi_free);
  CHECK(out.cols() == c.encoder_out_dim(Variant::csi_free));
  // passing CSI to a CSI-free encoder is a contract violation
  auto csi = tape.leaf({1, c.csi_dim()},
                       std::vector<double>(c.csi_dim(), 0.0));
  CHECK_THROWS_AS(transceiver::jsc_encode(feat, csi, bound.users[0].beta,
                                          Variant::csi_free),
                  std::invalid_argument);
}

TEST_CASE("csitr jsc_encode reduces to hidden width in the middle layer") {
  transceiver::ModelConfig c = tiny_config();
  rng::Stream init(4, "init");
  auto params =
      transceiver::TransceiverParams::initialize(Variant::csitr, c, init);
  // middle layer weight maps (h + csi) -> h, final layer h -> out
  CHECK(params.users[0].beta[0].shape ==
        diff::Shape{c.hidden_dim + c.csi_dim(), c.hidden_dim});
  CHECK(params.users[0].beta[2].shape ==
        diff::Shape{c.hidden_dim, c.encoder_out_dim(Variant::csitr)});
}

TEST_CASE("power_normalize_reshape hits the Frobenius budget per sample") {
  transceiver::ModelConfig c;  // 2x16 block, norm sqrt(32)
  diff::Tape tape;
  rng::Stream rng(5, "x");
  auto x = tape.leaf({3, 64}, randn(3 * 64, rng));
  auto y = transceiver::power_normalize_reshape(x, 1.0, 2, 16);
  for (std::size_t i = 0; i < 3; ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < 64; ++j) {
      sq += y.value()[i * 64 + j] * y.value()[i * 64 + j];
    }
    CHECK(std::abs(sq - 32.0) < 1e-9);
  }
  // an all-equal row keeps its direction
  auto flat = tape.leaf({1, 64}, std::vector<double>(64, 0.25));
  auto z = transceiver::power_normalize_reshape(flat, 1.0, 2, 16);
  for (double v : z.value()) {
    CHECK(v == doctest::Approx(std::sqrt(32.0) / 8.0).epsilon(1e-12));
  }
}

TEST_CASE("complex packing of the symbol block round-trips") {
  rng::Stream rng(6, "pack");
  std::vector<double> row = randn(64, rng);
  auto m = channel::unpack_complex(row, 2, 16);
  CHECK(m.re(0, 0) == row[0]);
  CHECK(m.re(1, 15) == row[31]);
  CHECK(m.im(0, 0) == row[32]);
  std::vector<double> back(64);
  channel::pack_complex(m, back);
  CHECK(back == row);
}

TEST_CASE("jsc_decode concatenates CSI only for csir/csitr") {
  transceiver::ModelConfig c = tiny_config();
  rng::Stream init(7, "init");
  auto params =
      transceiver::TransceiverParams::initialize(Variant::csir, c, init);
  // decoder input width = rx width + csi length
  CHECK(params.users[0].gamma[0].shape ==
        diff::Shape{c.decoder_in_dim(Variant::csir) + c.csi_dim(),
                    c.hidden_dim});
  diff::Tape tape;
  auto bound = transceiver::bind_params(tape, params);
  auto y = tape.leaf({2, c.decoder_in_dim(Variant::csir)},
                     std::vector<double>(2 * c.decoder_in_dim(Variant::csir),
                                         0.0));
  CHECK_THROWS_AS(transceiver::jsc_decode(y, std::nullopt,
                                          bound.users[0].gamma, Variant::csir),
                  std::invalid_argument);
}

TEST_CASE("semantic_decode stays inside (-1, 1) and zero params give zero") {
  transceiver::ModelConfig c = tiny_config();
  diff::Tape tape;
  rng::Stream rng(8, "feat");
  auto feat = tape.leaf({4, c.hidden_dim}, randn(4 * c.hidden_dim, rng));
  std::vector<diff::Tensor> theta = {
      tape.leaf({c.hidden_dim, c.hidden_dim},
                randn(c.hidden_dim * c.hidden_dim, rng)),
      tape.leaf({c.hidden_dim}, randn(c.hidden_dim, rng)),
      tape.leaf({c.hidden_dim, c.input_dim},
                randn(c.hidden_dim * c.input_dim, rng)),
      tape.leaf({c.input_dim}, randn(c.input_dim, rng))};
  auto out = transceiver::semantic_decode(feat, theta);
  CHECK(out.cols() == c.input_dim);
  for (double v : out.value()) {
    CHECK(v > -1.0);
    CHECK(v < 1.0);
  }

  std::vector<diff::Tensor> zeros = {
      tape.leaf({c.hidden_dim, c.hidden_dim},
                std::vector<double>(c.hidden_dim * c.hidden_dim, 0.0)),
      tape.leaf({c.hidden_dim}, std::vector<double>(c.hidden_dim, 0.0)),
      tape.leaf({c.hidden_dim, c.input_dim},
                std::vector<double>(c.hidden_dim * c.input_dim, 0.0)),
      tape.leaf({c.input_dim}, std::vector<double>(c.input_dim, 0.0))};
  for (double v : transceiver::semantic_decode(feat, zeros).value()) {
    CHECK(v == 0.0);
  }
}

TEST_CASE("forward_pass shape chain for every variant") {
  transceiver::ModelConfig c = tiny_config();
  const std::size_t batch = 3;
  rng::Stream data_rng(9, "data");
  for (Variant variant :
       {Variant::csi_free, Variant::csir, Variant::csitr,
        Variant::interference_free, Variant::semi_conventional}) {
    rng::Stream init(10, "init");
    auto params = transceiver::TransceiverParams::initialize(variant, c, init);
    diff::Tape tape;
    auto bound = transceiver::bind_params(tape, params);
    std::vector<diff::Tensor> images;
    for (std::size_t k = 0; k < c.users; ++k) {
      images.push_back(
          tape.leaf({batch, c.input_dim}, randn(batch * c.input_dim,
                                                data_rng)));
    }
    auto realizations = draw_realizations(batch, c, 0.5, data_rng);
    rng::Stream noise(11, "noise");
    auto result = transceiver::forward_pass(tape, images, bound, params,
                                            realizations, noise);
    REQUIRE(result.decoded.size() == c.users);
    for (std::size_t k = 0; k < c.users; ++k) {
      CHECK(result.decoded[k].rows() == batch);
      CHECK(result.decoded[k].cols() == c.input_dim);
      CHECK(result.symbols[k].cols() == c.encoder_out_dim(variant));
      // power constraint per sample
      for (std::size_t i = 0; i < batch; ++i) {
        double sq = 0.0;
        auto row = result.symbols[k].value().subspan(
            i * result.symbols[k].cols(), result.symbols[k].cols());
        for (double v : row) sq += v * v;
        CHECK(std::abs(sq - c.power * c.tx_antennas * c.symbols) < 1e-9);
      }
      // pixel range
      for (double v : result.decoded[k].value()) {
        CHECK(v > -1.0);
        CHECK(v < 1.0);
      }
    }
  }
}

TEST_CASE("interference_free equals csi_free over an identity noiseless channel") {
  transceiver::ModelConfig c = tiny_config();
  c.users = 1;
  rng::Stream init(12, "init");
  auto params =
      transceiver::TransceiverParams::initialize(Variant::csi_free, c, init);
  const std::size_t batch = 2;
  rng::Stream data_rng(13, "data");
  std::vector<double> pixels = randn(batch * c.input_dim, data_rng);

  channel::ChannelRealization ident;
  ident.users = 1;
  ident.tx_antennas = c.tx_antennas;
  ident.rx_antennas = c.rx_antennas;
  ident.h.assign(1, cx::ComplexMatrix::identity(c.tx_antennas));
  ident.noise_variance = 0.0;

  diff::Tape tape_a;
  auto bound_a = transceiver::bind_params(tape_a, params);
  std::vector<diff::Tensor> img_a = {tape_a.leaf({batch, c.input_dim}, pixels)};
  rng::Stream noise_a(14, "noise");
  auto res_a = transceiver::forward_pass(
      tape_a, img_a, bound_a, params,
      std::span<const channel::ChannelRealization>(&ident, 1), noise_a);

  auto params_if = params;
  params_if.variant = Variant::interference_free;
  diff::Tape tape_b;
  auto bound_b = transceiver::bind_params(tape_b, params_if);
  std::vector<diff::Tensor> img_b = {tape_b.leaf({batch, c.input_dim}, pixels)};
  rng::Stream noise_b(15, "noise");
  auto res_b = transceiver::forward_pass(tape_b, img_b, bound_b, params_if, {},
                                         noise_b);
  for (std::size_t i = 0; i < res_a.decoded[0].value().size(); ++i) {
    CHECK(std::abs(res_a.decoded[0].value()[i] -
                   res_b.decoded[0].value()[i]) < 1e-12);
  }
}

TEST_CASE("every parameter of every user receives gradient after backward") {
  transceiver::ModelConfig c = tiny_config();
  const std::size_t batch = 4;
  rng::Stream data_rng(16, "data");
  for (Variant variant : {Variant::csir, Variant::csitr, Variant::csi_free,
                          Variant::semi_conventional}) {
    rng::Stream init(17, "init");
    auto params = transceiver::TransceiverParams::initialize(variant, c, init);
    diff::Tape tape;
    auto bound = transceiver::bind_params(tape, params);
    std::vector<diff::Tensor> images;
    for (std::size_t k = 0; k < c.users; ++k) {
      images.push_back(tape.leaf({batch, c.input_dim},
                                 randn(batch * c.input_dim, data_rng)));
    }
    auto realizations = draw_realizations(batch, c, 0.3, data_rng);
    rng::Stream noise(18, "noise");
    auto result = transceiver::forward_pass(tape, images, bound, params,
                                            realizations, noise);
    diff::Tensor loss;
    for (std::size_t k = 0; k < c.users; ++k) {
      auto mse = diff::mse_loss(result.decoded[k], images[k]);
      loss = k == 0 ? mse : diff::add(loss, mse);
    }
    tape.backward(loss);
    for (std::size_t i = 0; i < bound.flat.size(); ++i) {
      double norm = 0.0;
      for (double g : bound.flat[i].grad()) norm += g * g;
      INFO(std::string(transceiver::variant_name(variant)), " tensor ", i);
      CHECK(norm > 0.0);
    }
  }
}

TEST_CASE("full tiny-network gradients match finite differences at 1e-3") {
  transceiver::ModelConfig c;
  c.users = 2;
  c.tx_antennas = 2;
  c.rx_antennas = 2;
  c.symbols = 2;
  c.input_dim = 4;
  c.hidden_dim = 4;
  const std::size_t batch = 2;
  rng::Stream init(19, "init");
  auto params = transceiver::TransceiverParams::initialize(Variant::csir, c,
                                                           init);
  rng::Stream data_rng(20, "data");
  std::vector<std::vector<double>> pixels = {
      randn(batch * c.input_dim, data_rng),
      randn(batch * c.input_dim, data_rng)};
  auto realizations = draw_realizations(batch, c, 0.2, data_rng);

  auto loss_with = [&](const transceiver::TransceiverParams& p) {
    diff::Tape tape;
    auto bound = transceiver::bind_params(tape, p);
    std::vector<diff::Tensor> images = {
        tape.leaf({batch, c.input_dim}, pixels[0]),
        tape.leaf({batch, c.input_dim}, pixels[1])};
    rng::Stream noise(21, "noise");  // pinned
    auto result =
        transceiver::forward_pass(tape, images, bound, p, realizations, noise);
    auto loss = diff::add(diff::mse_loss(result.decoded[0], images[0]),
                          diff::mse_loss(result.decoded[1], images[1]));
    return loss.scalar();
  };

  // analytic gradients
  diff::Tape tape;
  auto bound = transceiver::bind_params(tape, params);
  std::vector<diff::Tensor> images = {
      tape.leaf({batch, c.input_dim}, pixels[0]),
      tape.leaf({batch, c.input_dim}, pixels[1])};
  rng::Stream noise(21, "noise");
  auto result = transceiver::forward_pass(tape, images, bound, params,
                                          realizations, noise);
  auto loss = diff::add(diff::mse_loss(result.decoded[0], images[0]),
                        diff::mse_loss(result.decoded[1], images[1]));
  tape.backward(loss);

  auto flat = params.flat();
  for (std::size_t t = 0; t < flat.size(); ++t) {
    auto analytic = bound.flat[t].grad();
    std::vector<double> fd_grad(analytic.size());
    for (std::size_t i = 0; i < flat[t]->value.size(); ++i) {
      const double saved = flat[t]->value[i];
      flat[t]->value[i] = saved + 1e-4;
      const double up = loss_with(params);
      flat[t]->value[i] = saved - 1e-4;
      const double down = loss_with(params);
      flat[t]->value[i] = saved;
      fd_grad[i] = (up - down) / 2e-4;
    }
    INFO("tensor ", flat[t]->name);
    CHECK(fd::max_rel_err({analytic.begin(), analytic.end()}, fd_grad) < 1e-3);
  }
}

TEST_CASE("checkpoint round trip is exact") {
  transceiver::ModelConfig c = tiny_config();
  rng::Stream init(22, "init");
  auto params = transceiver::TransceiverParams::initialize(Variant::csitr, c,
                                                           init);
  const auto path = std::filesystem::temp_directory_path() /
                    "irsc_test_checkpoint.ckpt";
  transceiver::save_checkpoint(params, path);
  auto back = transceiver::load_checkpoint(path);
  CHECK(back.variant == Variant::csitr);
  CHECK(back.config.users == c.users);
  CHECK(back.config.hidden_dim == c.hidden_dim);
  auto a = params.flat();
  auto b = back.flat();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i]->shape == b[i]->shape);
    CHECK(a[i]->value == b[i]->value);
  }
  std::filesystem::remove(path);
}

TEST_CASE("load_checkpoint rejects foreign files") {
  const auto path = std::filesystem::temp_directory_path() /
                    "irsc_not_a_checkpoint.bin";
  {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    std::fputs("definitely not a checkpoint", f);
    std::fclose(f);
  }
  CHECK_THROWS_WITH_AS(transceiver::load_checkpoint(path),
                       doctest::Contains("not an IRSC checkpoint"),
                       std::runtime_error);
  std::filesystem::remove(path);
}
