#include "irsc/transceiver.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "binio.hpp"

namespace irsc::transceiver {

namespace {

constexpr char kCheckpointMagic[8] = {'I', 'R', 'S', 'C', 'C', 'K', 'P', '1'};

Param make_weight(std::string name, std::size_t d_in, std::size_t d_out,
                  rng::Stream& init) {
  Param p;
  p.name = std::move(name);
  p.shape = {d_in, d_out};
  p.value.resize(d_in * d_out);
  const double bound = std::sqrt(6.0 / static_cast<double>(d_in + d_out));
  for (double& v : p.value) v = init.uniform(-bound, bound);
  return p;
}

Param make_bias(std::string name, std::size_t d_out) {
  Param p;
  p.name = std::move(name);
  p.shape = {d_out};
  // Small positive offset keeps relu units alive at the start and keeps the
  // encoder output away from the zero-norm corner of Eq-style normalization.
  p.value.assign(d_out, 0.01);
  return p;
}

void check_stage_arity(std::span<const diff::Tensor> stage, std::size_t want,
                       const char* name) {
  if (stage.size() != want) {
    throw std::invalid_argument(std::string(name) + ": expected " +
                                std::to_string(want) + " parameter tensors, got " +
                                std::to_string(stage.size()));
  }
}

}  // namespace

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::csi_free: return "csi_free";
    case Variant::csir: return "csir";
    case Variant::csitr: return "csitr";
    case Variant::interference_free: return "interference_free";
    case Variant::semi_conventional: return "semi_conventional";
  }
  throw std::logic_error("variant_name: bad enum");
}

Variant variant_from_name(std::string_view name) {
  if (name == "csi_free") return Variant::csi_free;
  if (name == "csir") return Variant::csir;
  if (name == "csitr") return Variant::csitr;
  if (name == "interference_free") return Variant::interference_free;
  if (name == "semi_conventional") return Variant::semi_conventional;
  throw std::invalid_argument("unknown variant '" + std::string(name) + "'");
}

bool encoder_takes_csi(Variant v) { return v == Variant::csitr; }

bool decoder_takes_csi(Variant v) {
  return v == Variant::csir || v == Variant::csitr;
}

double ModelConfig::symbol_norm() const {
  return std::sqrt(power * static_cast<double>(tx_antennas * symbols));
}

std::vector<Param*> TransceiverParams::flat() {
  std::vector<Param*> out;
  for (UserParams& u : users) {
    for (auto* stage : {&u.alpha, &u.beta, &u.gamma, &u.theta}) {
      for (Param& p : *stage) out.push_back(&p);
    }
  }
  return out;
}

std::vector<const Param*> TransceiverParams::flat() const {
  std::vector<const Param*> out;
  for (const UserParams& u : users) {
    for (auto* stage : {&u.alpha, &u.beta, &u.gamma, &u.theta}) {
      for (const Param& p : *stage) out.push_back(&p);
    }
  }
  return out;
}

TransceiverParams TransceiverParams::initialize(Variant variant,
                                                const ModelConfig& config,
                                                rng::Stream& init) {
  TransceiverParams params;
  params.variant = variant;
  params.config = config;
  const std::size_t n = config.input_dim;
  const std::size_t h = config.hidden_dim;
  const std::size_t c = config.csi_dim();
  const std::size_t tx_out = config.encoder_out_dim(variant);
  const std::size_t rx_in = config.decoder_in_dim(variant);

  for (std::size_t k = 0; k < config.users; ++k) {
    const std::string tag = "u" + std::to_string(k) + ".";
    UserParams u;
    u.alpha.push_back(make_weight(tag + "alpha.w", n, h, init));
    u.alpha.push_back(make_bias(tag + "alpha.b", h));
    if (encoder_takes_csi(variant)) {
      u.beta.push_back(make_weight(tag + "beta.w1", h + c, h, init));
      u.beta.push_back(make_bias(tag + "beta.b1", h));
      u.beta.push_back(make_weight(tag + "beta.w2", h, tx_out, init));
      u.beta.push_back(make_bias(tag + "beta.b2", tx_out));
    } else {
      u.beta.push_back(make_weight(tag + "beta.w", h, tx_out, init));
      u.beta.push_back(make_bias(tag + "beta.b", tx_out));
    }
    const std::size_t dec_in = rx_in + (decoder_takes_csi(variant) ? c : 0);
    u.gamma.push_back(make_weight(tag + "gamma.w1", dec_in, h, init));
    u.gamma.push_back(make_bias(tag + "gamma.b1", h));
    u.gamma.push_back(make_weight(tag + "gamma.w2", h, h, init));
    u.gamma.push_back(make_bias(tag + "gamma.b2", h));
    u.theta.push_back(make_weight(tag + "theta.w1", h, h, init));
    u.theta.push_back(make_bias(tag + "theta.b1", h));
    u.theta.push_back(make_weight(tag + "theta.w2", h, n, init));
    u.theta.push_back(make_bias(tag + "theta.b2", n));
    params.users.push_back(std::move(u));
  }
  return params;
}

void save_checkpoint(const TransceiverParams& params,
                     const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  binio::write_u32(os, static_cast<std::uint32_t>(params.variant));
  const ModelConfig& c = params.config;
  binio::write_u32(os, static_cast<std::uint32_t>(c.users));
  binio::write_u32(os, static_cast<std::uint32_t>(c.tx_antennas));
  binio::write_u32(os, static_cast<std::uint32_t>(c.rx_antennas));
  binio::write_u32(os, static_cast<std::uint32_t>(c.symbols));
  binio::write_u32(os, static_cast<std::uint32_t>(c.hidden_dim));
  binio::write_u32(os, static_cast<std::uint32_t>(c.input_dim));
  binio::write_f64(os, c.power);
  const auto tensors = params.flat();
  binio::write_u32(os, static_cast<std::uint32_t>(tensors.size()));
  for (const Param* p : tensors) {
    binio::write_u32(os, static_cast<std::uint32_t>(p->shape.size()));
    for (std::size_t d : p->shape) {
      binio::write_u32(os, static_cast<std::uint32_t>(d));
    }
    for (double v : p->value) binio::write_f64(os, v);
  }
  if (!os) throw std::runtime_error("short write to " + path.string());
}

TransceiverParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw std::runtime_error(path.string() + ": not an IRSC checkpoint");
  }
  const char* what = "checkpoint";
  const std::uint32_t variant_raw = binio::read_u32(is, what);
  if (variant_raw > static_cast<std::uint32_t>(Variant::semi_conventional)) {
    throw std::runtime_error(path.string() + ": bad variant tag");
  }
  ModelConfig config;
  config.users = binio::read_u32(is, what);
  config.tx_antennas = binio::read_u32(is, what);
  config.rx_antennas = binio::read_u32(is, what);
  config.symbols = binio::read_u32(is, what);
  config.hidden_dim = binio::read_u32(is, what);
  config.input_dim = binio::read_u32(is, what);
  config.power = binio::read_f64(is, what);

  // Rebuild the skeleton, then overwrite tensor payloads in canonical order.
  rng::Stream dummy(0);
  TransceiverParams params = TransceiverParams::initialize(
      static_cast<Variant>(variant_raw), config, dummy);
  auto tensors = params.flat();
  const std::uint32_t count = binio::read_u32(is, what);
  if (count != tensors.size()) {
    throw std::runtime_error(path.string() + ": tensor count " +
                             std::to_string(count) + " does not match layout " +
                             std::to_string(tensors.size()));
  }
  for (Param* p : tensors) {
    const std::uint32_t rank = binio::read_u32(is, what);
    diff::Shape shape(rank);
    for (std::uint32_t i = 0; i < rank; ++i) {
      shape[i] = binio::read_u32(is, what);
    }
    if (shape != p->shape) {
      throw std::runtime_error(path.string() + ": tensor " + p->name +
                               " has shape " + diff::shape_str(shape) +
                               ", layout wants " + diff::shape_str(p->shape));
    }
    for (double& v : p->value) v = binio::read_f64(is, what);
  }
  return params;
}

BoundParams bind_params(diff::Tape& tape, const TransceiverParams& params) {
  BoundParams bound;
  for (const UserParams& u : params.users) {
    BoundParams::UserTensors ut;
    for (auto [stage, dest] :
         {std::pair{&u.alpha, &ut.alpha}, std::pair{&u.beta, &ut.beta},
          std::pair{&u.gamma, &ut.gamma}, std::pair{&u.theta, &ut.theta}}) {
      for (const Param& p : *stage) {
        diff::Tensor t = tape.leaf(p.shape, p.value);
        dest->push_back(t);
        bound.flat.push_back(t);
      }
    }
    bound.users.push_back(std::move(ut));
  }
  return bound;
}

diff::Tensor semantic_encode(const diff::Tensor& images,
                             std::span<const diff::Tensor> alpha) {
  check_stage_arity(alpha, 2, "semantic_encode");
  return diff::relu(diff::affine(images, alpha[0], alpha[1]));
}

diff::Tensor jsc_encode(const diff::Tensor& features,
                        const std::optional<diff::Tensor>& csi,
                        std::span<const diff::Tensor> beta, Variant variant) {
  if (encoder_takes_csi(variant) != csi.has_value()) {
    throw std::invalid_argument(
        std::string("jsc_encode: CSI ") +
        (csi.has_value() ? "given to" : "missing for") + " variant " +
        std::string(variant_name(variant)));
  }
  if (csi.has_value()) {
    check_stage_arity(beta, 4, "jsc_encode");
    diff::Tensor fused = diff::concat_rows(features, *csi);
    diff::Tensor mid = diff::relu(diff::affine(fused, beta[0], beta[1]));
    return diff::affine(mid, beta[2], beta[3]);
  }
  check_stage_arity(beta, 2, "jsc_encode");
  return diff::affine(features, beta[0], beta[1]);
}

diff::Tensor power_normalize_reshape(const diff::Tensor& symbols, double power,
                                     std::size_t tx_antennas,
                                     std::size_t symbol_count) {
  const double target =
      std::sqrt(power * static_cast<double>(tx_antennas * symbol_count));
  return diff::l2_normalize_scale(symbols, target);
}

diff::Tensor jsc_decode(const diff::Tensor& received,
                        const std::optional<diff::Tensor>& csi,
                        std::span<const diff::Tensor> gamma, Variant variant) {
  if (decoder_takes_csi(variant) != csi.has_value()) {
    throw std::invalid_argument(
        std::string("jsc_decode: CSI ") +
        (csi.has_value() ? "given to" : "missing for") + " variant " +
        std::string(variant_name(variant)));
  }
  check_stage_arity(gamma, 4, "jsc_decode");
  diff::Tensor in =
      csi.has_value() ? diff::concat_rows(received, *csi) : received;
  diff::Tensor mid = diff::relu(diff::affine(in, gamma[0], gamma[1]));
  return diff::affine(mid, gamma[2], gamma[3]);
}

diff::Tensor semantic_decode(const diff::Tensor& features,
                             std::span<const diff::Tensor> theta) {
  check_stage_arity(theta, 4, "semantic_decode");
  diff::Tensor mid = diff::relu(diff::affine(features, theta[0], theta[1]));
  return diff::tanh_act(diff::affine(mid, theta[2], theta[3]));
}

namespace {

// CSI matrix for the batch: row i is flatten_csi of the sample's
// realization. Recorded as a constant leaf.
diff::Tensor make_csi_tensor(
    diff::Tape& tape, std::span<const channel::ChannelRealization> realizations,
    std::size_t batch, const ModelConfig& config) {
  const std::size_t c = config.csi_dim();
  std::vector<double> values(batch * c);
  std::vector<double> row;
  for (std::size_t i = 0; i < batch; ++i) {
    const channel::ChannelRealization& r =
        realizations[realizations.size() == 1 ? 0 : i];
    row = channel::flatten_csi(r);
    if (row.size() != c) {
      throw std::invalid_argument("forward_pass: CSI length " +
                                  std::to_string(row.size()) +
                                  " does not match config " +
                                  std::to_string(c));
    }
    if (config.standardize_csi) {
      double mean = 0.0;
      for (double v : row) mean += v;
      mean /= static_cast<double>(row.size());
      double var = 0.0;
      for (double v : row) var += (v - mean) * (v - mean);
      var /= static_cast<double>(row.size());
      const double inv = 1.0 / std::sqrt(var + 1e-12);
      for (double& v : row) v = (v - mean) * inv;
    }
    std::copy(row.begin(), row.end(), values.begin() + i * c);
  }
  return tape.leaf({batch, c}, std::move(values));
}

}  // namespace

ForwardResult forward_pass(
    diff::Tape& tape, std::span<const diff::Tensor> images,
    const BoundParams& bound, const TransceiverParams& params,
    std::span<const channel::ChannelRealization> realizations,
    rng::Stream& noise_rng) {
  const Variant variant = params.variant;
  const ModelConfig& config = params.config;
  const std::size_t users = config.users;
  if (images.size() != users || bound.users.size() != users) {
    throw std::invalid_argument("forward_pass: user count mismatch");
  }
  const std::size_t batch = images[0].rows();
  for (const diff::Tensor& s : images) {
    if (s.rows() != batch || s.cols() != config.input_dim) {
      throw std::invalid_argument("forward_pass: image batch shape " +
                                  diff::shape_str(s.shape()));
    }
  }
  const bool uses_channel = variant != Variant::interference_free;
  if (uses_channel && realizations.empty()) {
    throw std::invalid_argument("forward_pass: variant " +
                                std::string(variant_name(variant)) +
                                " needs channel realizations");
  }

  std::optional<diff::Tensor> csi;
  if (encoder_takes_csi(variant) || decoder_takes_csi(variant)) {
    csi = make_csi_tensor(tape, realizations, batch, config);
  }

  ForwardResult result;
  result.symbols.reserve(users);
  for (std::size_t k = 0; k < users; ++k) {
    diff::Tensor feat = semantic_encode(images[k], bound.users[k].alpha);
    diff::Tensor xt = jsc_encode(
        feat, encoder_takes_csi(variant) ? csi : std::nullopt,
        bound.users[k].beta, variant);
    result.symbols.push_back(power_normalize_reshape(
        xt, config.power, config.tx_antennas, config.symbols));
  }

  std::vector<diff::Tensor> received;
  switch (variant) {
    case Variant::interference_free:
      received.assign(result.symbols.begin(), result.symbols.end());
      break;
    case Variant::semi_conventional: {
      std::vector<channel::PrecoderSet> precoders;
      precoders.reserve(realizations.size());
      for (const channel::ChannelRealization& r : realizations) {
        precoders.push_back(
            channel::design_precoders_filters(r, config.precoder_iterations)
                .precoders);
      }
      received = channel::apply_filtered_channel(
          result.symbols, realizations, precoders, config.symbols, noise_rng);
      break;
    }
    default:
      received = channel::apply_interference_channel(
          result.symbols, realizations, config.symbols, noise_rng);
  }

  result.decoded.reserve(users);
  for (std::size_t k = 0; k < users; ++k) {
    diff::Tensor feat = jsc_decode(
        received[k], decoder_takes_csi(variant) ? csi : std::nullopt,
        bound.users[k].gamma, variant);
    result.decoded.push_back(semantic_decode(feat, bound.users[k].theta));
  }
  return result;
}

}  // namespace irsc::transceiver
