#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "irsc/channel.hpp"
#include "irsc/rng.hpp"
#include "irsc/tensor.hpp"

namespace irsc::transceiver {

enum class Variant {
  csi_free,
  csir,
  csitr,
  interference_free,
  semi_conventional,
};

std::string_view variant_name(Variant v);
Variant variant_from_name(std::string_view name);
bool encoder_takes_csi(Variant v);  // csitr only
bool decoder_takes_csi(Variant v);  // csir and csitr

struct ModelConfig {
  std::size_t users = 2;         // K
  std::size_t tx_antennas = 2;   // Nt
  std::size_t rx_antennas = 2;   // Nr
  std::size_t symbols = 16;      // NB, complex symbols per antenna
  std::size_t input_dim = 784;   // n
  std::size_t hidden_dim = 256;  // h
  double power = 1.0;            // P
  std::size_t precoder_iterations = 30;  // semi_conventional design depth
  bool standardize_csi = false;

  std::size_t csi_dim() const {
    return 2 * users * users * tx_antennas * rx_antennas;
  }
  // Width of the packed symbol row the encoder emits.
  std::size_t encoder_out_dim(Variant v) const {
    return v == Variant::semi_conventional ? 2 * rx_antennas * symbols
                                           : 2 * tx_antennas * symbols;
  }
  // Width of the packed row arriving at the JSC decoder (before CSI concat).
  std::size_t decoder_in_dim(Variant v) const {
    switch (v) {
      case Variant::interference_free:
        return 2 * tx_antennas * symbols;
      case Variant::semi_conventional:
        return 2 * tx_antennas * symbols;  // U^H lifts to Nt rows
      default:
        return 2 * rx_antennas * symbols;
    }
  }
  double symbol_norm() const;  // sqrt(P * Nt * NB)
};

struct Param {
  std::string name;
  diff::Shape shape;
  std::vector<double> value;
};

// alpha: semantic encoder, beta: JSC encoder, gamma: JSC decoder,
// theta: semantic decoder. Weight/bias pairs in layer order.
struct UserParams {
  std::vector<Param> alpha, beta, gamma, theta;
};

struct TransceiverParams {
  Variant variant = Variant::csir;
  ModelConfig config;
  std::vector<UserParams> users;

  // Canonical flat order: per user alpha, beta, gamma, theta.
  std::vector<Param*> flat();
  std::vector<const Param*> flat() const;

  // Glorot-uniform weights drawn from `init`, zero biases.
  static TransceiverParams initialize(Variant variant,
                                      const ModelConfig& config,
                                      rng::Stream& init);
};

// Binary checkpoint: magic "IRSCCKP1", u32 variant, u32 K/Nt/Nr/NB/h/n,
// f64 P, u32 tensor count, then per tensor u32 rank, u32 dims, f64 payload;
// tensors in canonical flat order, doubles little-endian.
void save_checkpoint(const TransceiverParams& params,
                     const std::filesystem::path& path);
TransceiverParams load_checkpoint(const std::filesystem::path& path);

// Parameters pushed onto a tape as leaves, in canonical order, with per-user
// stage views for the forward pass.
struct BoundParams {
  std::vector<diff::Tensor> flat;
  struct UserTensors {
    std::vector<diff::Tensor> alpha, beta, gamma, theta;
  };
  std::vector<UserTensors> users;
};
BoundParams bind_params(diff::Tape& tape, const TransceiverParams& params);

// ---- Stage operations ------------------------------------------------------

// One affine + relu: [batch x n] -> [batch x h].
diff::Tensor semantic_encode(const diff::Tensor& images,
                             std::span<const diff::Tensor> alpha);
// CSI-aware path (csitr): concat -> affine+relu to h -> affine to the symbol
// width. All other variants: a single affine layer.
diff::Tensor jsc_encode(const diff::Tensor& features,
                        const std::optional<diff::Tensor>& csi,
                        std::span<const diff::Tensor> beta, Variant variant);
// Per-sample L2 normalization to sqrt(P*Nt*NB); the flat row packs the
// Nt x NB complex block (real parts then imaginary parts, row-major).
diff::Tensor power_normalize_reshape(const diff::Tensor& symbols, double power,
                                     std::size_t tx_antennas,
                                     std::size_t symbol_count);
// Mirror of jsc_encode: optional CSI concat -> affine+relu -> affine to h.
diff::Tensor jsc_decode(const diff::Tensor& received,
                        const std::optional<diff::Tensor>& csi,
                        std::span<const diff::Tensor> gamma, Variant variant);
// affine+relu -> affine+tanh to the pixel range (-1, 1).
diff::Tensor semantic_decode(const diff::Tensor& features,
                             std::span<const diff::Tensor> theta);

// ---- Full multi-user forward pass ------------------------------------------

struct ForwardResult {
  std::vector<diff::Tensor> decoded;  // per user [batch x n]
  std::vector<diff::Tensor> symbols;  // per user normalized symbol rows
};

// Composes the stages end to end on one tape. `realizations` carries one
// entry shared by the batch or one per sample; it is ignored by the
// interference_free variant. CSI inputs are derived from the realizations
// for the variants that consume them.
ForwardResult forward_pass(diff::Tape& tape,
                           std::span<const diff::Tensor> images,
                           const BoundParams& bound,
                           const TransceiverParams& params,
                           std::span<const channel::ChannelRealization>
                               realizations,
                           rng::Stream& noise_rng);

}  // namespace irsc::transceiver
