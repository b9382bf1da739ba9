#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "irsc/adam.hpp"
#include "irsc/datasets.hpp"
#include "irsc/tensor.hpp"
#include "irsc/transceiver.hpp"

namespace irsc::training {

// Per-user loss weights; nonnegative, sum to one.
struct LossWeights {
  std::vector<double> w;
  std::size_t epoch = 0;

  static LossWeights uniform(std::size_t users);
};

// omega_k <- L_k / sum_j L_j. All-zero losses keep the previous weights.
LossWeights update_weights(const LossWeights& previous,
                           std::span<const double> per_user_losses);

struct TotalLoss {
  diff::Tensor total;
  std::vector<double> per_user;  // detached MSE values
};

// sum_k omega_k * MSE(S_k, S_hat_k).
TotalLoss total_loss(std::span<const diff::Tensor> targets,
                     std::span<const diff::Tensor> decoded,
                     const LossWeights& weights);

struct SnrPolicy {
  enum class Kind { fixed, uniform } kind = Kind::uniform;
  double fixed_db = 10.0;
  double low_db = 0.0;
  double high_db = 20.0;

  static SnrPolicy fixed(double db);
  static SnrPolicy uniform_range(double low_db, double high_db);
  double sample_db(rng::Stream& rng) const;
};

struct TrainConfig {
  transceiver::Variant variant = transceiver::Variant::csir;
  transceiver::ModelConfig model;
  std::size_t epochs = 20;
  std::size_t batch_size = 128;
  diff::AdamConfig adam;
  SnrPolicy train_snr;
  std::uint64_t master_seed = 1;
  // Eq-weight granularity: per-epoch by default, per-batch when set.
  bool weights_per_batch = false;
};

struct EpochStats {
  std::vector<double> per_user_mse;  // epoch means
  std::vector<double> weights;       // omega used during this epoch
  double seconds = 0.0;
};

struct TrainState {
  std::size_t epoch = 0;
  LossWeights weights;
  std::vector<EpochStats> history;
};

struct TrainResult {
  transceiver::TransceiverParams params;
  TrainState state;
};

using EpochHook =
    std::function<void(const TrainState&, const transceiver::TransceiverParams&)>;

// Algorithm: per batch, draw one fresh channel realization per sample (all
// shared across users within the sample) and one training SNR, run the
// forward pass, backpropagate the weighted loss, and Adam-step every user's
// parameters simultaneously. Weights update from epoch-mean losses.
// The optional log stream receives CSV rows
// epoch,mse_user<k>...,omega_user<k>...,seconds.
TrainResult train(const TrainConfig& config,
                  std::span<const data::ImageSet> datasets,
                  const EpochHook& hook = {}, std::ostream* log_csv = nullptr);

}  // namespace irsc::training
