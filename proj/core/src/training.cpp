#include "irsc/training.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "irsc/channel.hpp"
#include "csvfmt.hpp"

namespace irsc::training {

LossWeights LossWeights::uniform(std::size_t users) {
  if (users == 0) throw std::invalid_argument("LossWeights: zero users");
  LossWeights w;
  w.w.assign(users, 1.0 / static_cast<double>(users));
  return w;
}

LossWeights update_weights(const LossWeights& previous,
                           std::span<const double> per_user_losses) {
  if (per_user_losses.size() != previous.w.size()) {
    throw std::invalid_argument("update_weights: user count mismatch");
  }
  double sum = 0.0;
  for (double l : per_user_losses) {
    if (l < 0.0) throw std::invalid_argument("update_weights: negative loss");
    sum += l;
  }
  LossWeights next;
  next.epoch = previous.epoch + 1;
  if (sum == 0.0) {
    next.w = previous.w;  // degenerate all-zero epoch
    return next;
  }
  next.w.resize(per_user_losses.size());
  for (std::size_t k = 0; k < per_user_losses.size(); ++k) {
    next.w[k] = per_user_losses[k] / sum;
  }
  return next;
}

TotalLoss total_loss(std::span<const diff::Tensor> targets,
                     std::span<const diff::Tensor> decoded,
                     const LossWeights& weights) {
  if (targets.size() != decoded.size() || targets.size() != weights.w.size()) {
    throw std::invalid_argument("total_loss: user count mismatch");
  }
  TotalLoss out;
  out.per_user.reserve(targets.size());
  diff::Tensor acc;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    diff::Tensor user_mse = diff::mse_loss(decoded[k], targets[k]);
    out.per_user.push_back(user_mse.scalar());
    diff::Tensor weighted = diff::scale(user_mse, weights.w[k]);
    acc = k == 0 ? weighted : diff::add(acc, weighted);
  }
  out.total = acc;
  return out;
}

SnrPolicy SnrPolicy::fixed(double db) {
  SnrPolicy p;
  p.kind = Kind::fixed;
  p.fixed_db = db;
  return p;
}

SnrPolicy SnrPolicy::uniform_range(double low_db, double high_db) {
  SnrPolicy p;
  p.kind = Kind::uniform;
  p.low_db = low_db;
  p.high_db = high_db;
  return p;
}

double SnrPolicy::sample_db(rng::Stream& rng) const {
  return kind == Kind::fixed ? fixed_db : rng.uniform(low_db, high_db);
}

TrainResult train(const TrainConfig& config,
                  std::span<const data::ImageSet> datasets,
                  const EpochHook& hook, std::ostream* log_csv) {
  const std::size_t users = config.model.users;
  if (datasets.size() != users) {
    throw std::invalid_argument("train: " + std::to_string(datasets.size()) +
                                " datasets for K=" + std::to_string(users));
  }
  if (config.epochs < 1 || config.batch_size < 1) {
    throw std::invalid_argument("train: epochs and batch size must be >= 1");
  }
  const bool uses_channel =
      config.variant != transceiver::Variant::interference_free;

  rng::Stream init(config.master_seed, "init");
  rng::Stream channel_rng(config.master_seed, "channel");
  rng::Stream noise_rng(config.master_seed, "noise");
  rng::Stream snr_rng(config.master_seed, "snr");

  TrainResult result{
      transceiver::TransceiverParams::initialize(config.variant, config.model,
                                                 init),
      TrainState{}};
  result.state.weights = LossWeights::uniform(users);

  diff::Adam adam(config.adam);
  std::vector<std::vector<double>> batch_pixels(users);

  if (log_csv) {
    *log_csv << "epoch";
    for (std::size_t k = 0; k < users; ++k) *log_csv << ",mse_user" << k + 1;
    for (std::size_t k = 0; k < users; ++k) *log_csv << ",omega_user" << k + 1;
    *log_csv << ",seconds\n";
  }

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<data::BatchIter> iters;
    iters.reserve(users);
    for (std::size_t k = 0; k < users; ++k) {
      iters.emplace_back(datasets[k], config.batch_size,
                         rng::Stream(config.master_seed, "shuffle",
                                     epoch * users + k));
    }
    std::size_t batches = iters[0].batch_count();
    for (const auto& it : iters) {
      batches = std::min(batches, it.batch_count());
    }
    if (batches == 0) {
      throw std::invalid_argument("train: batch size exceeds dataset size");
    }

    std::vector<double> epoch_mse(users, 0.0);
    for (std::size_t b = 0; b < batches; ++b) {
      diff::Tape tape;
      transceiver::BoundParams bound =
          transceiver::bind_params(tape, result.params);
      std::vector<diff::Tensor> images;
      images.reserve(users);
      for (std::size_t k = 0; k < users; ++k) {
        iters[k].batch(b, batch_pixels[k]);
        images.push_back(tape.leaf({config.batch_size, config.model.input_dim},
                                   batch_pixels[k]));
      }

      std::vector<channel::ChannelRealization> realizations;
      if (uses_channel) {
        const double snr_db = config.train_snr.sample_db(snr_rng);
        const double sigma2 =
            channel::noise_variance_from_snr(snr_db, config.model.power);
        realizations.reserve(config.batch_size);
        for (std::size_t i = 0; i < config.batch_size; ++i) {
          channel::ChannelRealization r = channel::sample_channel(
              users, config.model.tx_antennas, config.model.rx_antennas,
              channel_rng);
          r.noise_variance = sigma2;
          realizations.push_back(std::move(r));
        }
      }

      transceiver::ForwardResult fwd = transceiver::forward_pass(
          tape, images, bound, result.params, realizations, noise_rng);
      TotalLoss loss = total_loss(images, fwd.decoded, result.state.weights);
      if (!std::isfinite(loss.total.scalar())) {
        throw std::runtime_error("train: non-finite loss at epoch " +
                                 std::to_string(epoch + 1) + " batch " +
                                 std::to_string(b + 1));
      }
      tape.backward(loss.total);

      std::vector<std::vector<double>*> values;
      std::vector<std::span<const double>> grads;
      auto flat = result.params.flat();
      values.reserve(flat.size());
      grads.reserve(flat.size());
      for (std::size_t i = 0; i < flat.size(); ++i) {
        values.push_back(&flat[i]->value);
        grads.push_back(bound.flat[i].grad());
      }
      adam.step(values, grads);

      for (std::size_t k = 0; k < users; ++k) {
        epoch_mse[k] += loss.per_user[k];
      }
      if (config.weights_per_batch) {
        result.state.weights =
            update_weights(result.state.weights, loss.per_user);
      }
    }

    for (double& m : epoch_mse) m /= static_cast<double>(batches);
    const auto t1 = std::chrono::steady_clock::now();

    EpochStats stats;
    stats.per_user_mse = epoch_mse;
    stats.weights = result.state.weights.w;
    stats.seconds = std::chrono::duration<double>(t1 - t0).count();
    result.state.history.push_back(stats);
    result.state.epoch = epoch + 1;

    if (log_csv) {
      *log_csv << epoch + 1;
      for (double m : epoch_mse) *log_csv << "," << csvfmt::number(m);
      for (double w : stats.weights) *log_csv << "," << csvfmt::number(w);
      *log_csv << "," << csvfmt::number(stats.seconds) << "\n";
    }

    if (!config.weights_per_batch) {
      result.state.weights = update_weights(result.state.weights, epoch_mse);
    }
    if (hook) hook(result.state, result.params);
  }
  return result;
}

}  // namespace irsc::training
