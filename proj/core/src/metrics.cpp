#include "irsc/metrics.hpp"

#include <omp.h>

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "irsc/channel.hpp"
#include "csvfmt.hpp"

namespace irsc::metrics {

double ssim(std::span<const double> s, std::span<const double> s_hat,
            const SsimParams& params) {
  if (s.size() != s_hat.size() || s.empty()) {
    throw std::invalid_argument("ssim: image length mismatch");
  }
  const double n = static_cast<double>(s.size());
  // Shift [-1,1] onto [0,L]; the variance terms are shift-invariant but the
  // luminance term is not.
  const double half = params.dynamic_range / 2.0;
  double mu_a = 0.0, mu_b = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    mu_a += (s[i] + 1.0) * half;
    mu_b += (s_hat[i] + 1.0) * half;
  }
  mu_a /= n;
  mu_b /= n;
  double var_a = 0.0, var_b = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double da = (s[i] + 1.0) * half - mu_a;
    const double db = (s_hat[i] + 1.0) * half - mu_b;
    var_a += da * da;
    var_b += db * db;
    cov += da * db;
  }
  var_a /= n;
  var_b /= n;
  cov /= n;
  const double c1 = params.c1();
  const double c2 = params.c2();
  return ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
         ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
}

double EvalReport::mean_at(std::size_t user, double snr_db) const {
  for (const SnrPoint& p : per_user.at(user)) {
    if (p.snr_db == snr_db) return p.mean_ssim;
  }
  throw std::invalid_argument("EvalReport: no point at " +
                              std::to_string(snr_db) + " dB");
}

double EvalReport::user_average_at(double snr_db) const {
  double acc = 0.0;
  for (std::size_t k = 0; k < per_user.size(); ++k) acc += mean_at(k, snr_db);
  return acc / static_cast<double>(per_user.size());
}

EvalReport evaluate(const transceiver::TransceiverParams& params,
                    std::span<const data::ImageSet> test_sets,
                    const EvalConfig& config) {
  const std::size_t users = params.config.users;
  if (test_sets.size() != users) {
    throw std::invalid_argument("evaluate: test set count mismatch");
  }
  if (config.trials < 1 || config.snr_db.empty()) {
    throw std::invalid_argument("evaluate: need trials >= 1 and an SNR list");
  }
  for (const data::ImageSet& set : test_sets) {
    if (config.batch > set.count) {
      throw std::invalid_argument("evaluate: batch exceeds test set size");
    }
  }

  // mean[snr][trial][user]
  std::vector<std::vector<std::vector<double>>> trial_means(
      config.snr_db.size(),
      std::vector<std::vector<double>>(config.trials,
                                       std::vector<double>(users, 0.0)));

  const int max_threads =
      config.threads > 0 ? static_cast<int>(config.threads)
                         : omp_get_max_threads();

  for (std::size_t si = 0; si < config.snr_db.size(); ++si) {
    const double sigma2 = channel::noise_variance_from_snr(
        config.snr_db[si], params.config.power);
#pragma omp parallel for schedule(dynamic) num_threads(max_threads)
    for (std::int64_t trial = 0;
         trial < static_cast<std::int64_t>(config.trials); ++trial) {
      const auto t = static_cast<std::uint64_t>(trial);
      // Trial-indexed streams: identical draws at every SNR point.
      rng::Stream channel_rng(config.seed, "eval-channel", t);
      rng::Stream batch_rng(config.seed, "eval-batch", t);
      rng::Stream noise_rng(config.seed, "eval-noise", t);

      channel::ChannelRealization realization = channel::sample_channel(
          users, params.config.tx_antennas, params.config.rx_antennas,
          channel_rng);
      realization.noise_variance = sigma2;

      diff::Tape tape;
      transceiver::BoundParams bound = transceiver::bind_params(tape, params);
      std::vector<diff::Tensor> images;
      images.reserve(users);
      for (std::size_t k = 0; k < users; ++k) {
        std::vector<double> pixels(config.batch * params.config.input_dim);
        for (std::size_t i = 0; i < config.batch; ++i) {
          const std::size_t idx = batch_rng.uniform_index(test_sets[k].count);
          std::span<const double> img = test_sets[k].image(idx);
          std::copy(img.begin(), img.end(),
                    pixels.begin() + i * params.config.input_dim);
        }
        images.push_back(tape.leaf({config.batch, params.config.input_dim},
                                   std::move(pixels)));
      }
      transceiver::ForwardResult fwd = transceiver::forward_pass(
          tape, images, bound, params,
          std::span<const channel::ChannelRealization>(&realization, 1),
          noise_rng);
      for (std::size_t k = 0; k < users; ++k) {
        std::span<const double> in = images[k].value();
        std::span<const double> out = fwd.decoded[k].value();
        double acc = 0.0;
        for (std::size_t i = 0; i < config.batch; ++i) {
          acc += ssim(in.subspan(i * params.config.input_dim,
                                 params.config.input_dim),
                      out.subspan(i * params.config.input_dim,
                                  params.config.input_dim));
        }
        trial_means[si][t][k] = acc / static_cast<double>(config.batch);
      }
    }
  }

  EvalReport report;
  report.variant = params.variant;
  report.seed = config.seed;
  report.per_user.resize(users);
  for (std::size_t k = 0; k < users; ++k) {
    for (std::size_t si = 0; si < config.snr_db.size(); ++si) {
      double mean = 0.0;
      for (std::size_t t = 0; t < config.trials; ++t) {
        mean += trial_means[si][t][k];
      }
      mean /= static_cast<double>(config.trials);
      double var = 0.0;
      for (std::size_t t = 0; t < config.trials; ++t) {
        const double d = trial_means[si][t][k] - mean;
        var += d * d;
      }
      var /= static_cast<double>(config.trials);
      report.per_user[k].push_back(SnrPoint{config.snr_db[si], mean,
                                            std::sqrt(var), config.trials});
    }
  }
  return report;
}

void write_eval_csv(const EvalReport& report, std::ostream& os) {
  os << "variant,user,snr_db,mean_ssim,std_ssim,trials,seed\n";
  for (std::size_t k = 0; k < report.per_user.size(); ++k) {
    for (const SnrPoint& p : report.per_user[k]) {
      os << transceiver::variant_name(report.variant) << "," << k + 1 << ","
         << csvfmt::number(p.snr_db) << "," << csvfmt::number(p.mean_ssim)
         << "," << csvfmt::number(p.std_ssim) << "," << p.trials << ","
         << report.seed << "\n";
    }
  }
}

}  // namespace irsc::metrics
