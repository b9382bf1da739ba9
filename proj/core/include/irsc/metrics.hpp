#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "irsc/datasets.hpp"
#include "irsc/transceiver.hpp"

namespace irsc::metrics {

// Whole-image (single window) SSIM over [-1, 1] pixels, which are shifted
// to [0, L] with dynamic range L = 2 before the statistics. Mean, variance
// and covariance use the population (1/N) normalization.
struct SsimParams {
  double dynamic_range = 2.0;
  double c1() const { return (0.01 * dynamic_range) * (0.01 * dynamic_range); }
  double c2() const { return (0.03 * dynamic_range) * (0.03 * dynamic_range); }
};

double ssim(std::span<const double> s, std::span<const double> s_hat,
            const SsimParams& params = {});

struct SnrPoint {
  double snr_db = 0.0;
  double mean_ssim = 0.0;
  double std_ssim = 0.0;  // std of per-trial means
  std::size_t trials = 0;
};

struct EvalReport {
  transceiver::Variant variant;
  std::uint64_t seed = 0;
  std::string checkpoint_id;
  std::vector<std::vector<SnrPoint>> per_user;  // [user][snr point]

  double mean_at(std::size_t user, double snr_db) const;
  // SSIM averaged over every user at one SNR.
  double user_average_at(double snr_db) const;
};

struct EvalConfig {
  std::vector<double> snr_db = {0, 5, 10, 15, 20};
  std::size_t trials = 20;
  std::size_t batch = 256;  // images per trial per user
  std::uint64_t seed = 1;
  std::size_t threads = 0;  // 0 = library default
};

// Monte-Carlo evaluation: each trial draws one channel realization, one test
// batch per user and one noise stream, all derived from the trial index so
// the same draws recur at every SNR point (common random numbers). Fresh
// noise is scaled to the SNR under test.
EvalReport evaluate(const transceiver::TransceiverParams& params,
                    std::span<const data::ImageSet> test_sets,
                    const EvalConfig& config);

// CSV: variant,user,snr_db,mean_ssim,std_ssim,trials,seed
void write_eval_csv(const EvalReport& report, std::ostream& os);

}  // namespace irsc::metrics
