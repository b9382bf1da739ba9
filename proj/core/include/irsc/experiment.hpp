#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "irsc/config.hpp"

namespace irsc::harness {

// Trains every configured variant (reusing an existing checkpoint unless
// `retrain`), evaluates it over the test SNR list, and writes per-variant
// artifacts plus a manifest into the output directory:
//   checkpoint_<variant>.ckpt, train_log_<variant>.csv,
//   curves_<variant>.csv, manifest.json
// Returns the artifact directory.
std::filesystem::path run_experiment(const ExperimentConfig& config,
                                     bool retrain = false);

// Evaluation only: loads checkpoints from the output directory and rewrites
// the curve CSVs.
void evaluate_checkpoints(const ExperimentConfig& config);

// For each K, trains fresh csir and csitr models with every user on MNIST
// and records user-averaged SSIM at the configured test SNRs into
// sweep_users.csv (columns variant,users,snr_db,avg_ssim).
std::filesystem::path sweep_users(const ExperimentConfig& base,
                                  std::span<const std::size_t> k_list);

// Writes original/reconstruction PGM pairs for the given eval-set indices at
// one SNR: user<k>_sample<idx>_{original,recon}.pgm.
std::filesystem::path dump_reconstructions(
    const ExperimentConfig& config, const std::filesystem::path& checkpoint,
    std::span<const std::size_t> sample_indices, double snr_db,
    std::uint64_t seed);

}  // namespace irsc::harness
