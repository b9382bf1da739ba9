// irsc: trains and evaluates neural transceivers for image transmission
// over multi-user MIMO interference channels.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "irsc/experiment.hpp"
#include "irsc/fetch.hpp"
#include "irsc/gradcheck.hpp"

namespace {

struct GlobalOpts {
  std::string config_path;
  std::string preset = "desk";
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::size_t threads = 0;
};

irsc::harness::ExperimentConfig load_config(const GlobalOpts& opts) {
  auto config = irsc::harness::ExperimentConfig::load(opts.config_path,
                                                      opts.preset);
  if (opts.seed_set) config.seed = opts.seed;
  if (!opts.out_dir.empty()) config.out_dir = opts.out_dir;
  if (opts.threads > 0) config.threads = opts.threads;
  return config;
}

void add_global_opts(CLI::App* cmd, GlobalOpts& opts) {
  cmd->add_option("--config", opts.config_path, "Experiment config file")
      ->check(CLI::ExistingFile);
  cmd->add_option("--preset", opts.preset, "Base preset: desk or paper")
      ->check(CLI::IsMember({"desk", "paper"}));
  cmd->add_option("--seed", opts.seed, "Master seed")
      ->each([&opts](const std::string&) { opts.seed_set = true; });
  cmd->add_option("--out", opts.out_dir, "Output directory");
  cmd->add_option("--threads", opts.threads, "Worker thread cap");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic transceivers over MIMO interference channels"};
  app.require_subcommand(1);
  GlobalOpts opts;

  auto* train = app.add_subcommand(
      "train", "Train the configured variants and evaluate the SNR curves");
  add_global_opts(train, opts);
  bool retrain = false;
  train->add_flag("--retrain", retrain,
                  "Ignore existing checkpoints and train from scratch");

  auto* evaluate = app.add_subcommand(
      "evaluate", "Re-evaluate checkpoints in the output directory");
  add_global_opts(evaluate, opts);

  auto* sweep = app.add_subcommand(
      "sweep-users", "Train csir/csitr for each K and record averaged SSIM");
  add_global_opts(sweep, opts);
  std::vector<std::size_t> k_list{2, 3, 4};
  sweep->add_option("--k-list", k_list, "User counts to sweep");

  auto* reconstruct = app.add_subcommand(
      "reconstruct", "Dump original/reconstruction PGM pairs");
  add_global_opts(reconstruct, opts);
  std::string checkpoint;
  std::vector<std::size_t> indices{0, 1, 2, 3};
  double recon_snr = 0.0;
  reconstruct->add_option("--checkpoint", checkpoint, "Checkpoint file")
      ->required()
      ->check(CLI::ExistingFile);
  reconstruct->add_option("--indices", indices, "Eval-set sample indices");
  reconstruct->add_option("--snr", recon_snr, "Test SNR in dB");

  auto* fetch = app.add_subcommand(
      "fetch-data", "Download the standard image archives");
  add_global_opts(fetch, opts);
  std::string dataset = "mnist";
  std::string url_override;
  std::string sha_override;
  std::string dest_dir = "data/full";
  fetch->add_option("--dataset", dataset, "mnist or fashion")
      ->check(CLI::IsMember({"mnist", "fashion"}));
  fetch->add_option("--url", url_override,
                    "Mirror override for the train archive");
  fetch->add_option("--sha256", sha_override,
                    "Expected digest of the train archive");
  fetch->add_option("--dest", dest_dir, "Destination directory");

  auto* gradcheck = app.add_subcommand(
      "gradcheck", "Finite-difference health check of every gradient path");
  std::uint64_t gc_seed = 12345;
  gradcheck->add_option("--seed", gc_seed, "Suite seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      auto dir = irsc::harness::run_experiment(load_config(opts), retrain);
      std::cout << "artifacts in " << dir << "\n";
    } else if (evaluate->parsed()) {
      irsc::harness::evaluate_checkpoints(load_config(opts));
    } else if (sweep->parsed()) {
      auto csv = irsc::harness::sweep_users(load_config(opts), k_list);
      std::cout << "sweep written to " << csv << "\n";
    } else if (reconstruct->parsed()) {
      auto cfg = load_config(opts);
      auto dir = irsc::harness::dump_reconstructions(
          cfg, checkpoint, indices, recon_snr,
          opts.seed_set ? opts.seed : cfg.seed);
      std::cout << "images in " << dir << "\n";
    } else if (fetch->parsed()) {
      auto mirror = irsc::data::default_mirror(dataset);
      const std::string train_url =
          url_override.empty() ? mirror.train_images_url : url_override;
      irsc::data::fetch({train_url, sha_override,
                         std::filesystem::path(dest_dir) / dataset /
                             "train-images-idx3-ubyte.gz"});
      irsc::data::fetch({mirror.test_images_url, "",
                         std::filesystem::path(dest_dir) / dataset /
                             "t10k-images-idx3-ubyte.gz"});
      std::cout << "fetched " << dataset << " into " << dest_dir << "\n";
    } else if (gradcheck->parsed()) {
      auto results = irsc::gradcheck::run_gradient_suite(gc_seed);
      for (const auto& r : results) {
        std::printf("%-24s max rel err %.3e  %s\n", r.name.c_str(),
                    r.max_rel_err, r.pass ? "ok" : "FAIL");
      }
      return irsc::gradcheck::all_passed(results) ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "irsc: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
