#include "irsc/experiment.hpp"

#include <omp.h>

#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "irsc/channel.hpp"
#include "irsc/fetch.hpp"
#include "irsc/pgm.hpp"
#include "csvfmt.hpp"

namespace irsc::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

data::ImageSet load_train_set(const ExperimentConfig& config,
                              std::size_t user) {
  data::ImageSet set = data::load_idx_images(config.train_path(user));
  if (config.train_images_cap > 0 && config.train_images_cap < set.count) {
    set = set.head(config.train_images_cap);
  }
  return set;
}

training::TrainConfig make_train_config(const ExperimentConfig& config,
                                        transceiver::Variant variant) {
  training::TrainConfig tc;
  tc.variant = variant;
  tc.model = config.model;
  tc.epochs = config.epochs;
  tc.batch_size = config.batch_size;
  tc.adam = config.adam;
  tc.train_snr = config.train_snr;
  tc.master_seed = config.seed;
  tc.weights_per_batch = config.weights_per_batch;
  return tc;
}

json config_json(const ExperimentConfig& c) {
  json j;
  j["preset"] = c.preset;
  json names = json::array();
  for (auto v : c.variants) names.push_back(transceiver::variant_name(v));
  j["variants"] = names;
  j["users"] = c.model.users;
  j["model"] = {{"tx_antennas", c.model.tx_antennas},
                {"rx_antennas", c.model.rx_antennas},
                {"symbols", c.model.symbols},
                {"input_dim", c.model.input_dim},
                {"hidden_dim", c.model.hidden_dim},
                {"power", c.model.power},
                {"precoder_iterations", c.model.precoder_iterations},
                {"standardize_csi", c.model.standardize_csi}};
  j["train"] = {{"epochs", c.epochs},
                {"batch_size", c.batch_size},
                {"learning_rate", c.adam.learning_rate},
                {"beta1", c.adam.beta1},
                {"beta2", c.adam.beta2},
                {"epsilon", c.adam.epsilon},
                {"weights_per_batch", c.weights_per_batch},
                {"train_images", c.train_images_cap},
                {"snr_policy",
                 c.train_snr.kind == training::SnrPolicy::Kind::fixed
                     ? "fixed"
                     : "uniform"},
                {"snr_fixed_db", c.train_snr.fixed_db},
                {"snr_low_db", c.train_snr.low_db},
                {"snr_high_db", c.train_snr.high_db}};
  j["eval"] = {{"snr_db", c.eval.snr_db},
               {"trials", c.eval.trials},
               {"batch", c.eval.batch}};
  json users = json::array();
  for (std::size_t k = 0; k < c.model.users; ++k) {
    users.push_back(c.dataset_tag(k));
  }
  j["data"] = {{"dir", c.data_dir.string()}, {"user_datasets", users}};
  j["seed"] = c.seed;
  return j;
}

void write_manifest(const ExperimentConfig& config, const fs::path& dir,
                    const std::vector<std::string>& artifact_names) {
  json manifest;
  manifest["tool"] = "irsc";
  manifest["version"] = "0.1.0";
  json cfg = config_json(config);
  manifest["config"] = cfg;
  manifest["config_sha256"] = data::sha256_string(cfg.dump());
  json datasets = json::object();
  for (std::size_t k = 0; k < config.model.users; ++k) {
    for (const fs::path& p :
         {config.train_path(k), config.eval_path(k)}) {
      if (fs::exists(p)) datasets[p.string()] = data::sha256_file(p);
    }
  }
  manifest["datasets"] = datasets;
  manifest["artifacts"] = artifact_names;
  std::ofstream os(dir / "manifest.json");
  os << manifest.dump(2) << "\n";
}

void apply_thread_limit(const ExperimentConfig& config) {
  if (config.threads > 0) {
    omp_set_num_threads(static_cast<int>(config.threads));
  }
}

metrics::EvalConfig make_eval_config(const ExperimentConfig& config) {
  metrics::EvalConfig ec = config.eval;
  ec.seed = config.seed;
  ec.threads = config.threads;
  return ec;
}

}  // namespace

fs::path run_experiment(const ExperimentConfig& config, bool retrain) {
  config.validate();
  apply_thread_limit(config);
  fs::create_directories(config.out_dir);

  std::vector<data::ImageSet> train_sets;
  std::vector<data::ImageSet> eval_sets;
  for (std::size_t k = 0; k < config.model.users; ++k) {
    train_sets.push_back(load_train_set(config, k));
    eval_sets.push_back(data::load_idx_images(config.eval_path(k)));
  }

  std::vector<std::string> artifacts;
  for (transceiver::Variant variant : config.variants) {
    const std::string name{transceiver::variant_name(variant)};
    const fs::path ckpt = config.out_dir / ("checkpoint_" + name + ".ckpt");
    const fs::path log = config.out_dir / ("train_log_" + name + ".csv");
    const fs::path curves = config.out_dir / ("curves_" + name + ".csv");

    transceiver::TransceiverParams params;
    if (!retrain && fs::exists(ckpt)) {
      std::cout << "[irsc] " << name << ": reusing " << ckpt << "\n";
      params = transceiver::load_checkpoint(ckpt);
    } else {
      std::cout << "[irsc] training " << name << " (" << config.epochs
                << " epochs)\n";
      std::ofstream log_os(log);
      training::TrainResult result = training::train(
          make_train_config(config, variant), train_sets, {}, &log_os);
      params = std::move(result.params);
      transceiver::save_checkpoint(params, ckpt);
      artifacts.push_back(log.filename().string());
    }

    metrics::EvalReport report =
        metrics::evaluate(params, eval_sets, make_eval_config(config));
    report.checkpoint_id = ckpt.filename().string();
    std::ofstream curve_os(curves);
    metrics::write_eval_csv(report, curve_os);
    artifacts.push_back(ckpt.filename().string());
    artifacts.push_back(curves.filename().string());
    std::cout << "[irsc] " << name << ": mean SSIM at "
              << csvfmt::number(config.eval.snr_db.back()) << " dB = "
              << csvfmt::number(
                     report.user_average_at(config.eval.snr_db.back()))
              << "\n";
  }
  write_manifest(config, config.out_dir, artifacts);
  return config.out_dir;
}

void evaluate_checkpoints(const ExperimentConfig& config) {
  config.validate();
  apply_thread_limit(config);
  std::vector<data::ImageSet> eval_sets;
  for (std::size_t k = 0; k < config.model.users; ++k) {
    eval_sets.push_back(data::load_idx_images(config.eval_path(k)));
  }
  for (transceiver::Variant variant : config.variants) {
    const std::string name{transceiver::variant_name(variant)};
    const fs::path ckpt = config.out_dir / ("checkpoint_" + name + ".ckpt");
    transceiver::TransceiverParams params = transceiver::load_checkpoint(ckpt);
    metrics::EvalReport report =
        metrics::evaluate(params, eval_sets, make_eval_config(config));
    report.checkpoint_id = ckpt.filename().string();
    std::ofstream os(config.out_dir / ("curves_" + name + ".csv"));
    metrics::write_eval_csv(report, os);
  }
}

fs::path sweep_users(const ExperimentConfig& base,
                     std::span<const std::size_t> k_list) {
  if (k_list.empty()) {
    throw std::invalid_argument("sweep_users: K list must be nonempty");
  }
  ExperimentConfig config = base;
  config.user_datasets = {"mnist"};  // every user transmits MNIST
  config.variants = {transceiver::Variant::csir, transceiver::Variant::csitr};
  config.validate();
  apply_thread_limit(config);
  fs::create_directories(config.out_dir);

  std::ofstream csv(config.out_dir / "sweep_users.csv");
  csv << "variant,users,snr_db,avg_ssim\n";
  for (std::size_t users : k_list) {
    ExperimentConfig run = config;
    run.model.users = users;
    run.out_dir = config.out_dir / ("sweep_k" + std::to_string(users));
    fs::create_directories(run.out_dir);
    run.validate();

    std::vector<data::ImageSet> train_sets;
    std::vector<data::ImageSet> eval_sets;
    for (std::size_t k = 0; k < users; ++k) {
      train_sets.push_back(load_train_set(run, k));
      eval_sets.push_back(data::load_idx_images(run.eval_path(k)));
    }
    for (transceiver::Variant variant : run.variants) {
      const std::string name{transceiver::variant_name(variant)};
      std::cout << "[irsc] sweep K=" << users << " training " << name << "\n";
      std::ofstream log_os(run.out_dir / ("train_log_" + name + ".csv"));
      training::TrainResult result = training::train(
          make_train_config(run, variant), train_sets, {}, &log_os);
      transceiver::save_checkpoint(
          result.params, run.out_dir / ("checkpoint_" + name + ".ckpt"));
      metrics::EvalReport report =
          metrics::evaluate(result.params, eval_sets, make_eval_config(run));
      std::ofstream curve_os(run.out_dir / ("curves_" + name + ".csv"));
      metrics::write_eval_csv(report, curve_os);
      for (double snr : run.eval.snr_db) {
        csv << name << "," << users << "," << csvfmt::number(snr) << ","
            << csvfmt::number(report.user_average_at(snr)) << "\n";
      }
    }
  }
  write_manifest(config, config.out_dir, {"sweep_users.csv"});
  return config.out_dir / "sweep_users.csv";
}

fs::path dump_reconstructions(const ExperimentConfig& config,
                              const fs::path& checkpoint,
                              std::span<const std::size_t> sample_indices,
                              double snr_db, std::uint64_t seed) {
  transceiver::TransceiverParams params =
      transceiver::load_checkpoint(checkpoint);
  if (params.config.users != config.model.users) {
    throw std::runtime_error(
        "dump_reconstructions: checkpoint is for K=" +
        std::to_string(params.config.users) + ", config says K=" +
        std::to_string(config.model.users));
  }
  fs::create_directories(config.out_dir);
  std::vector<data::ImageSet> eval_sets;
  for (std::size_t k = 0; k < config.model.users; ++k) {
    eval_sets.push_back(data::load_idx_images(config.eval_path(k)));
  }
  for (std::size_t idx : sample_indices) {
    for (std::size_t k = 0; k < config.model.users; ++k) {
      if (idx >= eval_sets[k].count) {
        throw std::invalid_argument("dump_reconstructions: index " +
                                    std::to_string(idx) + " out of range");
      }
    }
  }

  const std::size_t users = config.model.users;
  const std::size_t batch = sample_indices.size();
  rng::Stream channel_rng(seed, "reconstruct-channel");
  rng::Stream noise_rng(seed, "reconstruct-noise");
  channel::ChannelRealization realization = channel::sample_channel(
      users, params.config.tx_antennas, params.config.rx_antennas,
      channel_rng);
  realization.noise_variance =
      channel::noise_variance_from_snr(snr_db, params.config.power);

  diff::Tape tape;
  transceiver::BoundParams bound = transceiver::bind_params(tape, params);
  std::vector<diff::Tensor> images;
  for (std::size_t k = 0; k < users; ++k) {
    std::vector<double> pixels(batch * params.config.input_dim);
    for (std::size_t i = 0; i < batch; ++i) {
      std::span<const double> img = eval_sets[k].image(sample_indices[i]);
      std::copy(img.begin(), img.end(),
                pixels.begin() + i * params.config.input_dim);
    }
    images.push_back(
        tape.leaf({batch, params.config.input_dim}, std::move(pixels)));
  }
  transceiver::ForwardResult fwd = transceiver::forward_pass(
      tape, images, bound, params,
      std::span<const channel::ChannelRealization>(&realization, 1),
      noise_rng);

  for (std::size_t k = 0; k < users; ++k) {
    for (std::size_t i = 0; i < batch; ++i) {
      const std::string stem = "user" + std::to_string(k + 1) + "_sample" +
                               std::to_string(sample_indices[i]);
      io::write_pgm(config.out_dir / (stem + "_original.pgm"),
                    images[k].value().subspan(i * params.config.input_dim,
                                              params.config.input_dim),
                    28, 28);
      io::write_pgm(config.out_dir / (stem + "_recon.pgm"),
                    fwd.decoded[k].value().subspan(i * params.config.input_dim,
                                                   params.config.input_dim),
                    28, 28);
    }
  }
  return config.out_dir;
}

}  // namespace irsc::harness
