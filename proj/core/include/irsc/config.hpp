#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "irsc/metrics.hpp"
#include "irsc/training.hpp"
#include "irsc/transceiver.hpp"

namespace irsc::harness {

// ---- Minimal TOML-compatible config reader ---------------------------------
// Supports [section] headers, key = value lines, # comments, and values of
// type string, number, boolean, or a single-line array of those.

struct ConfigValue {
  enum class Kind { boolean, number, string, array };
  Kind kind = Kind::number;
  bool b = false;
  double num = 0.0;
  std::string str;
  std::vector<ConfigValue> items;
};

// Keys are "section.key".
using ConfigTable = std::map<std::string, ConfigValue>;

ConfigTable parse_config(const std::string& text);
ConfigTable parse_config_file(const std::filesystem::path& path);

// ---- Experiment configuration ----------------------------------------------

struct ExperimentConfig {
  std::string preset = "desk";
  std::vector<transceiver::Variant> variants;
  transceiver::ModelConfig model;
  std::size_t epochs = 20;
  std::size_t batch_size = 128;
  diff::AdamConfig adam;
  training::SnrPolicy train_snr = training::SnrPolicy::uniform_range(0, 20);
  bool weights_per_batch = false;
  std::size_t train_images_cap = 10000;  // 0 = use the full training set
  metrics::EvalConfig eval;
  std::uint64_t seed = 1;
  std::size_t threads = 0;
  std::filesystem::path out_dir = "runs/out";
  std::filesystem::path data_dir = "data/desk";
  // Dataset tag per user ("mnist" or "fashion"); cycled when K exceeds it.
  std::vector<std::string> user_datasets = {"mnist", "fashion"};
  std::map<std::string, std::string> dataset_files;  // tag_train / tag_eval

  static ExperimentConfig preset_desk();
  static ExperimentConfig preset_paper();
  // Preset defaults overridden by the file (when non-empty).
  static ExperimentConfig load(const std::filesystem::path& config_file,
                               const std::string& preset_name);
  void apply_table(const ConfigTable& table);

  std::string dataset_tag(std::size_t user) const;
  std::filesystem::path train_path(std::size_t user) const;
  std::filesystem::path eval_path(std::size_t user) const;

  // Rejects dimensional or range inconsistencies; error messages carry the
  // config field path.
  void validate() const;
};

}  // namespace irsc::harness
