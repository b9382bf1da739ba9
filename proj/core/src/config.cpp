#include "irsc/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace irsc::harness {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

// Strips a trailing comment that is not inside a string literal.
std::string strip_comment(const std::string& line) {
  bool in_str = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_str = !in_str;
    if (line[i] == '#' && !in_str) return line.substr(0, i);
  }
  return line;
}

ConfigValue parse_scalar(const std::string& raw, int line_no) {
  ConfigValue v;
  const std::string s = trim(raw);
  if (s.empty()) {
    throw std::runtime_error("config line " + std::to_string(line_no) +
                             ": empty value");
  }
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"') {
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": unterminated string");
    }
    v.kind = ConfigValue::Kind::string;
    v.str = s.substr(1, s.size() - 2);
    return v;
  }
  if (s == "true" || s == "false") {
    v.kind = ConfigValue::Kind::boolean;
    v.b = s == "true";
    return v;
  }
  char* end = nullptr;
  v.num = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') {
    throw std::runtime_error("config line " + std::to_string(line_no) +
                             ": cannot parse value '" + s + "'");
  }
  v.kind = ConfigValue::Kind::number;
  return v;
}

ConfigValue parse_value(const std::string& raw, int line_no) {
  const std::string s = trim(raw);
  if (!s.empty() && s.front() == '[') {
    if (s.back() != ']') {
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": arrays must close on the same line");
    }
    ConfigValue v;
    v.kind = ConfigValue::Kind::array;
    std::string body = s.substr(1, s.size() - 2);
    std::string item;
    bool in_str = false;
    for (char c : body) {
      if (c == '"') in_str = !in_str;
      if (c == ',' && !in_str) {
        if (!trim(item).empty()) v.items.push_back(parse_scalar(item, line_no));
        item.clear();
      } else {
        item.push_back(c);
      }
    }
    if (!trim(item).empty()) v.items.push_back(parse_scalar(item, line_no));
    return v;
  }
  return parse_scalar(s, line_no);
}

}  // namespace

ConfigTable parse_config(const std::string& text) {
  ConfigTable table;
  std::istringstream is(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw std::runtime_error("config line " + std::to_string(line_no) +
                                 ": malformed section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) {
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": empty key");
    }
    const std::string full = section.empty() ? key : section + "." + key;
    table[full] = parse_value(line.substr(eq + 1), line_no);
  }
  return table;
}

ConfigTable parse_config_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

namespace {

[[noreturn]] void field_error(const std::string& field, const std::string& msg) {
  throw std::invalid_argument("config field " + field + ": " + msg);
}

double want_number(const ConfigTable& t, const std::string& key, double fallback) {
  auto it = t.find(key);
  if (it == t.end()) return fallback;
  if (it->second.kind != ConfigValue::Kind::number) {
    field_error(key, "expected a number");
  }
  return it->second.num;
}

std::size_t want_count(const ConfigTable& t, const std::string& key,
                       std::size_t fallback) {
  const double v =
      want_number(t, key, static_cast<double>(fallback));
  if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v))) {
    field_error(key, "expected a nonnegative integer");
  }
  return static_cast<std::size_t>(v);
}

bool want_bool(const ConfigTable& t, const std::string& key, bool fallback) {
  auto it = t.find(key);
  if (it == t.end()) return fallback;
  if (it->second.kind != ConfigValue::Kind::boolean) {
    field_error(key, "expected true or false");
  }
  return it->second.b;
}

std::string want_string(const ConfigTable& t, const std::string& key,
                        const std::string& fallback) {
  auto it = t.find(key);
  if (it == t.end()) return fallback;
  if (it->second.kind != ConfigValue::Kind::string) {
    field_error(key, "expected a string");
  }
  return it->second.str;
}

}  // namespace

ExperimentConfig ExperimentConfig::preset_desk() {
  ExperimentConfig c;
  c.preset = "desk";
  c.variants = {transceiver::Variant::csir, transceiver::Variant::csitr,
                transceiver::Variant::csi_free,
                transceiver::Variant::interference_free,
                transceiver::Variant::semi_conventional};
  c.epochs = 20;
  c.batch_size = 128;
  c.train_images_cap = 10000;
  c.eval.snr_db = {0, 5, 10, 15, 20};
  c.eval.trials = 20;
  c.eval.batch = 256;
  c.data_dir = "data/desk";
  c.dataset_files = {
      {"mnist_train", "mnist-train-images-idx3-ubyte.gz"},
      {"mnist_eval", "mnist-eval-images-idx3-ubyte.gz"},
      {"fashion_train", "fashion-train-images-idx3-ubyte.gz"},
      {"fashion_eval", "fashion-eval-images-idx3-ubyte.gz"},
  };
  return c;
}

ExperimentConfig ExperimentConfig::preset_paper() {
  ExperimentConfig c = preset_desk();
  c.preset = "paper";
  c.epochs = 200;
  c.train_images_cap = 0;  // 60k
  c.eval.trials = 100;
  c.data_dir = "data/full";
  c.dataset_files = {
      {"mnist_train", "mnist/train-images-idx3-ubyte.gz"},
      {"mnist_eval", "mnist/t10k-images-idx3-ubyte.gz"},
      {"fashion_train", "fashion/train-images-idx3-ubyte.gz"},
      {"fashion_eval", "fashion/t10k-images-idx3-ubyte.gz"},
  };
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& config_file,
                                        const std::string& preset_name) {
  ExperimentConfig c;
  if (preset_name == "desk") {
    c = preset_desk();
  } else if (preset_name == "paper") {
    c = preset_paper();
  } else {
    field_error("preset", "unknown preset '" + preset_name + "'");
  }
  if (!config_file.empty()) {
    c.apply_table(parse_config_file(config_file));
  }
  return c;
}

void ExperimentConfig::apply_table(const ConfigTable& t) {
  if (auto it = t.find("experiment.variants"); it != t.end()) {
    if (it->second.kind != ConfigValue::Kind::array) {
      field_error("experiment.variants", "expected an array of strings");
    }
    variants.clear();
    for (const ConfigValue& v : it->second.items) {
      if (v.kind != ConfigValue::Kind::string) {
        field_error("experiment.variants", "expected strings");
      }
      variants.push_back(transceiver::variant_from_name(v.str));
    }
  }
  model.users = want_count(t, "experiment.users", model.users);
  seed = want_count(t, "experiment.seed", seed);
  threads = want_count(t, "experiment.threads", threads);
  out_dir = want_string(t, "experiment.out_dir", out_dir.string());

  model.tx_antennas = want_count(t, "model.tx_antennas", model.tx_antennas);
  model.rx_antennas = want_count(t, "model.rx_antennas", model.rx_antennas);
  model.symbols = want_count(t, "model.symbols", model.symbols);
  model.input_dim = want_count(t, "model.input_dim", model.input_dim);
  model.hidden_dim = want_count(t, "model.hidden_dim", model.hidden_dim);
  model.power = want_number(t, "model.power", model.power);
  model.precoder_iterations =
      want_count(t, "model.precoder_iterations", model.precoder_iterations);
  model.standardize_csi =
      want_bool(t, "model.standardize_csi", model.standardize_csi);

  epochs = want_count(t, "train.epochs", epochs);
  batch_size = want_count(t, "train.batch_size", batch_size);
  adam.learning_rate = want_number(t, "train.learning_rate", adam.learning_rate);
  adam.beta1 = want_number(t, "train.beta1", adam.beta1);
  adam.beta2 = want_number(t, "train.beta2", adam.beta2);
  adam.epsilon = want_number(t, "train.epsilon", adam.epsilon);
  weights_per_batch =
      want_bool(t, "train.weights_per_batch", weights_per_batch);
  train_images_cap =
      want_count(t, "train.train_images", train_images_cap);
  const std::string policy = want_string(
      t, "train.snr_policy",
      train_snr.kind == training::SnrPolicy::Kind::fixed ? "fixed" : "uniform");
  if (policy == "fixed") {
    train_snr = training::SnrPolicy::fixed(
        want_number(t, "train.snr_fixed_db", train_snr.fixed_db));
  } else if (policy == "uniform") {
    train_snr = training::SnrPolicy::uniform_range(
        want_number(t, "train.snr_low_db", train_snr.low_db),
        want_number(t, "train.snr_high_db", train_snr.high_db));
  } else {
    field_error("train.snr_policy", "expected 'fixed' or 'uniform'");
  }

  if (auto it = t.find("eval.snr_db"); it != t.end()) {
    if (it->second.kind != ConfigValue::Kind::array) {
      field_error("eval.snr_db", "expected an array of numbers");
    }
    eval.snr_db.clear();
    for (const ConfigValue& v : it->second.items) {
      if (v.kind != ConfigValue::Kind::number) {
        field_error("eval.snr_db", "expected numbers");
      }
      eval.snr_db.push_back(v.num);
    }
  }
  eval.trials = want_count(t, "eval.trials", eval.trials);
  eval.batch = want_count(t, "eval.batch", eval.batch);

  data_dir = want_string(t, "data.dir", data_dir.string());
  if (auto it = t.find("data.user_datasets"); it != t.end()) {
    if (it->second.kind != ConfigValue::Kind::array) {
      field_error("data.user_datasets", "expected an array of strings");
    }
    user_datasets.clear();
    for (const ConfigValue& v : it->second.items) {
      if (v.kind != ConfigValue::Kind::string) {
        field_error("data.user_datasets", "expected strings");
      }
      user_datasets.push_back(v.str);
    }
  }
  for (const char* key : {"mnist_train", "mnist_eval", "fashion_train",
                          "fashion_eval"}) {
    dataset_files[key] =
        want_string(t, std::string("data.") + key, dataset_files[key]);
  }
}

std::string ExperimentConfig::dataset_tag(std::size_t user) const {
  if (user_datasets.empty()) field_error("data.user_datasets", "empty");
  return user_datasets[user % user_datasets.size()];
}

std::filesystem::path ExperimentConfig::train_path(std::size_t user) const {
  return data_dir / dataset_files.at(dataset_tag(user) + "_train");
}

std::filesystem::path ExperimentConfig::eval_path(std::size_t user) const {
  return data_dir / dataset_files.at(dataset_tag(user) + "_eval");
}

void ExperimentConfig::validate() const {
  if (variants.empty()) field_error("experiment.variants", "must be nonempty");
  if (model.users < 1) field_error("experiment.users", "must be >= 1");
  if (model.tx_antennas < 1) field_error("model.tx_antennas", "must be >= 1");
  if (model.rx_antennas < 1) field_error("model.rx_antennas", "must be >= 1");
  if (model.symbols < 1) field_error("model.symbols", "must be >= 1");
  if (model.input_dim < 1) field_error("model.input_dim", "must be >= 1");
  if (model.hidden_dim < 1) field_error("model.hidden_dim", "must be >= 1");
  if (model.power <= 0) field_error("model.power", "must be > 0");
  if (epochs < 1) field_error("train.epochs", "must be >= 1");
  if (batch_size < 1) field_error("train.batch_size", "must be >= 1");
  if (adam.learning_rate <= 0) {
    field_error("train.learning_rate", "must be > 0");
  }
  if (adam.beta1 < 0 || adam.beta1 >= 1) {
    field_error("train.beta1", "must be in [0, 1)");
  }
  if (adam.beta2 < 0 || adam.beta2 >= 1) {
    field_error("train.beta2", "must be in [0, 1)");
  }
  if (adam.epsilon <= 0) field_error("train.epsilon", "must be > 0");
  if (train_snr.kind == training::SnrPolicy::Kind::uniform &&
      train_snr.low_db > train_snr.high_db) {
    field_error("train.snr_low_db", "must not exceed train.snr_high_db");
  }
  if (eval.snr_db.empty()) field_error("eval.snr_db", "must be nonempty");
  if (eval.trials < 1) field_error("eval.trials", "must be >= 1");
  if (eval.batch < 1) field_error("eval.batch", "must be >= 1");
  for (const std::string& tag : user_datasets) {
    if (tag != "mnist" && tag != "fashion") {
      field_error("data.user_datasets",
                  "unknown dataset '" + tag + "' (want mnist or fashion)");
    }
  }
  for (const transceiver::Variant v : variants) {
    if (v == transceiver::Variant::semi_conventional &&
        model.tx_antennas < model.rx_antennas) {
      field_error("model.tx_antennas",
                  "semi_conventional needs tx_antennas >= rx_antennas");
    }
  }
  // The CSI vector length 2 K^2 Nt Nr and the symbol row width 2 Nt NB are
  // derived quantities; anything inconsistent would have to come from a
  // checkpoint, which carries its own header validation.
}

}  // namespace irsc::harness
