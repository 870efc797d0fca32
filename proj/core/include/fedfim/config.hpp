#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fedfim/data.hpp"
#include "fedfim/federation.hpp"
#include "fedfim/fedova.hpp"
#include "fedfim/model.hpp"

namespace fedfim {

enum class Scheme { FedAvg, FedOva };
enum class DataSource { Synth, Idx, Csv };

std::string_view to_string(Scheme s) noexcept;
std::string_view to_string(DataSource s) noexcept;

/// Everything needed to reproduce a run. Keys are flat dotted paths; see
/// config_keys() for the schema with defaults.
struct ExperimentConfig {
  std::string name = "experiment";
  Scheme scheme = Scheme::FedAvg;

  DataSource source = DataSource::Synth;
  std::size_t synth_train = 2000;
  std::size_t synth_test = 1000;
  std::size_t synth_dim = 20;
  std::size_t synth_classes = 10;
  double synth_margin = 5.0;
  /// Seed for data generation and partitioning; absent means "use the run seed".
  std::optional<std::uint64_t> data_seed;
  std::string idx_train_images, idx_train_labels, idx_test_images, idx_test_labels;
  std::string csv_train, csv_test, csv_label_column = "label";

  /// "auto": softmax-regression for fedavg, binary-logistic for fedova.
  std::string model_kind = "auto";
  std::size_t hidden_dim = 32;

  std::size_t num_clients = 100;  // K
  RoundConfig round;

  PartitionScheme partition = PartitionScheme::Iid;
  std::size_t labels_per_client = 2;  // l
  double share_beta = 0.0;  // 0 disables the data-sharing baseline

  OvaUpdate ova_update = OvaUpdate::Average;
  bool ova_balanced = false;

  std::size_t eval_every = 1;
  std::optional<double> target_accuracy;
  double target_tolerance = 0.0;
  std::size_t patience = 3;

  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "runs";

  /// Resolved architecture for a dataset of `input_dim` features and
  /// `num_classes` classes.
  ModelSpec model_spec(std::size_t input_dim, std::size_t num_classes) const;
  std::uint64_t effective_data_seed(std::uint64_t run_seed) const noexcept { return data_seed.value_or(run_seed); }
};

struct ConfigKeyInfo {
  std::string key;
  std::string type;
  std::string default_value;
  std::string description;
};

/// Schema of every accepted key, in documentation order.
const std::vector<ConfigKeyInfo>& config_keys();

/// Parses JSON text. Nested objects are flattened into dotted keys, so
/// {"fed": {"rounds": 5}} and {"fed.rounds": 5} are equivalent. Unknown
/// keys, type errors and constraint violations throw ConfigError naming the
/// key.
ExperimentConfig parse_config_text(std::string_view text, bool validate = true);
ExperimentConfig parse_config_file(const std::filesystem::path& path);

/// Applies one "key=value" override; the value is read as JSON when it
/// parses, otherwise as a string.
void apply_override(ExperimentConfig& cfg, std::string_view assignment);

/// Cross-field checks. Called by the parsers and again after overrides.
void validate_config(const ExperimentConfig& cfg);

/// Flat JSON object with every key, including defaults, pretty-printed.
std::string effective_config_json(const ExperimentConfig& cfg);

/// Closest known key by edit distance, if reasonably close.
std::optional<std::string> suggest_key(std::string_view unknown);

}  // namespace fedfim
