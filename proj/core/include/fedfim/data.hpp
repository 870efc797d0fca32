#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedfim/model.hpp"
#include "fedfim/numerics.hpp"

namespace fedfim {

/// Per-column standardization and label vocabulary learned from a CSV
/// training file, reused when loading the matching test file.
struct CsvSchema {
  std::vector<std::string> feature_names;
  std::vector<double> mean;
  std::vector<double> sd;
  /// Original label spellings; class id = position.
  std::vector<std::string> label_values;
};

/// Labelled samples. Features are shared so relabelled views (one-vs-all)
/// do not copy the matrix.
struct Dataset {
  std::shared_ptr<const DenseMatrix> features;
  std::vector<int> labels;
  std::size_t num_classes = 0;
  std::string name;
  /// synth_logistic only: the generating weight matrix (classes x dim).
  std::optional<DenseMatrix> ground_truth;
  /// load_csv only.
  std::optional<CsvSchema> csv_schema;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t input_dim() const noexcept { return features ? features->cols() : 0; }
  SampleBatch batch() const { return SampleBatch(*features, labels); }
  SampleBatch batch(std::span<const std::size_t> rows) const { return SampleBatch(*features, labels, rows); }
  /// Per-class sample counts.
  std::vector<std::size_t> label_histogram() const;

  /// Throws FormatError on broken invariants.
  void validate() const;
};

enum class PartitionScheme { Iid, NonIidL };

/// Disjoint, covering assignment of sample indices to clients.
struct PartitionPlan {
  std::size_t num_clients = 0;
  PartitionScheme scheme = PartitionScheme::Iid;
  std::size_t labels_per_client = 0;  // non-IID-l only
  /// Sorted ascending within each client.
  std::vector<std::vector<std::size_t>> assignment;

  std::size_t total_assigned() const noexcept;
  double mean_client_size() const noexcept;
};

/// Parses an IDX image file (magic 0x00000803, unsigned bytes) and its
/// label file (magic 0x00000801). Pixels are scaled to [0, 1] and flattened
/// row-major; num_classes is max label + 1.
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

/// Numeric CSV with a header row. Features are standardized per column
/// (population sd, floored at 1e-12); labels are densified in sorted order of
/// their distinct values (numeric order when every value parses as a number).
/// When `reuse` is given, its statistics and label vocabulary are applied
/// instead of being learned.
Dataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                 const CsvSchema* reuse = nullptr);

/// Synthetic multinomial-logistic data. A ground-truth weight matrix with
/// N(0, 1) entries is drawn from (seed, kSynthTruth); features are N(0, 1)
/// drawn from (seed, stream_id). Labels are sampled from
/// softmax(margin * W x), or taken as argmax when margin is infinite.
Dataset synth_logistic(std::size_t num_samples, std::size_t dim, std::size_t num_classes, double margin,
                       std::uint64_t seed, std::uint64_t stream_id);

PartitionPlan partition_iid(const Dataset& dataset, std::size_t num_clients, std::uint64_t seed);

/// Groups samples by label, splits every group into (l*K)/n shards whose
/// sizes differ by at most one and gives each client l shards with distinct
/// labels. Clients are filled in random order, each taking shards from the
/// l label groups with the most shards left (ties broken by the seeded
/// stream).
PartitionPlan partition_noniid_l(const Dataset& dataset, std::size_t num_clients, std::size_t labels_per_client,
                                 std::uint64_t seed);

/// Indices of a uniform random subset of the whole training pool with
/// round(beta * mean client size) elements.
std::vector<std::size_t> share_subset(const Dataset& dataset, const PartitionPlan& plan, double beta,
                                      std::uint64_t seed);

/// Rows of `dataset` selected by `indices`, copied into a new dataset.
Dataset materialize(const Dataset& dataset, std::span<const std::size_t> indices);

/// Checks disjointness, coverage and non-emptiness; throws ConfigError
/// naming the first violation.
void verify_partition(const PartitionPlan& plan, std::size_t dataset_size);

}  // namespace fedfim
