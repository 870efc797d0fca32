#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedfim/config.hpp"
#include "fedfim/data.hpp"
#include "fedfim/federation.hpp"

namespace fedfim {

/// Process exit codes of the CLI.
namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kConfig = 2;
inline constexpr int kNumeric = 3;
inline constexpr int kIo = 4;
}  // namespace exit_code

/// Maps an exception to one of the exit codes above.
int exit_code_for(const std::exception& e) noexcept;

/// One CSV row per evaluation point. Column order is fixed:
/// run_id,seed,scheme,optimizer,round,train_loss,eval_accuracy,
/// comm_scalars_cum,curvature_min,curvature_max,skips,elapsed_ms
struct MetricsRow {
  std::string run_id;
  std::uint64_t seed = 0;
  std::string scheme;
  std::string optimizer;
  std::size_t round = 0;
  double train_loss = 0.0;
  double eval_accuracy = 0.0;
  std::uint64_t comm_scalars_cum = 0;
  double curvature_min = 0.0;
  double curvature_max = 0.0;
  std::size_t skips = 0;
  double elapsed_ms = 0.0;
};

std::string metrics_csv_header();
/// Doubles are printed with %.17g so identical runs give identical bytes.
std::string format_metrics_row(const MetricsRow& row);

struct LoadedData {
  Dataset train;
  Dataset test;
};

/// Loads or generates the train/test pair described by the config.
LoadedData load_data(const ExperimentConfig& cfg, std::uint64_t run_seed);

/// Partition plus optional shared subset for a loaded training set.
ExperimentInputs build_inputs(const ExperimentConfig& cfg, const LoadedData& data, std::uint64_t run_seed);

/// Optimizer column value: fedavg's fed.optimizer, or "ova-average" /
/// "ova-fim-lbfgs" for fedova.
std::string optimizer_label(const ExperimentConfig& cfg);

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<RoundReport> reports;
};

/// Runs one seed of the configured experiment.
SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed);

std::vector<MetricsRow> to_metrics_rows(const ExperimentConfig& cfg, const SeedResult& result);

/// First evaluated round that starts a streak of `patience` consecutive
/// evaluations with accuracy >= target.
std::optional<std::size_t> convergence_round(std::span<const RoundReport> rows, double target_accuracy,
                                             std::size_t patience = 3);

/// First evaluated round whose training loss is <= target_loss.
std::optional<std::size_t> rounds_to_loss(std::span<const RoundReport> rows, double target_loss);

/// Mean accuracy of the last `window` evaluations, excluding the round-0
/// evaluation unless it is the only one.
double final_accuracy(std::span<const RoundReport> rows, std::size_t window = 20);

/// Training loss recorded at `round`, if that round was evaluated.
std::optional<double> loss_at_round(std::span<const RoundReport> rows, std::size_t round);

struct RunSummary {
  std::filesystem::path directory;
  double final_accuracy_mean = 0.0;
  std::optional<double> convergence_round_mean;
  double comm_scalars_mean = 0.0;  // cumulative scalars, averaged over seeds
  std::vector<SeedResult> seeds;
};

/// Output root: FEDFIM_OUTPUT_DIR when set, else cfg.output_dir.
std::filesystem::path output_root(const ExperimentConfig& cfg);

/// Runs every seed, writing <root>/<name>/metrics.csv,
/// effective_config.json and summary.txt. Prints the summary line to `log`.
RunSummary run(const ExperimentConfig& cfg, std::ostream& log);

/// One line of a comparison table.
struct CompareRow {
  std::string label;
  std::vector<std::string> overrides;  // key=value
};

struct TableSpec {
  std::string title = "comparison";
  ExperimentConfig base;
  std::vector<CompareRow> rows;
  std::optional<double> target_accuracy;  // convergence round column
};

struct CompareResult {
  std::string label;
  ExperimentConfig config;
  double final_accuracy_mean = 0.0;
  double final_accuracy_sd = 0.0;
  std::optional<double> convergence_round_mean;
  std::size_t converged_seeds = 0;
  double final_loss_mean = 0.0;
  double comm_scalars_mean = 0.0;
  std::vector<SeedResult> seeds;
};

/// JSON: {"title": ..., "base": {config}, "target_accuracy": 0.8,
///        "rows": [{"label": ..., "set": {"key": value, ...}}]}
TableSpec parse_table_spec_text(std::string_view text);
TableSpec parse_table_spec_file(const std::filesystem::path& path);

/// Runs every row over its seed sweep, in the configured order.
std::vector<CompareResult> compare(const TableSpec& spec);

std::string format_compare_table(const TableSpec& spec, std::span<const CompareResult> results);
std::string format_compare_csv(std::span<const CompareResult> results);

/// compare() plus writing <root>/<title>/compare.csv and compare.txt.
std::vector<CompareResult> compare_and_write(const TableSpec& spec, std::ostream& log);

}  // namespace fedfim
