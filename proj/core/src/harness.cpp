#include "fedfim/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "fedfim/error.hpp"
#include "fedfim/fedova.hpp"
#include "json.hpp"

namespace fedfim {

namespace {

using json = nlohmann::json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_fixed(double v, int digits) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

RunOptions run_options(const ExperimentConfig& cfg) {
  RunOptions opts;
  opts.eval_every = cfg.eval_every;
  opts.target_accuracy = cfg.target_accuracy;
  opts.target_tolerance = cfg.target_tolerance;
  opts.patience = cfg.patience;
  return opts;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failure on " + path.string());
}

void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

std::string sanitize(std::string_view label) {
  std::string out;
  for (char c : label) {
    const bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    out.push_back(keep ? c : '_');
  }
  return out.empty() ? "row" : out;
}

double mean_of(std::span<const double> v) {
  return v.empty() ? std::nan("") : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

int exit_code_for(const std::exception& e) noexcept {
  if (dynamic_cast<const ConfigError*>(&e) != nullptr) return exit_code::kConfig;
  if (dynamic_cast<const DimensionError*>(&e) != nullptr) return exit_code::kConfig;
  if (dynamic_cast<const NumericError*>(&e) != nullptr) return exit_code::kNumeric;
  if (dynamic_cast<const DegenerateInputError*>(&e) != nullptr) return exit_code::kNumeric;
  if (dynamic_cast<const IoError*>(&e) != nullptr) return exit_code::kIo;
  if (dynamic_cast<const FormatError*>(&e) != nullptr) return exit_code::kIo;
  return 1;
}

std::string metrics_csv_header() {
  return "run_id,seed,scheme,optimizer,round,train_loss,eval_accuracy,comm_scalars_cum,curvature_min,"
         "curvature_max,skips,elapsed_ms\n";
}

std::string format_metrics_row(const MetricsRow& row) {
  std::ostringstream out;
  out << row.run_id << ',' << row.seed << ',' << row.scheme << ',' << row.optimizer << ',' << row.round << ','
      << format_double(row.train_loss) << ',' << format_double(row.eval_accuracy) << ',' << row.comm_scalars_cum
      << ',' << format_double(row.curvature_min) << ',' << format_double(row.curvature_max) << ',' << row.skips
      << ',' << format_fixed(row.elapsed_ms, 3) << '\n';
  return out.str();
}

LoadedData load_data(const ExperimentConfig& cfg, std::uint64_t run_seed) {
  LoadedData data;
  switch (cfg.source) {
    case DataSource::Synth: {
      const std::uint64_t seed = cfg.effective_data_seed(run_seed);
      data.train = synth_logistic(cfg.synth_train, cfg.synth_dim, cfg.synth_classes, cfg.synth_margin, seed,
                                  streams::kSynthTrain);
      data.test = synth_logistic(cfg.synth_test, cfg.synth_dim, cfg.synth_classes, cfg.synth_margin, seed,
                                 streams::kSynthTest);
      break;
    }
    case DataSource::Idx: {
      data.train = load_idx(cfg.idx_train_images, cfg.idx_train_labels);
      data.test = load_idx(cfg.idx_test_images, cfg.idx_test_labels);
      if (data.train.input_dim() != data.test.input_dim()) {
        throw DimensionError("IDX train and test images have different sizes");
      }
      const std::size_t n = std::max(data.train.num_classes, data.test.num_classes);
      data.train.num_classes = n;
      data.test.num_classes = n;
      break;
    }
    case DataSource::Csv: {
      data.train = load_csv(cfg.csv_train, cfg.csv_label_column);
      data.test = load_csv(cfg.csv_test, cfg.csv_label_column, &*data.train.csv_schema);
      break;
    }
  }
  data.train.validate();
  data.test.validate();
  return data;
}

ExperimentInputs build_inputs(const ExperimentConfig& cfg, const LoadedData& data, std::uint64_t run_seed) {
  ExperimentInputs inputs;
  inputs.model = cfg.model_spec(data.train.input_dim(), data.train.num_classes);
  inputs.train = &data.train;
  inputs.test = &data.test;
  const std::uint64_t seed = cfg.effective_data_seed(run_seed);
  inputs.plan = cfg.partition == PartitionScheme::Iid
                    ? partition_iid(data.train, cfg.num_clients, seed)
                    : partition_noniid_l(data.train, cfg.num_clients, cfg.labels_per_client, seed);
  verify_partition(inputs.plan, data.train.size());
  if (cfg.share_beta > 0.0) inputs.shared = share_subset(data.train, inputs.plan, cfg.share_beta, seed);
  return inputs;
}

std::string optimizer_label(const ExperimentConfig& cfg) {
  if (cfg.scheme == Scheme::FedOva) return "ova-" + std::string(to_string(cfg.ova_update));
  return std::string(to_string(cfg.round.optimizer));
}

SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  const LoadedData data = load_data(cfg, seed);
  const ExperimentInputs inputs = build_inputs(cfg, data, seed);
  const RunOptions opts = run_options(cfg);
  SeedResult result{seed, {}};
  if (cfg.scheme == Scheme::FedAvg) {
    result.reports = run_experiment(cfg.round, inputs, opts, seed);
  } else {
    FedOvaConfig ova{cfg.round, cfg.ova_update, cfg.ova_balanced};
    result.reports = run_fedova(ova, inputs, opts, seed);
  }
  return result;
}

std::vector<MetricsRow> to_metrics_rows(const ExperimentConfig& cfg, const SeedResult& result) {
  std::vector<MetricsRow> rows;
  rows.reserve(result.reports.size());
  const std::string run_id = cfg.name + "-s" + std::to_string(result.seed);
  for (const RoundReport& r : result.reports) {
    rows.push_back(MetricsRow{run_id, result.seed, std::string(to_string(cfg.scheme)), optimizer_label(cfg), r.round,
                              r.train_loss, r.eval_accuracy, r.comm_scalars_cum, r.curvature_min, r.curvature_max,
                              r.skips, r.elapsed_ms});
  }
  return rows;
}

std::optional<std::size_t> convergence_round(std::span<const RoundReport> rows, double target_accuracy,
                                             std::size_t patience) {
  patience = std::max<std::size_t>(patience, 1);
  std::size_t streak = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    streak = rows[i].eval_accuracy >= target_accuracy ? streak + 1 : 0;
    if (streak == patience) return rows[i + 1 - patience].round;
  }
  return std::nullopt;
}

std::optional<std::size_t> rounds_to_loss(std::span<const RoundReport> rows, double target_loss) {
  for (const RoundReport& r : rows)
    if (r.train_loss <= target_loss) return r.round;
  return std::nullopt;
}

double final_accuracy(std::span<const RoundReport> rows, std::size_t window) {
  if (rows.empty()) return std::nan("");
  std::size_t begin = rows.size() > 1 ? 1 : 0;
  if (rows.size() - begin > window) begin = rows.size() - window;
  double total = 0.0;
  for (std::size_t i = begin; i < rows.size(); ++i) total += rows[i].eval_accuracy;
  return total / static_cast<double>(rows.size() - begin);
}

std::optional<double> loss_at_round(std::span<const RoundReport> rows, std::size_t round) {
  for (const RoundReport& r : rows)
    if (r.round == round) return r.train_loss;
  return std::nullopt;
}

std::filesystem::path output_root(const ExperimentConfig& cfg) {
  if (const char* env = std::getenv("FEDFIM_OUTPUT_DIR"); env != nullptr && *env != '\0') return env;
  return cfg.output_dir;
}

RunSummary run(const ExperimentConfig& cfg, std::ostream& log) {
  validate_config(cfg);
  RunSummary summary;
  summary.directory = output_root(cfg) / cfg.name;
  ensure_directory(summary.directory);
  write_text(summary.directory / "effective_config.json", effective_config_json(cfg));

  const auto metrics_path = summary.directory / "metrics.csv";
  std::ofstream metrics(metrics_path, std::ios::binary);
  if (!metrics) throw IoError("cannot write " + metrics_path.string());
  metrics << metrics_csv_header();

  std::vector<double> finals, rounds, comms;
  for (std::uint64_t seed : cfg.seeds) {
    SeedResult result = run_seed(cfg, seed);
    for (const MetricsRow& row : to_metrics_rows(cfg, result)) metrics << format_metrics_row(row);
    metrics.flush();
    if (!metrics) throw IoError("write failure on " + metrics_path.string());
    finals.push_back(final_accuracy(result.reports));
    comms.push_back(static_cast<double>(result.reports.back().comm_scalars_cum));
    if (cfg.target_accuracy) {
      if (auto r = convergence_round(result.reports, *cfg.target_accuracy, cfg.patience)) {
        rounds.push_back(static_cast<double>(*r));
      }
    }
    summary.seeds.push_back(std::move(result));
  }
  summary.final_accuracy_mean = mean_of(finals);
  summary.comm_scalars_mean = mean_of(comms);
  if (!rounds.empty()) summary.convergence_round_mean = mean_of(rounds);

  std::ostringstream line;
  line << "run=" << cfg.name << " seeds=" << cfg.seeds.size()
       << " final_accuracy=" << format_fixed(summary.final_accuracy_mean, 4) << " convergence_round="
       << (summary.convergence_round_mean ? format_fixed(*summary.convergence_round_mean, 1) : std::string("none"))
       << " comm_scalars_total=" << format_fixed(summary.comm_scalars_mean, 0) << '\n';
  write_text(summary.directory / "summary.txt", line.str());
  log << line.str();
  return summary;
}

TableSpec parse_table_spec_text(std::string_view text) {
  json root = json::parse(text.begin(), text.end(), nullptr, false);
  if (root.is_discarded() || !root.is_object()) throw ConfigError("table spec must be a JSON object");
  TableSpec spec;
  for (auto it = root.begin(); it != root.end(); ++it) {
    const std::string& key = it.key();
    if (key == "title") {
      if (!it->is_string()) throw ConfigError("table spec title must be a string");
      spec.title = it->get<std::string>();
    } else if (key == "base") {
      if (!it->is_object()) throw ConfigError("table spec base must be an object");
      spec.base = parse_config_text(it->dump(), false);
    } else if (key == "target_accuracy") {
      if (!it->is_number()) throw ConfigError("table spec target_accuracy must be a number");
      spec.target_accuracy = it->get<double>();
    } else if (key == "rows") {
      if (!it->is_array() || it->empty()) throw ConfigError("table spec rows must be a non-empty array");
      for (const auto& row : *it) {
        if (!row.is_object() || !row.contains("label") || !row["label"].is_string()) {
          throw ConfigError("every table row needs a string label");
        }
        CompareRow r;
        r.label = row["label"].get<std::string>();
        for (auto f = row.begin(); f != row.end(); ++f) {
          if (f.key() == "label") continue;
          if (f.key() != "set" || !f->is_object()) {
            throw ConfigError("table row '" + r.label + "': unknown field '" + f.key() + "'");
          }
          for (auto s = f->begin(); s != f->end(); ++s) r.overrides.push_back(s.key() + "=" + s->dump());
        }
        spec.rows.push_back(std::move(r));
      }
    } else {
      throw ConfigError("table spec: unknown field '" + key + "'");
    }
  }
  if (spec.rows.empty()) throw ConfigError("table spec has no rows");
  if (spec.title.empty() || spec.title.find('/') != std::string::npos) throw ConfigError("table spec title is invalid");
  return spec;
}

TableSpec parse_table_spec_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read table spec " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_table_spec_text(buffer.str());
}

std::vector<CompareResult> compare(const TableSpec& spec) {
  std::vector<ExperimentConfig> configs;
  for (const CompareRow& row : spec.rows) {
    ExperimentConfig cfg = spec.base;
    for (const std::string& o : row.overrides) apply_override(cfg, o);
    try {
      validate_config(cfg);
    } catch (const ConfigError& e) {
      throw ConfigError("table row '" + row.label + "': " + e.what());
    }
    configs.push_back(std::move(cfg));
  }

  std::vector<CompareResult> results;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const ExperimentConfig& cfg = configs[i];
    CompareResult res;
    res.label = spec.rows[i].label;
    res.config = cfg;
    std::vector<double> finals, rounds, losses, comms;
    const std::optional<double> target = spec.target_accuracy ? spec.target_accuracy : cfg.target_accuracy;
    for (std::uint64_t seed : cfg.seeds) {
      SeedResult sr = run_seed(cfg, seed);
      finals.push_back(final_accuracy(sr.reports));
      losses.push_back(sr.reports.back().train_loss);
      comms.push_back(static_cast<double>(sr.reports.back().comm_scalars_cum));
      if (target) {
        if (auto r = convergence_round(sr.reports, *target, cfg.patience)) rounds.push_back(static_cast<double>(*r));
      }
      res.seeds.push_back(std::move(sr));
    }
    res.final_accuracy_mean = mean_of(finals);
    double var = 0.0;
    for (double f : finals) var += (f - res.final_accuracy_mean) * (f - res.final_accuracy_mean);
    res.final_accuracy_sd = finals.size() > 1 ? std::sqrt(var / static_cast<double>(finals.size() - 1)) : 0.0;
    res.final_loss_mean = mean_of(losses);
    res.comm_scalars_mean = mean_of(comms);
    res.converged_seeds = rounds.size();
    if (!rounds.empty()) res.convergence_round_mean = mean_of(rounds);
    results.push_back(std::move(res));
  }
  return results;
}

std::string format_compare_table(const TableSpec& spec, std::span<const CompareResult> results) {
  std::size_t label_width = 5;
  for (const auto& r : results) label_width = std::max(label_width, r.label.size());
  std::ostringstream out;
  char buf[256];
  out << spec.title << '\n';
  std::snprintf(buf, sizeof(buf), "%-*s  %-7s  %-14s  %5s  %-15s  %9s  %14s  %10s\n", static_cast<int>(label_width),
                "label", "scheme", "optimizer", "seeds", "final_acc", "conv_rnd", "comm_scalars", "final_loss");
  out << buf;
  for (const auto& r : results) {
    const std::string acc = format_fixed(100.0 * r.final_accuracy_mean, 2) + " +- " +
                            format_fixed(100.0 * r.final_accuracy_sd, 2);
    const std::string conv =
        r.convergence_round_mean ? format_fixed(*r.convergence_round_mean, 1) : std::string("none");
    std::snprintf(buf, sizeof(buf), "%-*s  %-7s  %-14s  %5zu  %-15s  %9s  %14.0f  %10.5f\n",
                  static_cast<int>(label_width), r.label.c_str(), std::string(to_string(r.config.scheme)).c_str(),
                  optimizer_label(r.config).c_str(), r.config.seeds.size(), acc.c_str(), conv.c_str(),
                  r.comm_scalars_mean, r.final_loss_mean);
    out << buf;
  }
  return out.str();
}

std::string format_compare_csv(std::span<const CompareResult> results) {
  std::ostringstream out;
  out << "label,scheme,optimizer,seeds,final_accuracy_mean,final_accuracy_sd,convergence_round_mean,"
         "converged_seeds,comm_scalars_mean,final_loss_mean\n";
  for (const auto& r : results) {
    out << r.label << ',' << to_string(r.config.scheme) << ',' << optimizer_label(r.config) << ','
        << r.config.seeds.size() << ',' << format_double(r.final_accuracy_mean) << ','
        << format_double(r.final_accuracy_sd) << ','
        << (r.convergence_round_mean ? format_double(*r.convergence_round_mean) : std::string("none")) << ','
        << r.converged_seeds << ',' << format_double(r.comm_scalars_mean) << ',' << format_double(r.final_loss_mean)
        << '\n';
  }
  return out.str();
}

std::vector<CompareResult> compare_and_write(const TableSpec& spec, std::ostream& log) {
  std::vector<CompareResult> results = compare(spec);
  const auto dir = output_root(spec.base) / sanitize(spec.title);
  ensure_directory(dir);
  const std::string table = format_compare_table(spec, results);
  write_text(dir / "compare.txt", table);
  write_text(dir / "compare.csv", format_compare_csv(results));
  for (const auto& r : results) {
    std::string csv = metrics_csv_header();
    for (const auto& sr : r.seeds)
      for (const auto& row : to_metrics_rows(r.config, sr)) csv += format_metrics_row(row);
    write_text(dir / (sanitize(r.label) + ".metrics.csv"), csv);
  }
  log << table;
  return results;
}

}  // namespace fedfim
