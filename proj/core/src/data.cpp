#include "fedfim/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "fedfim/error.hpp"
#include "fedfim/rng.hpp"

namespace fedfim {

namespace {

constexpr std::uint32_t kIdxImageMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failure on " + path.string());
  return bytes;
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                        const std::filesystem::path& path) {
  if (offset + 4 > bytes.size()) throw IoError("truncated IDX header in " + path.string());
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string current;
  std::istringstream stream(line);
  while (std::getline(stream, current, ',')) cells.push_back(trim(current));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::optional<double> parse_number(const std::string& cell) {
  if (cell.empty()) return std::nullopt;
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = cell.data() + cell.size();
  if (*begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

}  // namespace

std::vector<std::size_t> Dataset::label_histogram() const {
  std::vector<std::size_t> hist(num_classes, 0);
  for (int y : labels) ++hist[static_cast<std::size_t>(y)];
  return hist;
}

void Dataset::validate() const {
  if (!features) throw FormatError("dataset '" + name + "' has no feature matrix");
  if (labels.empty()) throw FormatError("dataset '" + name + "' is empty");
  if (features->rows() != labels.size()) throw FormatError("dataset '" + name + "': row/label count mismatch");
  if (num_classes < 1) throw FormatError("dataset '" + name + "': num_classes must be >= 1");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw FormatError("dataset '" + name + "': label out of range");
    }
  }
  if (!all_finite(features->data())) throw FormatError("dataset '" + name + "': non-finite feature value");
}

std::size_t PartitionPlan::total_assigned() const noexcept {
  std::size_t total = 0;
  for (const auto& a : assignment) total += a.size();
  return total;
}

double PartitionPlan::mean_client_size() const noexcept {
  return assignment.empty() ? 0.0 : static_cast<double>(total_assigned()) / static_cast<double>(assignment.size());
}

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  const auto image_bytes = read_file(images_path);
  const auto label_bytes = read_file(labels_path);

  const std::uint32_t image_magic = read_be32(image_bytes, 0, images_path);
  if (image_magic != kIdxImageMagic) {
    std::ostringstream msg;
    msg << "bad IDX image magic 0x" << std::hex << image_magic << " in " << images_path.string();
    throw FormatError(msg.str());
  }
  const std::uint32_t label_magic = read_be32(label_bytes, 0, labels_path);
  if (label_magic != kIdxLabelMagic) {
    std::ostringstream msg;
    msg << "bad IDX label magic 0x" << std::hex << label_magic << " in " << labels_path.string();
    throw FormatError(msg.str());
  }

  const std::size_t count = read_be32(image_bytes, 4, images_path);
  const std::size_t rows = read_be32(image_bytes, 8, images_path);
  const std::size_t cols = read_be32(image_bytes, 12, images_path);
  const std::size_t label_count = read_be32(label_bytes, 4, labels_path);
  if (count != label_count) {
    throw FormatError("IDX count mismatch: " + std::to_string(count) + " images vs " +
                      std::to_string(label_count) + " labels");
  }
  if (count == 0 || rows == 0 || cols == 0) throw FormatError("IDX file declares an empty dataset");

  const std::size_t pixels = rows * cols;
  constexpr std::size_t kImageHeader = 16;
  constexpr std::size_t kLabelHeader = 8;
  if (image_bytes.size() < kImageHeader + count * pixels) {
    throw IoError("truncated IDX image payload in " + images_path.string());
  }
  if (label_bytes.size() < kLabelHeader + count) {
    throw IoError("truncated IDX label payload in " + labels_path.string());
  }

  std::vector<double> values(count * pixels);
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = static_cast<double>(image_bytes[kImageHeader + i]) / 255.0;
  }
  Dataset ds;
  ds.labels.resize(count);
  int max_label = 0;
  for (std::size_t i = 0; i < count; ++i) {
    ds.labels[i] = static_cast<int>(label_bytes[kLabelHeader + i]);
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.features = std::make_shared<const DenseMatrix>(count, pixels, std::move(values));
  ds.num_classes = static_cast<std::size_t>(max_label) + 1;
  ds.name = images_path.filename().string();
  return ds;
}

Dataset load_csv(const std::filesystem::path& path, const std::string& label_column, const CsvSchema* reuse) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw FormatError("CSV " + path.string() + " has no header row");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
  const std::vector<std::string> header = split_csv_line(line);
  const auto label_it = std::find(header.begin(), header.end(), label_column);
  if (label_it == header.end()) {
    throw FormatError("CSV " + path.string() + " has no label column '" + label_column + "'");
  }
  const std::size_t label_idx = static_cast<std::size_t>(label_it - header.begin());
  const std::size_t num_features = header.size() - 1;
  if (num_features == 0) throw FormatError("CSV " + path.string() + " has no feature columns");

  std::vector<double> raw;
  std::vector<std::string> raw_labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw FormatError("CSV " + path.string() + " line " + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c == label_idx) {
        raw_labels.push_back(cells[c]);
        continue;
      }
      const auto value = parse_number(cells[c]);
      if (!value || !std::isfinite(*value)) {
        throw FormatError("CSV " + path.string() + " line " + std::to_string(line_no) + ": non-numeric cell '" +
                          cells[c] + "' in column '" + header[c] + "'");
      }
      raw.push_back(*value);
    }
  }
  const std::size_t n = raw_labels.size();
  if (n == 0) throw FormatError("CSV " + path.string() + " has no data rows");

  CsvSchema schema;
  if (reuse != nullptr) {
    if (reuse->mean.size() != num_features) throw FormatError("CSV column count differs from training schema");
    schema = *reuse;
  } else {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (c != label_idx) schema.feature_names.push_back(header[c]);
    schema.mean.assign(num_features, 0.0);
    schema.sd.assign(num_features, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < num_features; ++j) schema.mean[j] += raw[i * num_features + j];
    for (double& m : schema.mean) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < num_features; ++j) {
        const double dev = raw[i * num_features + j] - schema.mean[j];
        schema.sd[j] += dev * dev;
      }
    for (double& s : schema.sd) s = std::max(std::sqrt(s / static_cast<double>(n)), 1e-12);

    std::vector<std::string> distinct(raw_labels.begin(), raw_labels.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    const bool numeric = std::all_of(distinct.begin(), distinct.end(),
                                     [](const std::string& v) { return parse_number(v).has_value(); });
    if (numeric) {
      std::stable_sort(distinct.begin(), distinct.end(), [](const std::string& a, const std::string& b) {
        return *parse_number(a) < *parse_number(b);
      });
    }
    schema.label_values = std::move(distinct);
  }

  std::vector<double> standardized(raw.size());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < num_features; ++j) {
      const std::size_t k = i * num_features + j;
      standardized[k] = (raw[k] - schema.mean[j]) / schema.sd[j];
    }

  Dataset ds;
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto it = std::find(schema.label_values.begin(), schema.label_values.end(), raw_labels[i]);
    if (it == schema.label_values.end()) {
      throw FormatError("CSV " + path.string() + ": label '" + raw_labels[i] + "' not in training vocabulary");
    }
    ds.labels[i] = static_cast<int>(it - schema.label_values.begin());
  }
  ds.num_classes = schema.label_values.size();
  ds.features = std::make_shared<const DenseMatrix>(n, num_features, std::move(standardized));
  ds.name = path.filename().string();
  ds.csv_schema = std::move(schema);
  return ds;
}

Dataset synth_logistic(std::size_t num_samples, std::size_t dim, std::size_t num_classes, double margin,
                       std::uint64_t seed, std::uint64_t stream_id) {
  if (num_samples < 1 || dim < 1) throw ConfigError("synth_logistic: N and d must be >= 1");
  if (num_classes < 2) throw ConfigError("synth_logistic: n must be >= 2");
  if (!(margin > 0.0)) throw ConfigError("synth_logistic: margin must be positive");

  RandomStream truth_rng(RngSeed{seed, streams::kSynthTruth});
  DenseMatrix truth(num_classes, dim);
  for (double& w : truth.data()) w = truth_rng.normal();

  RandomStream rng(RngSeed{seed, stream_id});
  DenseMatrix x(num_samples, dim);
  Dataset ds;
  ds.labels.resize(num_samples);
  std::vector<double> logits(num_classes);
  for (std::size_t i = 0; i < num_samples; ++i) {
    auto row = x.row(i);
    for (double& v : row) v = rng.normal();
    for (std::size_t c = 0; c < num_classes; ++c) logits[c] = dot(truth.row(c), row);
    const double u = rng.uniform();
    const auto top = static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    if (std::isinf(margin)) {
      ds.labels[i] = static_cast<int>(top);
      continue;
    }
    const double peak = logits[top];
    double total = 0.0;
    for (double& z : logits) {
      z = std::exp(margin * (z - peak));
      total += z;
    }
    double acc = 0.0;
    std::size_t label = num_classes - 1;
    for (std::size_t c = 0; c < num_classes; ++c) {
      acc += logits[c] / total;
      if (u < acc) {
        label = c;
        break;
      }
    }
    ds.labels[i] = static_cast<int>(label);
  }
  ds.features = std::make_shared<const DenseMatrix>(std::move(x));
  ds.num_classes = num_classes;
  ds.name = "synth_logistic";
  ds.ground_truth = std::move(truth);
  return ds;
}

PartitionPlan partition_iid(const Dataset& dataset, std::size_t num_clients, std::uint64_t seed) {
  if (num_clients < 1) throw ConfigError("partition: K must be >= 1");
  if (num_clients > dataset.size()) {
    throw ConfigError("partition_iid: K=" + std::to_string(num_clients) + " exceeds N=" +
                      std::to_string(dataset.size()));
  }
  RandomStream rng(RngSeed{seed, streams::kPartition});
  const auto order = rng.permutation(dataset.size());
  PartitionPlan plan;
  plan.num_clients = num_clients;
  plan.scheme = PartitionScheme::Iid;
  plan.assignment.resize(num_clients);
  for (std::size_t i = 0; i < order.size(); ++i) plan.assignment[i % num_clients].push_back(order[i]);
  for (auto& a : plan.assignment) std::sort(a.begin(), a.end());
  return plan;
}

PartitionPlan partition_noniid_l(const Dataset& dataset, std::size_t num_clients, std::size_t labels_per_client,
                                 std::uint64_t seed) {
  const std::size_t n = dataset.num_classes;
  const std::size_t k = num_clients;
  const std::size_t l = labels_per_client;
  if (k < 1) throw ConfigError("partition: K must be >= 1");
  if (l < 1 || l > n) {
    throw ConfigError("non-IID-l requires 1 <= l <= n (l=" + std::to_string(l) + ", n=" + std::to_string(n) + ")");
  }
  if ((l * k) % n != 0) {
    throw ConfigError("non-IID-l requires (l*K) divisible by n: l=" + std::to_string(l) + ", K=" +
                      std::to_string(k) + ", n=" + std::to_string(n) + " gives l*K=" + std::to_string(l * k));
  }
  const std::size_t shards_per_label = l * k / n;

  RandomStream rng(RngSeed{seed, streams::kPartition});
  std::vector<std::vector<std::size_t>> groups(n);
  for (std::size_t i = 0; i < dataset.size(); ++i) groups[static_cast<std::size_t>(dataset.labels[i])].push_back(i);

  // shards[label] is consumed front to back.
  std::vector<std::vector<std::vector<std::size_t>>> shards(n);
  for (std::size_t label = 0; label < n; ++label) {
    auto& group = groups[label];
    if (group.size() < shards_per_label) {
      throw ConfigError("non-IID-l: label " + std::to_string(label) + " has " + std::to_string(group.size()) +
                        " samples, fewer than the " + std::to_string(shards_per_label) + " shards required");
    }
    rng.shuffle(group);
    const std::size_t base = group.size() / shards_per_label;
    const std::size_t extra = group.size() % shards_per_label;
    std::size_t pos = 0;
    for (std::size_t s = 0; s < shards_per_label; ++s) {
      const std::size_t len = base + (s < extra ? 1 : 0);
      shards[label].emplace_back(group.begin() + static_cast<std::ptrdiff_t>(pos),
                                 group.begin() + static_cast<std::ptrdiff_t>(pos + len));
      pos += len;
    }
  }

  std::vector<std::size_t> remaining(n, shards_per_label);
  std::vector<std::size_t> next_shard(n, 0);
  PartitionPlan plan;
  plan.num_clients = k;
  plan.scheme = PartitionScheme::NonIidL;
  plan.labels_per_client = l;
  plan.assignment.resize(k);

  std::vector<std::size_t> label_order(n);
  for (std::size_t client : rng.permutation(k)) {
    // Random order first so equal counts do not always pair the same labels.
    std::iota(label_order.begin(), label_order.end(), std::size_t{0});
    rng.shuffle(label_order);
    std::stable_sort(label_order.begin(), label_order.end(),
                     [&](std::size_t a, std::size_t b) { return remaining[a] > remaining[b]; });
    for (std::size_t pick = 0; pick < l; ++pick) {
      const std::size_t label = label_order[pick];
      if (remaining[label] == 0) throw ConfigError("non-IID-l: shard matching ran out of labels");
      const auto& shard = shards[label][next_shard[label]++];
      --remaining[label];
      plan.assignment[client].insert(plan.assignment[client].end(), shard.begin(), shard.end());
    }
    std::sort(plan.assignment[client].begin(), plan.assignment[client].end());
  }
  return plan;
}

std::vector<std::size_t> share_subset(const Dataset& dataset, const PartitionPlan& plan, double beta,
                                      std::uint64_t seed) {
  if (!(beta > 0.0) || beta > 1.0) throw ConfigError("data sharing: beta must lie in (0, 1]");
  const auto size = static_cast<std::size_t>(std::llround(beta * plan.mean_client_size()));
  if (size == 0) {
    throw ConfigError("data sharing: beta=" + std::to_string(beta) +
                      " gives an empty shared set (minimum size is 1)");
  }
  RandomStream rng(RngSeed{seed, streams::kSharing});
  auto picked = rng.sample_without_replacement(dataset.size(), std::min(size, dataset.size()));
  std::sort(picked.begin(), picked.end());
  return picked;
}

Dataset materialize(const Dataset& dataset, std::span<const std::size_t> indices) {
  DenseMatrix x(indices.size(), dataset.input_dim());
  Dataset out;
  out.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto src = dataset.features->row(indices[i]);
    std::copy(src.begin(), src.end(), x.row(i).begin());
    out.labels.push_back(dataset.labels[indices[i]]);
  }
  out.features = std::make_shared<const DenseMatrix>(std::move(x));
  out.num_classes = dataset.num_classes;
  out.name = dataset.name;
  return out;
}

void verify_partition(const PartitionPlan& plan, std::size_t dataset_size) {
  if (plan.assignment.size() != plan.num_clients) throw ConfigError("partition: client count mismatch");
  std::vector<char> seen(dataset_size, 0);
  for (std::size_t c = 0; c < plan.assignment.size(); ++c) {
    if (plan.assignment[c].empty()) throw ConfigError("partition: client " + std::to_string(c) + " is empty");
    for (std::size_t idx : plan.assignment[c]) {
      if (idx >= dataset_size) throw ConfigError("partition: index out of range");
      if (seen[idx]) throw ConfigError("partition: index " + std::to_string(idx) + " assigned twice");
      seen[idx] = 1;
    }
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) throw ConfigError("partition: not every sample assigned");
}

}  // namespace fedfim
