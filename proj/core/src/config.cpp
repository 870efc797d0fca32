#include "fedfim/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "fedfim/error.hpp"
#include "json.hpp"

namespace fedfim {

namespace {

using json = nlohmann::json;

[[noreturn]] void type_error(const std::string& key, const std::string& expected, const json& got) {
  throw ConfigError(key + ": expected " + expected + ", got " + std::string(got.type_name()) + " " + got.dump());
}

std::uint64_t as_uint(const std::string& key, const json& v) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) {
    if (v.get<std::int64_t>() < 0) throw ConfigError(key + ": must be >= 0, got " + v.dump());
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  }
  type_error(key, "a non-negative integer", v);
}

std::size_t as_count(const std::string& key, const json& v, std::size_t min_value = 0) {
  const auto n = static_cast<std::size_t>(as_uint(key, v));
  if (n < min_value) throw ConfigError(key + ": must be >= " + std::to_string(min_value) + ", got " + v.dump());
  return n;
}

double as_double(const std::string& key, const json& v) {
  if (!v.is_number()) type_error(key, "a number", v);
  return v.get<double>();
}

std::string as_string(const std::string& key, const json& v) {
  if (!v.is_string()) type_error(key, "a string", v);
  return v.get<std::string>();
}

bool as_bool(const std::string& key, const json& v) {
  if (!v.is_boolean()) type_error(key, "a boolean", v);
  return v.get<bool>();
}

template <typename Fn>
auto parse_enum(const std::string& key, const json& v, Fn&& parser) {
  const std::string text = as_string(key, v);
  try {
    return parser(text);
  } catch (const ConfigError& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

PartitionScheme parse_partition(std::string_view text) {
  if (text == "iid") return PartitionScheme::Iid;
  if (text == "noniid") return PartitionScheme::NonIidL;
  throw ConfigError("unknown partition scheme '" + std::string(text) + "' (expected iid or noniid)");
}

Scheme parse_scheme(std::string_view text) {
  if (text == "fedavg") return Scheme::FedAvg;
  if (text == "fedova") return Scheme::FedOva;
  throw ConfigError("unknown scheme '" + std::string(text) + "' (expected fedavg or fedova)");
}

DataSource parse_source(std::string_view text) {
  if (text == "synth") return DataSource::Synth;
  if (text == "idx") return DataSource::Idx;
  if (text == "csv") return DataSource::Csv;
  throw ConfigError("unknown data source '" + std::string(text) + "' (expected synth, idx or csv)");
}

struct KeyHandler {
  ConfigKeyInfo info;
  std::function<void(ExperimentConfig&, const json&)> apply;
  std::function<json(const ExperimentConfig&)> dump;
};

using Apply = std::function<void(ExperimentConfig&, const json&)>;
using Dump = std::function<json(const ExperimentConfig&)>;

const std::vector<KeyHandler>& handlers() {
  static const std::vector<KeyHandler> table = [] {
    std::vector<KeyHandler> t;
    auto add = [&](std::string key, std::string type, std::string description, Apply apply, Dump dump) {
      const ExperimentConfig defaults;
      const std::string default_text = dump(defaults).dump();
      t.push_back(KeyHandler{{key, std::move(type), default_text, std::move(description)}, std::move(apply),
                             std::move(dump)});
    };

    add("name", "string", "run name; output goes to <output.dir>/<name>",
        [](ExperimentConfig& c, const json& v) { c.name = as_string("name", v); },
        [](const ExperimentConfig& c) { return json(c.name); });
    add("scheme", "fedavg|fedova", "training scheme",
        [](ExperimentConfig& c, const json& v) { c.scheme = parse_enum("scheme", v, parse_scheme); },
        [](const ExperimentConfig& c) { return json(std::string(to_string(c.scheme))); });

    add("data.source", "synth|idx|csv", "dataset loader",
        [](ExperimentConfig& c, const json& v) { c.source = parse_enum("data.source", v, parse_source); },
        [](const ExperimentConfig& c) { return json(std::string(to_string(c.source))); });
    add("data.seed", "integer|null", "seed for data generation and partitioning (null: run seed)",
        [](ExperimentConfig& c, const json& v) {
          if (v.is_null()) c.data_seed.reset();
          else c.data_seed = as_uint("data.seed", v);
        },
        [](const ExperimentConfig& c) { return c.data_seed ? json(*c.data_seed) : json(nullptr); });
    add("data.synth.train_size", "integer", "synthetic training samples N",
        [](ExperimentConfig& c, const json& v) { c.synth_train = as_count("data.synth.train_size", v, 1); },
        [](const ExperimentConfig& c) { return json(c.synth_train); });
    add("data.synth.test_size", "integer", "synthetic test samples",
        [](ExperimentConfig& c, const json& v) { c.synth_test = as_count("data.synth.test_size", v, 1); },
        [](const ExperimentConfig& c) { return json(c.synth_test); });
    add("data.synth.dim", "integer", "synthetic feature dimension",
        [](ExperimentConfig& c, const json& v) { c.synth_dim = as_count("data.synth.dim", v, 1); },
        [](const ExperimentConfig& c) { return json(c.synth_dim); });
    add("data.synth.classes", "integer", "synthetic class count n",
        [](ExperimentConfig& c, const json& v) { c.synth_classes = as_count("data.synth.classes", v, 2); },
        [](const ExperimentConfig& c) { return json(c.synth_classes); });
    add("data.synth.margin", "number", "softmax sharpening of the synthetic labels",
        [](ExperimentConfig& c, const json& v) {
          c.synth_margin = as_double("data.synth.margin", v);
          if (!(c.synth_margin > 0.0)) throw ConfigError("data.synth.margin: must be > 0");
        },
        [](const ExperimentConfig& c) { return json(c.synth_margin); });
    add("data.idx.train_images", "path", "IDX training images",
        [](ExperimentConfig& c, const json& v) { c.idx_train_images = as_string("data.idx.train_images", v); },
        [](const ExperimentConfig& c) { return json(c.idx_train_images); });
    add("data.idx.train_labels", "path", "IDX training labels",
        [](ExperimentConfig& c, const json& v) { c.idx_train_labels = as_string("data.idx.train_labels", v); },
        [](const ExperimentConfig& c) { return json(c.idx_train_labels); });
    add("data.idx.test_images", "path", "IDX test images",
        [](ExperimentConfig& c, const json& v) { c.idx_test_images = as_string("data.idx.test_images", v); },
        [](const ExperimentConfig& c) { return json(c.idx_test_images); });
    add("data.idx.test_labels", "path", "IDX test labels",
        [](ExperimentConfig& c, const json& v) { c.idx_test_labels = as_string("data.idx.test_labels", v); },
        [](const ExperimentConfig& c) { return json(c.idx_test_labels); });
    add("data.csv.train", "path", "CSV training file",
        [](ExperimentConfig& c, const json& v) { c.csv_train = as_string("data.csv.train", v); },
        [](const ExperimentConfig& c) { return json(c.csv_train); });
    add("data.csv.test", "path", "CSV test file",
        [](ExperimentConfig& c, const json& v) { c.csv_test = as_string("data.csv.test", v); },
        [](const ExperimentConfig& c) { return json(c.csv_test); });
    add("data.csv.label_column", "string", "CSV label column name",
        [](ExperimentConfig& c, const json& v) { c.csv_label_column = as_string("data.csv.label_column", v); },
        [](const ExperimentConfig& c) { return json(c.csv_label_column); });

    add("model.kind", "auto|binary-logistic|softmax-regression|mlp1",
        "classifier (fedova: component classifier); auto picks softmax-regression or binary-logistic",
        [](ExperimentConfig& c, const json& v) {
          c.model_kind = as_string("model.kind", v);
          if (c.model_kind != "auto") parse_enum("model.kind", v, parse_model_kind);
        },
        [](const ExperimentConfig& c) { return json(c.model_kind); });
    add("model.hidden_dim", "integer", "mlp1 hidden width",
        [](ExperimentConfig& c, const json& v) { c.hidden_dim = as_count("model.hidden_dim", v, 1); },
        [](const ExperimentConfig& c) { return json(c.hidden_dim); });

    add("fed.clients", "integer", "client count K",
        [](ExperimentConfig& c, const json& v) { c.num_clients = as_count("fed.clients", v, 1); },
        [](const ExperimentConfig& c) { return json(c.num_clients); });
    add("fed.participation", "number", "fraction q of clients sampled per round",
        [](ExperimentConfig& c, const json& v) { c.round.participation = as_double("fed.participation", v); },
        [](const ExperimentConfig& c) { return json(c.round.participation); });
    add("fed.local_epochs", "integer", "local epochs E",
        [](ExperimentConfig& c, const json& v) { c.round.local_epochs = as_count("fed.local_epochs", v, 1); },
        [](const ExperimentConfig& c) { return json(c.round.local_epochs); });
    add("fed.batch_size", "integer|\"full\"", "local mini-batch size B (fim-lbfgs: stochastic batch S_t^k)",
        [](ExperimentConfig& c, const json& v) {
          if (v.is_string() && v.get<std::string>() == "full") {
            c.round.batch_size = 0;
          } else {
            c.round.batch_size = as_count("fed.batch_size", v, 1);
          }
        },
        [](const ExperimentConfig& c) {
          return c.round.batch_size == 0 ? json("full") : json(c.round.batch_size);
        });
    add("fed.learning_rate", "number", "learning rate eta (client step for fedavg, server step for fim-lbfgs)",
        [](ExperimentConfig& c, const json& v) { c.round.learning_rate = as_double("fed.learning_rate", v); },
        [](const ExperimentConfig& c) { return json(c.round.learning_rate); });
    add("fed.optimizer", "fim-lbfgs|fedavg-sgd|fedavg-adam", "server optimizer for the fedavg scheme",
        [](ExperimentConfig& c, const json& v) {
          c.round.optimizer = parse_enum("fed.optimizer", v, parse_optimizer_kind);
        },
        [](const ExperimentConfig& c) { return json(std::string(to_string(c.round.optimizer))); });
    add("fed.rounds", "integer", "communication rounds T",
        [](ExperimentConfig& c, const json& v) { c.round.rounds = as_count("fed.rounds", v); },
        [](const ExperimentConfig& c) { return json(c.round.rounds); });
    add("fed.tau", "integer", "cost-model client count tau (0: participants per round)",
        [](ExperimentConfig& c, const json& v) { c.round.tau = as_count("fed.tau", v); },
        [](const ExperimentConfig& c) { return json(c.round.tau); });
    add("fed.gradient_weighting", "sample-size|uniform", "fim-lbfgs gradient aggregation weights",
        [](ExperimentConfig& c, const json& v) {
          c.round.gradient_weighting = parse_enum("fed.gradient_weighting", v, parse_weighting);
        },
        [](const ExperimentConfig& c) { return json(std::string(to_string(c.round.gradient_weighting))); });
    add("fed.fim_weighting", "sample-size|uniform", "fim-lbfgs FIM aggregation weights",
        [](ExperimentConfig& c, const json& v) {
          c.round.fim_weighting = parse_enum("fed.fim_weighting", v, parse_weighting);
        },
        [](const ExperimentConfig& c) { return json(std::string(to_string(c.round.fim_weighting))); });
    add("fed.fedavg_weighting", "sample-size|uniform", "FedAvg update aggregation weights",
        [](ExperimentConfig& c, const json& v) {
          c.round.fedavg_weighting = parse_enum("fed.fedavg_weighting", v, parse_weighting);
        },
        [](const ExperimentConfig& c) { return json(std::string(to_string(c.round.fedavg_weighting))); });

    add("lbfgs.memory", "integer", "curvature pair memory m",
        [](ExperimentConfig& c, const json& v) { c.round.memory = as_count("lbfgs.memory", v, 1); },
        [](const ExperimentConfig& c) { return json(c.round.memory); });
    add("lbfgs.cautious_eps", "number", "pairs with y.s < eps*|s|^2 are skipped",
        [](ExperimentConfig& c, const json& v) { c.round.cautious_eps = as_double("lbfgs.cautious_eps", v); },
        [](const ExperimentConfig& c) { return json(c.round.cautious_eps); });
    add("lbfgs.fim_damping", "number", "added to every FIM diagonal entry",
        [](ExperimentConfig& c, const json& v) { c.round.fim_damping = as_double("lbfgs.fim_damping", v); },
        [](const ExperimentConfig& c) { return json(c.round.fim_damping); });
    add("lbfgs.h0", "identity|gamma-scaled", "initial inverse-Hessian scaling",
        [](ExperimentConfig& c, const json& v) { c.round.h0_mode = parse_enum("lbfgs.h0", v, parse_h0_mode); },
        [](const ExperimentConfig& c) { return json(std::string(to_string(c.round.h0_mode))); });

    add("adam.beta1", "number", "FedAvg-Adam first-moment decay",
        [](ExperimentConfig& c, const json& v) { c.round.adam_beta1 = as_double("adam.beta1", v); },
        [](const ExperimentConfig& c) { return json(c.round.adam_beta1); });
    add("adam.beta2", "number", "FedAvg-Adam second-moment decay",
        [](ExperimentConfig& c, const json& v) { c.round.adam_beta2 = as_double("adam.beta2", v); },
        [](const ExperimentConfig& c) { return json(c.round.adam_beta2); });
    add("adam.eps", "number", "FedAvg-Adam denominator guard",
        [](ExperimentConfig& c, const json& v) { c.round.adam_eps = as_double("adam.eps", v); },
        [](const ExperimentConfig& c) { return json(c.round.adam_eps); });

    add("partition.scheme", "iid|noniid", "client partitioner",
        [](ExperimentConfig& c, const json& v) { c.partition = parse_enum("partition.scheme", v, parse_partition); },
        [](const ExperimentConfig& c) { return json(c.partition == PartitionScheme::Iid ? "iid" : "noniid"); });
    add("partition.labels_per_client", "integer", "l for non-IID-l",
        [](ExperimentConfig& c, const json& v) {
          c.labels_per_client = as_count("partition.labels_per_client", v, 1);
        },
        [](const ExperimentConfig& c) { return json(c.labels_per_client); });
    add("sharing.beta", "number", "data-sharing rate beta (0 disables)",
        [](ExperimentConfig& c, const json& v) { c.share_beta = as_double("sharing.beta", v); },
        [](const ExperimentConfig& c) { return json(c.share_beta); });

    add("fedova.update", "average|fim-lbfgs", "how component groups update their classifier",
        [](ExperimentConfig& c, const json& v) { c.ova_update = parse_enum("fedova.update", v, parse_ova_update); },
        [](const ExperimentConfig& c) { return json(std::string(to_string(c.ova_update))); });
    add("fedova.balanced", "boolean", "subsample negatives to the positive count per client",
        [](ExperimentConfig& c, const json& v) { c.ova_balanced = as_bool("fedova.balanced", v); },
        [](const ExperimentConfig& c) { return json(c.ova_balanced); });

    add("eval.every", "integer", "evaluate every this many rounds",
        [](ExperimentConfig& c, const json& v) { c.eval_every = as_count("eval.every", v, 1); },
        [](const ExperimentConfig& c) { return json(c.eval_every); });
    add("stop.target_accuracy", "number|null", "early-stop target accuracy (null: run all rounds)",
        [](ExperimentConfig& c, const json& v) {
          if (v.is_null()) c.target_accuracy.reset();
          else c.target_accuracy = as_double("stop.target_accuracy", v);
        },
        [](const ExperimentConfig& c) { return c.target_accuracy ? json(*c.target_accuracy) : json(nullptr); });
    add("stop.tolerance", "number", "accuracy tolerance below the target",
        [](ExperimentConfig& c, const json& v) { c.target_tolerance = as_double("stop.tolerance", v); },
        [](const ExperimentConfig& c) { return json(c.target_tolerance); });
    add("stop.patience", "integer", "consecutive evaluations at target before stopping",
        [](ExperimentConfig& c, const json& v) { c.patience = as_count("stop.patience", v, 1); },
        [](const ExperimentConfig& c) { return json(c.patience); });

    add("seeds", "integer|[integer]", "run seeds; one run per seed",
        [](ExperimentConfig& c, const json& v) {
          c.seeds.clear();
          if (v.is_array()) {
            for (const auto& s : v) c.seeds.push_back(as_uint("seeds[]", s));
          } else {
            c.seeds.push_back(as_uint("seeds", v));
          }
          if (c.seeds.empty()) throw ConfigError("seeds: at least one seed is required");
        },
        [](const ExperimentConfig& c) { return json(c.seeds); });
    add("output.dir", "path", "output root (FEDFIM_OUTPUT_DIR overrides)",
        [](ExperimentConfig& c, const json& v) { c.output_dir = as_string("output.dir", v); },
        [](const ExperimentConfig& c) { return json(c.output_dir); });
    return t;
  }();
  return table;
}

const KeyHandler* find_handler(std::string_view key) {
  for (const auto& h : handlers())
    if (h.info.key == key) return &h;
  return nullptr;
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::string_view last_segment(std::string_view key) {
  const auto dot = key.rfind('.');
  return dot == std::string_view::npos ? key : key.substr(dot + 1);
}

void flatten(const json& node, const std::string& prefix, std::vector<std::pair<std::string, json>>& out) {
  for (auto it = node.begin(); it != node.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object()) {
      flatten(*it, key, out);
    } else {
      out.emplace_back(key, *it);
    }
  }
}

void apply_key(ExperimentConfig& cfg, const std::string& key, const json& value) {
  const KeyHandler* h = find_handler(key);
  if (h == nullptr) {
    std::string msg = "unknown config key '" + key + "'";
    if (auto s = suggest_key(key)) msg += " (did you mean '" + *s + "'?)";
    throw ConfigError(msg);
  }
  h->apply(cfg, value);
}

ExperimentConfig from_json(const json& root, bool validate) {
  if (!root.is_object()) throw ConfigError("config root must be a JSON object");
  std::vector<std::pair<std::string, json>> flat;
  flatten(root, "", flat);
  ExperimentConfig cfg;
  for (const auto& [key, value] : flat) apply_key(cfg, key, value);
  if (validate) validate_config(cfg);
  return cfg;
}

}  // namespace

std::string_view to_string(Scheme s) noexcept { return s == Scheme::FedAvg ? "fedavg" : "fedova"; }

std::string_view to_string(DataSource s) noexcept {
  switch (s) {
    case DataSource::Synth:
      return "synth";
    case DataSource::Idx:
      return "idx";
    case DataSource::Csv:
      return "csv";
  }
  return "unknown";
}

ModelSpec ExperimentConfig::model_spec(std::size_t input_dim, std::size_t num_classes) const {
  ModelKind kind;
  if (model_kind == "auto") {
    kind = scheme == Scheme::FedOva ? ModelKind::BinaryLogistic : ModelKind::SoftmaxRegression;
  } else {
    kind = parse_model_kind(model_kind);
  }
  const std::size_t outputs = scheme == Scheme::FedOva ? 2 : num_classes;
  ModelSpec spec;
  switch (kind) {
    case ModelKind::BinaryLogistic:
      if (outputs != 2) throw ConfigError("model.kind: binary-logistic needs a two-class task (n=" + std::to_string(num_classes) + ")");
      spec = ModelSpec::binary_logistic(input_dim);
      break;
    case ModelKind::SoftmaxRegression:
      if (scheme == Scheme::FedOva) throw ConfigError("model.kind: fedova components must be binary-logistic or mlp1");
      spec = ModelSpec::softmax_regression(input_dim, outputs);
      break;
    case ModelKind::Mlp1:
      spec = ModelSpec::mlp1(input_dim, hidden_dim, outputs);
      break;
  }
  spec.validate();
  return spec;
}

const std::vector<ConfigKeyInfo>& config_keys() {
  static const std::vector<ConfigKeyInfo> keys = [] {
    std::vector<ConfigKeyInfo> out;
    for (const auto& h : handlers()) out.push_back(h.info);
    return out;
  }();
  return keys;
}

std::optional<std::string> suggest_key(std::string_view unknown) {
  std::optional<std::string> best;
  std::size_t best_score = std::string_view::npos;
  for (const auto& h : handlers()) {
    const std::size_t full = edit_distance(unknown, h.info.key);
    const std::size_t tail = edit_distance(last_segment(unknown), last_segment(h.info.key));
    const std::size_t score = std::min(full, tail);
    if (score < best_score) {
      best_score = score;
      best = h.info.key;
    }
  }
  if (best_score > std::max<std::size_t>(3, unknown.size() / 3)) return std::nullopt;
  return best;
}

ExperimentConfig parse_config_text(std::string_view text, bool validate) {
  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return from_json(root, validate);
}

ExperimentConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

void apply_override(ExperimentConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) + "' must look like key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  apply_key(cfg, key, value);
}

void validate_config(const ExperimentConfig& cfg) {
  if (cfg.name.empty()) throw ConfigError("name: must not be empty");
  if (cfg.name.find('/') != std::string::npos) throw ConfigError("name: must not contain '/'");
  try {
    cfg.round.validate(cfg.num_clients);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("fed: ") + e.what());
  }
  if (cfg.scheme == Scheme::FedOva && cfg.round.optimizer == OptimizerKind::FedAvgAdam) {
    throw ConfigError("fed.optimizer: fedova components train with SGD; use fedova.update to pick fim-lbfgs");
  }
  if (cfg.share_beta < 0.0 || cfg.share_beta > 1.0) throw ConfigError("sharing.beta: must lie in [0, 1]");
  if (cfg.target_accuracy && (*cfg.target_accuracy < 0.0 || *cfg.target_accuracy > 1.0)) {
    throw ConfigError("stop.target_accuracy: must lie in [0, 1]");
  }
  if (cfg.target_tolerance < 0.0) throw ConfigError("stop.tolerance: must be >= 0");

  switch (cfg.source) {
    case DataSource::Synth:
      if (cfg.partition == PartitionScheme::NonIidL) {
        const std::size_t n = cfg.synth_classes;
        const std::size_t l = cfg.labels_per_client;
        if (l > n) {
          throw ConfigError("partition.labels_per_client: l=" + std::to_string(l) + " exceeds n=" + std::to_string(n));
        }
        if ((l * cfg.num_clients) % n != 0) {
          throw ConfigError("partition.labels_per_client: non-IID-l requires (l*K) divisible by n (l=" +
                            std::to_string(l) + ", K=" + std::to_string(cfg.num_clients) +
                            ", n=" + std::to_string(n) + ")");
        }
      } else if (cfg.num_clients > cfg.synth_train) {
        throw ConfigError("fed.clients: K=" + std::to_string(cfg.num_clients) + " exceeds N=" +
                          std::to_string(cfg.synth_train));
      }
      cfg.model_spec(cfg.synth_dim, cfg.synth_classes);
      break;
    case DataSource::Idx:
      if (cfg.idx_train_images.empty() || cfg.idx_train_labels.empty() || cfg.idx_test_images.empty() ||
          cfg.idx_test_labels.empty()) {
        throw ConfigError("data.idx: train_images, train_labels, test_images and test_labels are required");
      }
      break;
    case DataSource::Csv:
      if (cfg.csv_train.empty() || cfg.csv_test.empty()) {
        throw ConfigError("data.csv: train and test paths are required");
      }
      break;
  }
}

std::string effective_config_json(const ExperimentConfig& cfg) {
  json out = json::object();
  for (const auto& h : handlers()) out[h.info.key] = h.dump(cfg);
  return out.dump(2) + "\n";
}

}  // namespace fedfim
