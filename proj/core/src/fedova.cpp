#include "fedfim/fedova.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "fedfim/error.hpp"

namespace fedfim {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// A per-(client, component) view sharing the client's random stream.
ClientState component_view(const ClientState& client, const Dataset& binary, bool balanced) {
  ClientState view(client.id, client.indices, 0);
  view.rng = client.rng;
  if (!balanced) return view;
  std::vector<std::size_t> positives, negatives;
  for (std::size_t idx : client.indices) (binary.labels[idx] == 1 ? positives : negatives).push_back(idx);
  if (positives.empty() || negatives.size() <= positives.size()) return view;
  const auto keep = view.rng.sample_without_replacement(negatives.size(), positives.size());
  std::vector<std::size_t> rows = positives;
  for (std::size_t k : keep) rows.push_back(negatives[k]);
  std::sort(rows.begin(), rows.end());
  view.indices = std::move(rows);
  return view;
}

}  // namespace

DenseMatrix OvaEnsemble::confidences(const DenseMatrix& features) const {
  DenseMatrix out(features.rows(), components.size());
  for (std::size_t i = 0; i < components.size(); ++i) {
    const DenseMatrix probs = predict_proba(components[i], features);
    if (probs.cols() != 2) throw DimensionError("OVA component must be a binary classifier");
    for (std::size_t r = 0; r < features.rows(); ++r) out(r, i) = probs(r, 1);
  }
  return out;
}

std::string_view to_string(OvaUpdate u) noexcept { return u == OvaUpdate::Average ? "average" : "fim-lbfgs"; }

OvaUpdate parse_ova_update(std::string_view text) {
  if (text == "average") return OvaUpdate::Average;
  if (text == "fim-lbfgs") return OvaUpdate::FimLbfgs;
  throw ConfigError("unknown fedova update '" + std::string(text) + "' (expected average or fim-lbfgs)");
}

Dataset binary_relabel(const Dataset& dataset, std::size_t class_id) {
  if (class_id >= dataset.num_classes) {
    throw ConfigError("binary_relabel: class " + std::to_string(class_id) + " outside [0, " +
                      std::to_string(dataset.num_classes) + ")");
  }
  Dataset out;
  out.features = dataset.features;
  out.labels.resize(dataset.labels.size());
  for (std::size_t i = 0; i < dataset.labels.size(); ++i) {
    out.labels[i] = static_cast<std::size_t>(dataset.labels[i]) == class_id ? 1 : 0;
  }
  out.num_classes = 2;
  out.name = dataset.name + "/ova-" + std::to_string(class_id);
  return out;
}

std::vector<std::size_t> select_components(std::span<const int> client_labels) {
  if (client_labels.empty()) throw DegenerateInputError("select_components: empty label set");
  std::set<std::size_t> ids;
  for (int y : client_labels) {
    if (y < 0) throw DimensionError("select_components: negative label");
    ids.insert(static_cast<std::size_t>(y));
  }
  return {ids.begin(), ids.end()};
}

std::vector<int> local_label_set(const Dataset& dataset, std::span<const std::size_t> indices) {
  std::set<int> labels;
  for (std::size_t i : indices) labels.insert(dataset.labels[i]);
  return {labels.begin(), labels.end()};
}

void group_aggregate(OvaEnsemble& ensemble, std::span<const ClassifierGroup> groups) {
  for (const ClassifierGroup& g : groups) {
    if (g.classifier_id >= ensemble.components.size()) throw DimensionError("group_aggregate: unknown classifier id");
    if (g.returned.empty()) continue;
    ParameterVector& target = ensemble.components[g.classifier_id];
    std::vector<DenseVector> values;
    values.reserve(g.returned.size());
    for (const ParameterVector& p : g.returned) {
      if (p.size() != target.size()) throw DimensionError("group_aggregate: parameter length mismatch");
      values.push_back(p.values);
    }
    const std::vector<double> unit(values.size(), 1.0);
    target.values = weighted_average(values, unit);
  }
}

std::vector<int> ensemble_predict(const OvaEnsemble& ensemble, const DenseMatrix& features) {
  if (ensemble.components.empty()) throw DegenerateInputError("ensemble_predict: empty ensemble");
  const DenseMatrix conf = ensemble.confidences(features);
  std::vector<int> out(features.rows());
  for (std::size_t r = 0; r < features.rows(); ++r) {
    const auto row = conf.row(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

double ensemble_accuracy(const OvaEnsemble& ensemble, const DenseMatrix& features, std::span<const int> labels) {
  if (labels.size() != features.rows()) throw DimensionError("ensemble_accuracy: label count mismatch");
  if (labels.empty()) throw DegenerateInputError("ensemble_accuracy: empty evaluation set");
  const auto predicted = ensemble_predict(ensemble, features);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predicted[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

OvaEnsemble init_ensemble(const ModelSpec& component, std::size_t num_classes, std::uint64_t seed) {
  component.validate();
  if (component.num_classes != 2) throw ConfigError("FedOVA components must have exactly two outputs");
  if (num_classes < 2) throw ConfigError("FedOVA needs n >= 2 classes");
  RandomStream rng(RngSeed{seed, streams::kInit});
  OvaEnsemble ensemble{num_classes, {}};
  for (std::size_t i = 0; i < num_classes; ++i) ensemble.components.push_back(init_parameters(component, rng));
  return ensemble;
}

std::vector<RoundReport> run_fedova(const FedOvaConfig& cfg, const ExperimentInputs& inputs, const RunOptions& opts,
                                    std::uint64_t seed) {
  if (inputs.train == nullptr || inputs.test == nullptr) throw ConfigError("run_fedova: missing dataset");
  const Dataset& train = *inputs.train;
  const Dataset& test = *inputs.test;
  RoundConfig rc = cfg.round;
  rc.optimizer = cfg.update == OvaUpdate::FimLbfgs ? OptimizerKind::FimLbfgs : OptimizerKind::FedAvgSgd;
  rc.validate(inputs.plan.num_clients);
  if (opts.eval_every < 1) throw ConfigError("eval_every must be >= 1");
  const std::size_t n = train.num_classes;
  if (train.input_dim() != inputs.model.input_dim || test.input_dim() != inputs.model.input_dim) {
    throw ConfigError("dataset input_dim does not match the component model");
  }

  const auto started = std::chrono::steady_clock::now();
  OvaEnsemble ensemble = init_ensemble(inputs.model, n, seed);
  const std::uint64_t d = inputs.model.parameter_count();

  std::vector<Dataset> binary;
  binary.reserve(n);
  for (std::size_t i = 0; i < n; ++i) binary.push_back(binary_relabel(train, i));

  std::vector<ClientState> clients = make_clients(inputs.plan, inputs.shared, seed);
  std::vector<std::vector<std::size_t>> selected(clients.size());
  for (std::size_t k = 0; k < clients.size(); ++k) {
    selected[k] = select_components(local_label_set(train, clients[k].indices));
  }

  std::vector<LbfgsMemory> memories;
  if (cfg.update == OvaUpdate::FimLbfgs) memories.assign(n, LbfgsMemory(rc.memory, rc.h0_mode));
  CurvatureStats curvature;
  CommunicationLedger ledger;
  RandomStream sampler(RngSeed{seed, streams::kClientSampling});
  EarlyStop stop(opts);

  std::vector<RoundReport> reports;
  auto evaluate = [&](RoundReport report) {
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) loss += forward_loss(ensemble.components[i], binary[i].batch());
    report.train_loss = loss / static_cast<double>(n);
    if (!std::isfinite(report.train_loss)) {
      throw NumericError("training loss became non-finite at round " + std::to_string(report.round));
    }
    report.eval_accuracy = ensemble_accuracy(ensemble, *test.features, test.labels);
    report.curvature_min = curvature.any_pair ? curvature.ratio_min : kNaN;
    report.curvature_max = curvature.any_pair ? curvature.ratio_max : kNaN;
    report.skips = 0;
    for (const auto& mem : memories) report.skips += mem.skipped();
    report.elapsed_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    reports.push_back(report);
    if (opts.sink) opts.sink(report);
    return stop.observe(report.eval_accuracy);
  };

  evaluate(RoundReport{});

  for (std::size_t t = 1; t <= rc.rounds; ++t) {
    const auto chosen = sample_clients(clients.size(), rc.participation, sampler);
    LedgerRecord rec;
    rec.round = t;

    std::vector<ClassifierGroup> groups(n);
    for (std::size_t i = 0; i < n; ++i) groups[i].classifier_id = i;
    for (std::size_t id : chosen) {
      for (std::size_t i : selected[id]) groups[i].members.push_back(id);
    }

    for (std::size_t i = 0; i < n; ++i) {
      ClassifierGroup& group = groups[i];
      if (group.members.empty()) continue;
      std::vector<ClientState> views;
      views.reserve(group.members.size());
      for (std::size_t id : group.members) views.push_back(component_view(clients[id], binary[i], cfg.balanced));

      if (cfg.update == OvaUpdate::Average) {
        rec.scalars_broadcast += d;
        for (ClientState& view : views) {
          const ClientUpdate u = client_update_sgd(binary[i], view, ensemble.components[i], rc.local_epochs,
                                                   rc.batch_size, rc.learning_rate);
          ParameterVector returned = ensemble.components[i];
          axpy(1.0, u.delta.span(), returned.values.span());
          group.returned.push_back(std::move(returned));
          rec.scalars_gathered += d;
        }
      } else {
        std::vector<ClientState*> ptrs;
        for (ClientState& v : views) ptrs.push_back(&v);
        const std::size_t tau = rc.tau == 0 ? ptrs.size() : rc.tau;
        FimStep step = fim_lbfgs_step(binary[i], ptrs, ensemble.components[i], memories[i], curvature, rc, tau);
        rec.scalars_broadcast += step.ledger.scalars_broadcast;
        rec.scalars_gathered += step.ledger.scalars_gathered;
        rec.pair_maintenance_scalars += step.ledger.pair_maintenance_scalars;
        rec.search_scalars += step.ledger.search_scalars;
      }
      for (std::size_t v = 0; v < views.size(); ++v) clients[group.members[v]].rng = views[v].rng;
    }

    if (cfg.update == OvaUpdate::Average) group_aggregate(ensemble, groups);
    for (const ParameterVector& c : ensemble.components) {
      if (!all_finite(c.values.span())) throw NumericError("non-finite component parameters after round " + std::to_string(t));
    }
    ledger.record(rec);

    if (t % opts.eval_every == 0 || t == rc.rounds) {
      RoundReport report;
      report.round = t;
      report.comm_scalars_round = rec.total();
      report.comm_scalars_cum = ledger.cumulative_total();
      if (evaluate(report)) break;
    }
  }
  return reports;
}

}  // namespace fedfim
