#include "fedfim/federation.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "fedfim/error.hpp"

namespace fedfim {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::size_t> full_or_sampled_batch(ClientState& client, std::size_t batch_size) {
  if (batch_size == 0 || batch_size >= client.num_samples()) return client.indices;
  auto picks = client.rng.sample_without_replacement(client.num_samples(), batch_size);
  std::vector<std::size_t> rows(picks.size());
  for (std::size_t i = 0; i < picks.size(); ++i) rows[i] = client.indices[picks[i]];
  return rows;
}

// Calls fn(rows) for every local mini-batch of every epoch.
template <typename Fn>
void for_each_minibatch(ClientState& client, std::size_t epochs, std::size_t batch_size, Fn&& fn) {
  if (client.indices.empty()) throw DegenerateInputError("client " + std::to_string(client.id) + " has no data");
  const std::size_t n = client.num_samples();
  const bool full = batch_size == 0 || batch_size >= n;
  std::vector<std::size_t> order = client.indices;
  std::vector<std::size_t> rows;
  for (std::size_t e = 0; e < epochs; ++e) {
    if (full) {
      fn(std::span<const std::size_t>(order));
      continue;
    }
    client.rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += batch_size) {
      const std::size_t end = std::min(n, start + batch_size);
      rows.assign(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
      fn(std::span<const std::size_t>(rows));
    }
  }
}

std::vector<double> weights_for(std::span<const std::size_t> sizes, Weighting weighting) {
  std::vector<double> w(sizes.size());
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    w[i] = weighting == Weighting::SampleSize ? static_cast<double>(sizes[i]) : 1.0;
  }
  return w;
}

void require_finite_params(const ParameterVector& p, std::size_t round) {
  if (!all_finite(p.values.span())) {
    throw NumericError("non-finite model parameters after round " + std::to_string(round));
  }
}

void fill_curvature(RoundReport& report, const ServerState& state) {
  report.curvature_min = state.curvature.any_pair ? state.curvature.ratio_min : kNaN;
  report.curvature_max = state.curvature.any_pair ? state.curvature.ratio_max : kNaN;
  report.skips = state.memory ? state.memory->skipped() : 0;
}

}  // namespace

std::string_view to_string(OptimizerKind kind) noexcept {
  switch (kind) {
    case OptimizerKind::FimLbfgs:
      return "fim-lbfgs";
    case OptimizerKind::FedAvgSgd:
      return "fedavg-sgd";
    case OptimizerKind::FedAvgAdam:
      return "fedavg-adam";
  }
  return "unknown";
}

OptimizerKind parse_optimizer_kind(std::string_view text) {
  if (text == "fim-lbfgs") return OptimizerKind::FimLbfgs;
  if (text == "fedavg-sgd") return OptimizerKind::FedAvgSgd;
  if (text == "fedavg-adam") return OptimizerKind::FedAvgAdam;
  throw ConfigError("unknown optimizer '" + std::string(text) + "' (expected fim-lbfgs, fedavg-sgd or fedavg-adam)");
}

std::string_view to_string(Weighting w) noexcept { return w == Weighting::SampleSize ? "sample-size" : "uniform"; }

Weighting parse_weighting(std::string_view text) {
  if (text == "sample-size") return Weighting::SampleSize;
  if (text == "uniform") return Weighting::Uniform;
  throw ConfigError("unknown weighting '" + std::string(text) + "' (expected sample-size or uniform)");
}

void RoundConfig::validate(std::size_t num_clients) const {
  if (!(participation > 0.0) || participation > 1.0) throw ConfigError("participation q must lie in (0, 1]");
  if (num_clients < 1) throw ConfigError("at least one client is required");
  if (participation * static_cast<double>(num_clients) < 1.0) {
    throw ConfigError("participation q*K must be >= 1 (q=" + std::to_string(participation) +
                      ", K=" + std::to_string(num_clients) + ")");
  }
  if (local_epochs < 1) throw ConfigError("local_epochs E must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be >= 0");
  if (optimizer == OptimizerKind::FimLbfgs) {
    if (!(learning_rate > 0.0)) throw ConfigError("fim-lbfgs learning_rate must be > 0");
    lbfgs().validate();
  }
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("adam eps must be positive");
}

OptimizerConfig RoundConfig::lbfgs() const {
  return OptimizerConfig{learning_rate, memory, cautious_eps, h0_mode, fim_damping};
}

ClientState::ClientState(std::size_t client_id, std::vector<std::size_t> local, std::uint64_t seed)
    : id(client_id), indices(std::move(local)), rng(RngSeed{seed, streams::kClientBase + client_id}) {}

std::vector<ClientState> make_clients(const PartitionPlan& plan, std::span<const std::size_t> shared,
                                      std::uint64_t seed) {
  std::vector<ClientState> clients;
  clients.reserve(plan.assignment.size());
  for (std::size_t k = 0; k < plan.assignment.size(); ++k) {
    std::vector<std::size_t> local = plan.assignment[k];
    local.insert(local.end(), shared.begin(), shared.end());
    clients.emplace_back(k, std::move(local), seed);
  }
  return clients;
}

void CommunicationLedger::record(const LedgerRecord& rec) {
  records_.push_back(rec);
  cumulative_ += rec.total();
}

std::uint64_t ceil_log2(std::uint64_t tau) noexcept {
  return tau <= 1 ? 0 : static_cast<std::uint64_t>(std::bit_width(tau - 1));
}

std::uint64_t comm_cost_proposed(std::uint64_t d, std::uint64_t tau, std::uint64_t m) {
  if (d < 1 || tau < 1 || m < 1) throw ConfigError("comm_cost_proposed: d, tau and m must be >= 1");
  const std::uint64_t gather = d * ceil_log2(tau);
  return d + gather + d + gather + (m * m + m) + (m + d);
}

std::uint64_t comm_cost_fedavg(std::uint64_t d, std::uint64_t k) {
  if (d < 1 || k < 1) throw ConfigError("comm_cost_fedavg: d and k must be >= 1");
  return k * d + d;
}

std::vector<std::size_t> sample_clients(std::size_t num_clients, double participation, RandomStream& rng) {
  if (num_clients == 0) throw DegenerateInputError("sample_clients: empty client set");
  if (!(participation > 0.0) || participation > 1.0) throw ConfigError("sample_clients: q must lie in (0, 1]");
  const auto wanted = static_cast<std::size_t>(std::llround(participation * static_cast<double>(num_clients)));
  const std::size_t count = std::clamp<std::size_t>(wanted, 1, num_clients);
  auto picked = rng.sample_without_replacement(num_clients, count);
  std::sort(picked.begin(), picked.end());
  return picked;
}

ClientUpdate client_update_sgd(const Dataset& data, ClientState& client, const ParameterVector& start,
                               std::size_t epochs, std::size_t batch_size, double learning_rate) {
  ParameterVector local = start;
  DenseVector grad;
  for_each_minibatch(client, epochs, batch_size, [&](std::span<const std::size_t> rows) {
    loss_and_gradient(local, data.batch(rows), grad);
    axpy(-learning_rate, grad.span(), local.values.span());
  });
  return ClientUpdate{client.id, subtract(local.values, start.values), client.num_samples()};
}

ClientUpdate client_update_adam(const Dataset& data, ClientState& client, const ParameterVector& start,
                                std::size_t epochs, std::size_t batch_size, double learning_rate, double beta1,
                                double beta2, double eps) {
  ParameterVector local = start;
  const std::size_t d = start.size();
  std::vector<double> m(d, 0.0), v(d, 0.0);
  double beta1_pow = 1.0, beta2_pow = 1.0;
  DenseVector grad;
  for_each_minibatch(client, epochs, batch_size, [&](std::span<const std::size_t> rows) {
    loss_and_gradient(local, data.batch(rows), grad);
    beta1_pow *= beta1;
    beta2_pow *= beta2;
    for (std::size_t j = 0; j < d; ++j) {
      m[j] = beta1 * m[j] + (1.0 - beta1) * grad[j];
      v[j] = beta2 * v[j] + (1.0 - beta2) * grad[j] * grad[j];
      const double m_hat = m[j] / (1.0 - beta1_pow);
      const double v_hat = v[j] / (1.0 - beta2_pow);
      local.values[j] -= learning_rate * m_hat / (std::sqrt(v_hat) + eps);
    }
  });
  return ClientUpdate{client.id, subtract(local.values, start.values), client.num_samples()};
}

FimClientResult client_update_fim(const Dataset& data, ClientState& client, const ParameterVector& params,
                                  std::size_t batch_size, double fim_damping) {
  if (client.indices.empty()) throw DegenerateInputError("client " + std::to_string(client.id) + " has no data");
  const std::vector<std::size_t> rows = full_or_sampled_batch(client, batch_size);
  const PerSampleGradients grads = per_sample_gradients(params, data.batch(rows));
  FimClientResult out;
  out.client_id = client.id;
  out.fim = fim_diagonal(grads, fim_damping);
  out.gradient = DenseVector(params.size());
  for (std::size_t i = 0; i < grads.grads.rows(); ++i) axpy(1.0, grads.grads.row(i), out.gradient.span());
  const double inv_b = 1.0 / static_cast<double>(grads.grads.rows());
  for (double& g : out.gradient) g *= inv_b;
  out.num_samples = client.num_samples();
  return out;
}

ParameterVector fedavg_aggregate(std::span<const ClientUpdate> updates, const ParameterVector& current,
                                 Weighting weighting) {
  if (updates.empty()) throw DegenerateInputError("fedavg_aggregate: no client updates");
  std::vector<const ClientUpdate*> sorted;
  sorted.reserve(updates.size());
  for (const auto& u : updates) sorted.push_back(&u);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->client_id < b->client_id; });

  std::vector<DenseVector> deltas;
  std::vector<std::size_t> sizes;
  for (const ClientUpdate* u : sorted) {
    deltas.push_back(u->delta);
    sizes.push_back(u->num_samples);
  }
  const auto weights = weights_for(sizes, weighting);
  const DenseVector mean_delta = weighted_average(deltas, weights);
  ParameterVector next = current;
  axpy(1.0, mean_delta.span(), next.values.span());
  return next;
}

ServerState make_server(const ParameterVector& initial, const RoundConfig& cfg) {
  ServerState state{initial, 0, std::nullopt, {}, {}};
  if (cfg.optimizer == OptimizerKind::FimLbfgs) state.memory.emplace(cfg.memory, cfg.h0_mode);
  return state;
}

FimStep fim_lbfgs_step(const Dataset& data, std::span<ClientState*> participants, ParameterVector& params,
                       LbfgsMemory& memory, CurvatureStats& stats, const RoundConfig& cfg, std::size_t tau) {
  if (participants.empty()) throw DegenerateInputError("fim_lbfgs_step: no participants");
  const std::uint64_t d = params.size();
  const std::uint64_t m = cfg.memory;
  const std::uint64_t log_tau = ceil_log2(tau);
  FimStep step;

  // Broadcast w_t; clients return batch gradients and FIM diagonals.
  step.ledger.scalars_broadcast += d;
  std::vector<FimClientResult> results;
  results.reserve(participants.size());
  for (ClientState* c : participants) results.push_back(client_update_fim(data, *c, params, cfg.batch_size, cfg.fim_damping));
  std::sort(results.begin(), results.end(), [](const auto& a, const auto& b) { return a.client_id < b.client_id; });
  step.ledger.scalars_gathered += d * log_tau;

  std::vector<DenseVector> grads;
  std::vector<FimDiagonal> fims;
  std::vector<std::size_t> sizes;
  for (auto& r : results) {
    grads.push_back(r.gradient);
    fims.push_back(std::move(r.fim));
    sizes.push_back(r.num_samples);
  }
  step.gradient = weighted_average(grads, weights_for(sizes, cfg.gradient_weighting));
  step.direction = two_loop_direction(memory, step.gradient);

  DenseVector s = scaled(step.direction, cfg.learning_rate);
  axpy(1.0, s.span(), params.values.span());

  // Broadcast s_t; clients return B s_t, reduced to the aggregated product.
  step.ledger.scalars_broadcast += d;
  const FimDiagonal agg = aggregate_fim(fims, weights_for(sizes, cfg.fim_weighting));
  step.ledger.scalars_gathered += d * log_tau;
  for (double v : agg.diag) {
    stats.fim_max = stats.any_fim ? std::max(stats.fim_max, v) : v;
    stats.fim_min = stats.any_fim ? std::min(stats.fim_min, v) : v;
    stats.any_fim = true;
  }
  DenseVector y = smooth_y(agg, s);
  const bool nonzero_step = squared_norm(s.span()) > 0.0;
  const double ratio = nonzero_step && dot(y.span(), s.span()) > 0.0 ? curvature_ratio(s, y) : kNaN;

  step.pair_accepted = memory.push(std::move(s), std::move(y), cfg.cautious_eps);
  if (step.pair_accepted) {
    stats.ratio_min = stats.any_pair ? std::min(stats.ratio_min, ratio) : ratio;
    stats.ratio_max = stats.any_pair ? std::max(stats.ratio_max, ratio) : ratio;
    stats.any_pair = true;
  }
  stats.stored_cautious_min = std::numeric_limits<double>::infinity();
  for (const CurvaturePair& p : memory.pairs()) {
    stats.stored_cautious_min = std::min(stats.stored_cautious_min, dot(p.y.span(), p.s.span()) / squared_norm(p.s.span()));
  }
  step.ledger.pair_maintenance_scalars += m * m + m;
  step.ledger.search_scalars += m + d;
  return step;
}

RoundReport server_fim_lbfgs_round(ServerState& state, std::vector<ClientState>& clients, const Dataset& data,
                                   const RoundConfig& cfg, RandomStream& sampler) {
  if (cfg.optimizer != OptimizerKind::FimLbfgs || !state.memory) {
    throw ConfigError("server_fim_lbfgs_round requires the fim-lbfgs optimizer");
  }
  const auto chosen = sample_clients(clients.size(), cfg.participation, sampler);
  std::vector<ClientState*> participants;
  for (std::size_t id : chosen) participants.push_back(&clients[id]);
  const std::size_t tau = cfg.tau == 0 ? participants.size() : cfg.tau;

  ++state.round;
  FimStep step = fim_lbfgs_step(data, participants, state.params, *state.memory, state.curvature, cfg, tau);
  step.ledger.round = state.round;
  state.ledger.record(step.ledger);
  require_finite_params(state.params, state.round);

  RoundReport report;
  report.round = state.round;
  report.comm_scalars_round = step.ledger.total();
  report.comm_scalars_cum = state.ledger.cumulative_total();
  fill_curvature(report, state);
  return report;
}

RoundReport server_fedavg_round(ServerState& state, std::vector<ClientState>& clients, const Dataset& data,
                                const RoundConfig& cfg, RandomStream& sampler) {
  if (cfg.optimizer == OptimizerKind::FimLbfgs) throw ConfigError("server_fedavg_round: wrong optimizer");
  const auto chosen = sample_clients(clients.size(), cfg.participation, sampler);
  const std::uint64_t d = state.params.size();

  ++state.round;
  LedgerRecord rec;
  rec.round = state.round;
  rec.scalars_broadcast += d;
  std::vector<ClientUpdate> updates;
  updates.reserve(chosen.size());
  for (std::size_t id : chosen) {
    ClientState& c = clients[id];
    if (cfg.optimizer == OptimizerKind::FedAvgSgd) {
      updates.push_back(client_update_sgd(data, c, state.params, cfg.local_epochs, cfg.batch_size, cfg.learning_rate));
    } else {
      updates.push_back(client_update_adam(data, c, state.params, cfg.local_epochs, cfg.batch_size,
                                           cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps));
    }
    rec.scalars_gathered += d;
  }
  state.params = fedavg_aggregate(updates, state.params, cfg.fedavg_weighting);
  state.ledger.record(rec);
  require_finite_params(state.params, state.round);

  RoundReport report;
  report.round = state.round;
  report.comm_scalars_round = rec.total();
  report.comm_scalars_cum = state.ledger.cumulative_total();
  fill_curvature(report, state);
  return report;
}

bool EarlyStop::observe(double accuracy) {
  if (!opts_.target_accuracy) return false;
  streak_ = accuracy >= *opts_.target_accuracy - opts_.target_tolerance ? streak_ + 1 : 0;
  return streak_ >= std::max<std::size_t>(opts_.patience, 1);
}

std::vector<RoundReport> run_experiment(const RoundConfig& cfg, const ExperimentInputs& inputs,
                                        const RunOptions& opts, std::uint64_t seed) {
  if (inputs.train == nullptr || inputs.test == nullptr) throw ConfigError("run_experiment: missing dataset");
  const Dataset& train = *inputs.train;
  const Dataset& test = *inputs.test;
  cfg.validate(inputs.plan.num_clients);
  inputs.model.validate();
  if (opts.eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (train.input_dim() != inputs.model.input_dim || test.input_dim() != inputs.model.input_dim) {
    throw ConfigError("dataset input_dim does not match the model");
  }

  const auto started = std::chrono::steady_clock::now();
  auto elapsed_ms = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  };

  RandomStream init_rng(RngSeed{seed, streams::kInit});
  RandomStream sampler(RngSeed{seed, streams::kClientSampling});
  ServerState state = make_server(init_parameters(inputs.model, init_rng), cfg);
  std::vector<ClientState> clients = make_clients(inputs.plan, inputs.shared, seed);
  EarlyStop stop(opts);

  std::vector<RoundReport> reports;
  auto evaluate = [&](RoundReport report) {
    report.train_loss = forward_loss(state.params, train.batch());
    if (!std::isfinite(report.train_loss)) {
      throw NumericError("training loss became non-finite at round " + std::to_string(report.round));
    }
    report.eval_accuracy = accuracy(state.params, *test.features, test.labels);
    report.elapsed_ms = elapsed_ms();
    reports.push_back(report);
    if (opts.sink) opts.sink(report);
    return stop.observe(report.eval_accuracy);
  };

  RoundReport initial;
  fill_curvature(initial, state);
  evaluate(initial);

  for (std::size_t t = 1; t <= cfg.rounds; ++t) {
    RoundReport report = cfg.optimizer == OptimizerKind::FimLbfgs
                             ? server_fim_lbfgs_round(state, clients, train, cfg, sampler)
                             : server_fedavg_round(state, clients, train, cfg, sampler);
    if (t % opts.eval_every == 0 || t == cfg.rounds) {
      if (evaluate(report)) break;
    }
  }
  return reports;
}

}  // namespace fedfim
