#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "fedfim/data.hpp"
#include "fedfim/fim_lbfgs.hpp"
#include "fedfim/model.hpp"
#include "fedfim/rng.hpp"

namespace fedfim {

enum class OptimizerKind { FimLbfgs, FedAvgSgd, FedAvgAdam };
enum class Weighting { SampleSize, Uniform };

std::string_view to_string(OptimizerKind kind) noexcept;
OptimizerKind parse_optimizer_kind(std::string_view text);
std::string_view to_string(Weighting w) noexcept;
Weighting parse_weighting(std::string_view text);

/// Per-round protocol settings.
struct RoundConfig {
  double participation = 0.2;  // q
  std::size_t local_epochs = 5;  // E
  std::size_t batch_size = 15;  // B; 0 means the whole local set
  double learning_rate = 0.05;  // eta
  OptimizerKind optimizer = OptimizerKind::FedAvgSgd;
  std::size_t rounds = 50;  // T
  std::size_t tau = 0;  // cost-model client count; 0 means "participants this round"
  std::size_t memory = 10;  // m
  double cautious_eps = 1e-8;
  double fim_damping = 1e-6;
  H0Mode h0_mode = H0Mode::GammaScaled;
  Weighting gradient_weighting = Weighting::SampleSize;
  Weighting fim_weighting = Weighting::Uniform;
  Weighting fedavg_weighting = Weighting::SampleSize;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  /// Throws ConfigError.
  void validate(std::size_t num_clients) const;
  OptimizerConfig lbfgs() const;
};

/// A client: its local sample indices and its private random stream.
struct ClientState {
  std::size_t id = 0;
  std::vector<std::size_t> indices;
  RandomStream rng;

  ClientState(std::size_t client_id, std::vector<std::size_t> local, std::uint64_t seed);
  std::size_t num_samples() const noexcept { return indices.size(); }
};

std::vector<ClientState> make_clients(const PartitionPlan& plan, std::span<const std::size_t> shared,
                                      std::uint64_t seed);

struct ClientUpdate {
  std::size_t client_id = 0;
  DenseVector delta;
  std::size_t num_samples = 0;
};

struct FimClientResult {
  std::size_t client_id = 0;
  FimDiagonal fim;
  DenseVector gradient;
  std::size_t num_samples = 0;
};

/// Exact per-round scalar tallies. Each protocol step adds to one field.
struct LedgerRecord {
  std::size_t round = 0;
  std::uint64_t scalars_broadcast = 0;
  std::uint64_t scalars_gathered = 0;
  std::uint64_t pair_maintenance_scalars = 0;
  std::uint64_t search_scalars = 0;

  std::uint64_t total() const noexcept {
    return scalars_broadcast + scalars_gathered + pair_maintenance_scalars + search_scalars;
  }
};

class CommunicationLedger {
 public:
  void record(const LedgerRecord& rec);
  const std::vector<LedgerRecord>& records() const noexcept { return records_; }
  std::uint64_t cumulative_total() const noexcept { return cumulative_; }

 private:
  std::vector<LedgerRecord> records_;
  std::uint64_t cumulative_ = 0;
};

/// ceil(log2(tau)) for tau >= 1.
std::uint64_t ceil_log2(std::uint64_t tau) noexcept;

/// Per-round cost of the FIM-L-BFGS protocol in 64-bit scalars:
/// broadcast w (d) + gather gradients (d*ceil(log2 tau)) + broadcast s (d)
/// + gather FIM products (d*ceil(log2 tau)) + pair maintenance (m^2 + m)
/// + search (m + d).
std::uint64_t comm_cost_proposed(std::uint64_t d, std::uint64_t tau, std::uint64_t m);
/// Per-round cost of FedAvg: broadcast d + gather k*d.
std::uint64_t comm_cost_fedavg(std::uint64_t d, std::uint64_t k);

/// Uniform sample without replacement of max(1, round(q*K)) client ids,
/// returned in ascending order.
std::vector<std::size_t> sample_clients(std::size_t num_clients, double participation, RandomStream& rng);

/// E epochs of shuffled mini-batch SGD from `start`. A batch size of 0 or
/// >= n_k runs plain gradient descent on the whole local set in index order.
ClientUpdate client_update_sgd(const Dataset& data, ClientState& client, const ParameterVector& start,
                               std::size_t epochs, std::size_t batch_size, double learning_rate);

/// As client_update_sgd with Adam; moments start at zero every call.
ClientUpdate client_update_adam(const Dataset& data, ClientState& client, const ParameterVector& start,
                                std::size_t epochs, std::size_t batch_size, double learning_rate,
                                double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

/// Draws a stochastic batch S_t^k of size B (the whole set when B is 0 or
/// >= n_k) and returns its FIM diagonal and mean gradient at `params`.
FimClientResult client_update_fim(const Dataset& data, ClientState& client, const ParameterVector& params,
                                  std::size_t batch_size, double fim_damping);

/// w + sum_k (n_k / n) delta_k, reduced in ascending client id order.
ParameterVector fedavg_aggregate(std::span<const ClientUpdate> updates, const ParameterVector& current,
                                 Weighting weighting = Weighting::SampleSize);

/// Curvature bookkeeping shared by every FIM-L-BFGS driven model.
struct CurvatureStats {
  double ratio_min = 0.0;  // over every accepted pair so far
  double ratio_max = 0.0;
  double fim_max = 0.0;  // largest aggregated FIM entry observed
  double fim_min = 0.0;  // smallest aggregated FIM entry observed
  double stored_cautious_min = 0.0;  // min over stored pairs of y.s / |s|^2
  bool any_pair = false;
  bool any_fim = false;
};

struct ServerState {
  ParameterVector params;
  std::size_t round = 0;
  std::optional<LbfgsMemory> memory;
  CommunicationLedger ledger;
  CurvatureStats curvature;
};

ServerState make_server(const ParameterVector& initial, const RoundConfig& cfg);

/// Outcome of one FIM-L-BFGS step over a fixed participant set.
struct FimStep {
  DenseVector gradient;
  DenseVector direction;
  bool pair_accepted = false;
  LedgerRecord ledger;
};

/// Gradient aggregation, two-loop direction, parameter step, y = B s from the
/// aggregated FIM, cautious memory update and the ledger tally for one
/// round. `tau` is the cost-model client count.
FimStep fim_lbfgs_step(const Dataset& data, std::span<ClientState*> participants, ParameterVector& params,
                       LbfgsMemory& memory, CurvatureStats& stats, const RoundConfig& cfg, std::size_t tau);

struct RoundReport {
  std::size_t round = 0;
  double train_loss = 0.0;
  double eval_accuracy = 0.0;
  std::uint64_t comm_scalars_round = 0;
  std::uint64_t comm_scalars_cum = 0;
  double curvature_min = 0.0;  // NaN until a pair is stored
  double curvature_max = 0.0;
  std::size_t skips = 0;
  double elapsed_ms = 0.0;
};

/// One FIM-L-BFGS communication round with client sampling.
RoundReport server_fim_lbfgs_round(ServerState& state, std::vector<ClientState>& clients, const Dataset& data,
                                   const RoundConfig& cfg, RandomStream& sampler);

/// One FedAvg round (SGD or Adam local solver).
RoundReport server_fedavg_round(ServerState& state, std::vector<ClientState>& clients, const Dataset& data,
                                const RoundConfig& cfg, RandomStream& sampler);

struct ExperimentInputs {
  ModelSpec model;
  const Dataset* train = nullptr;
  const Dataset* test = nullptr;
  PartitionPlan plan;
  std::vector<std::size_t> shared;  // appended to every client's local view
};

struct RunOptions {
  std::size_t eval_every = 1;
  std::optional<double> target_accuracy;
  double target_tolerance = 0.0;
  std::size_t patience = 3;
  std::function<void(const RoundReport&)> sink;
};

/// Tracks the early-stop rule: accuracy >= target - tolerance for
/// `patience` consecutive evaluations.
class EarlyStop {
 public:
  explicit EarlyStop(const RunOptions& opts) : opts_(opts) {}
  bool observe(double accuracy);

 private:
  const RunOptions& opts_;
  std::size_t streak_ = 0;
};

/// Runs T rounds of FedAvg or FIM-L-BFGS and returns one report per
/// evaluation point, starting with the initial model at round 0. Throws
/// NumericError as soon as the training loss or parameters stop being finite.
std::vector<RoundReport> run_experiment(const RoundConfig& cfg, const ExperimentInputs& inputs,
                                        const RunOptions& opts, std::uint64_t seed);

}  // namespace fedfim
