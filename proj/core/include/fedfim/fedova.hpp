#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "fedfim/data.hpp"
#include "fedfim/federation.hpp"
#include "fedfim/model.hpp"

namespace fedfim {

/// n binary classifiers; component i scores "class i" against the rest.
struct OvaEnsemble {
  std::size_t num_classes = 0;
  std::vector<ParameterVector> components;

  /// Binary positive-class probability of every component: b x n.
  DenseMatrix confidences(const DenseMatrix& features) const;
};

/// Parameters returned for classifier `classifier_id` by the members of
/// its group in one round.
struct ClassifierGroup {
  std::size_t classifier_id = 0;
  std::vector<std::size_t> members;
  std::vector<ParameterVector> returned;
};

/// How a component's group result becomes the next global component.
enum class OvaUpdate { Average, FimLbfgs };

std::string_view to_string(OvaUpdate u) noexcept;
OvaUpdate parse_ova_update(std::string_view text);

/// Labels become 1 where they equal `class_id`, else 0. Features are shared.
Dataset binary_relabel(const Dataset& dataset, std::size_t class_id);

/// Classifier ids a client trains: exactly the distinct labels it holds,
/// ascending.
std::vector<std::size_t> select_components(std::span<const int> client_labels);

/// Distinct labels among `indices`, ascending.
std::vector<int> local_label_set(const Dataset& dataset, std::span<const std::size_t> indices);

/// Unweighted mean of each non-empty group's returned parameters; components
/// without a group are left untouched.
void group_aggregate(OvaEnsemble& ensemble, std::span<const ClassifierGroup> groups);

/// argmax_i of component i's positive-class probability, ties to the lowest
/// class id.
std::vector<int> ensemble_predict(const OvaEnsemble& ensemble, const DenseMatrix& features);

double ensemble_accuracy(const OvaEnsemble& ensemble, const DenseMatrix& features, std::span<const int> labels);

struct FedOvaConfig {
  RoundConfig round;  // optimizer field is ignored; `update` decides
  OvaUpdate update = OvaUpdate::Average;
  /// Subsample each client's negatives to at most its positive count.
  bool balanced = false;
};

/// Initial ensemble: component i drawn from (seed, kInit) in class order.
OvaEnsemble init_ensemble(const ModelSpec& component, std::size_t num_classes, std::uint64_t seed);

/// FedOVA training loop. `inputs.model` is the component architecture and
/// must be binary (two outputs). Reports start at round 0.
std::vector<RoundReport> run_fedova(const FedOvaConfig& cfg, const ExperimentInputs& inputs, const RunOptions& opts,
                                    std::uint64_t seed);

}  // namespace fedfim
