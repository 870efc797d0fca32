#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedfim/numerics.hpp"
#include "fedfim/rng.hpp"

namespace fedfim {

enum class ModelKind { BinaryLogistic, SoftmaxRegression, Mlp1 };

std::string_view to_string(ModelKind kind) noexcept;
/// Accepts "binary-logistic", "softmax-regression", "mlp1".
ModelKind parse_model_kind(std::string_view text);

/// Architecture of a classifier. The parameter count is a pure function of
/// the spec.
///
/// Parameter layouts (row-major):
///   binary-logistic:    w[input_dim], b
///   softmax-regression: W[num_classes][input_dim], b[num_classes]
///   mlp1:               W1[hidden][input_dim], b1[hidden],
///                       W2[num_classes][hidden], b2[num_classes]
struct ModelSpec {
  ModelKind kind = ModelKind::SoftmaxRegression;
  std::size_t input_dim = 1;
  std::size_t num_classes = 2;
  std::size_t hidden_dim = 0;  // mlp1 only; activation is ReLU

  static ModelSpec binary_logistic(std::size_t input_dim);
  static ModelSpec softmax_regression(std::size_t input_dim, std::size_t num_classes);
  static ModelSpec mlp1(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_classes);

  std::size_t parameter_count() const noexcept;
  /// Throws ConfigError when the spec is unusable.
  void validate() const;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Model weights tagged with the architecture they belong to.
struct ParameterVector {
  ModelSpec spec;
  DenseVector values;

  ParameterVector() = default;
  ParameterVector(ModelSpec s, DenseVector v);
  /// All-zero parameters.
  explicit ParameterVector(ModelSpec s);

  std::size_t size() const noexcept { return values.size(); }
};

/// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for every layer, biases
/// included.
ParameterVector init_parameters(const ModelSpec& spec, RandomStream& rng);

/// Non-owning view of b samples: rows of a feature matrix plus their labels.
/// Without an explicit row list every row is used. The referenced storage
/// must outlive the view.
class SampleBatch {
 public:
  SampleBatch(const DenseMatrix& features, std::span<const int> labels);
  SampleBatch(const DenseMatrix& features, std::span<const int> labels,
              std::span<const std::size_t> rows);

  std::size_t size() const noexcept { return all_rows_ ? features_->rows() : rows_.size(); }
  std::size_t input_dim() const noexcept { return features_->cols(); }
  std::span<const double> x(std::size_t i) const noexcept { return features_->row(row_index(i)); }
  int y(std::size_t i) const noexcept { return labels_[row_index(i)]; }

 private:
  std::size_t row_index(std::size_t i) const noexcept { return all_rows_ ? i : rows_[i]; }

  const DenseMatrix* features_;
  std::span<const int> labels_;
  std::span<const std::size_t> rows_;
  bool all_rows_;
};

/// Row i is the gradient of sample i's loss (not averaged).
struct PerSampleGradients {
  DenseMatrix grads;
};

/// Mean negative log-likelihood over the batch.
double forward_loss(const ParameterVector& params, const SampleBatch& batch);
/// Mean gradient over the batch.
DenseVector batch_gradient(const ParameterVector& params, const SampleBatch& batch);
/// Loss and mean gradient in one pass.
double loss_and_gradient(const ParameterVector& params, const SampleBatch& batch, DenseVector& grad);
PerSampleGradients per_sample_gradients(const ParameterVector& params, const SampleBatch& batch);
/// b x num_classes matrix of class probabilities. For binary-logistic the
/// columns are (P(y=0), P(y=1)).
DenseMatrix predict_proba(const ParameterVector& params, const DenseMatrix& features);
/// argmax of predict_proba per row, ties to the lowest class id.
std::vector<int> predict_class(const ParameterVector& params, const DenseMatrix& features);

/// Fraction of rows whose predicted class equals the label.
double accuracy(const ParameterVector& params, const DenseMatrix& features, std::span<const int> labels);

}  // namespace fedfim
