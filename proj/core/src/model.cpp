#include "fedfim/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedfim/error.hpp"

namespace fedfim {

namespace {

double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + e^z) without overflow.
double softplus(double z) noexcept {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

struct Workspace {
  std::vector<double> hidden_pre;
  std::vector<double> hidden;
  std::vector<double> logits;
  std::vector<double> dlogits;
  std::vector<double> dhidden;

  explicit Workspace(const ModelSpec& spec)
      : hidden_pre(spec.hidden_dim), hidden(spec.hidden_dim), logits(spec.num_classes),
        dlogits(spec.num_classes), dhidden(spec.hidden_dim) {}
};

// z_c = W[c] . x + b[c] over a row-major weight block followed by the bias.
void affine(std::span<const double> weights, std::span<const double> bias, std::span<const double> x,
            std::span<double> out) {
  const std::size_t in = x.size();
  for (std::size_t c = 0; c < out.size(); ++c) {
    const double* w = weights.data() + c * in;
    double acc = bias[c];
    for (std::size_t j = 0; j < in; ++j) acc += w[j] * x[j];
    out[c] = acc;
  }
}

// Returns log-sum-exp and overwrites `logits` with softmax probabilities.
double softmax_in_place(std::span<double> logits) noexcept {
  const double peak = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double& z : logits) {
    z = std::exp(z - peak);
    total += z;
  }
  for (double& z : logits) z /= total;
  return peak + std::log(total);
}

void check_label(const ModelSpec& spec, int y) {
  if (y < 0 || static_cast<std::size_t>(y) >= spec.num_classes) {
    throw DimensionError("label " + std::to_string(y) + " outside [0, " +
                         std::to_string(spec.num_classes) + ")");
  }
}

void check_batch(const ParameterVector& params, const SampleBatch& batch) {
  params.spec.validate();
  if (params.values.size() != params.spec.parameter_count()) {
    throw DimensionError("parameter vector has " + std::to_string(params.values.size()) +
                         " entries, spec needs " + std::to_string(params.spec.parameter_count()));
  }
  if (batch.input_dim() != params.spec.input_dim) {
    throw DimensionError("batch input_dim " + std::to_string(batch.input_dim()) +
                         " does not match model input_dim " + std::to_string(params.spec.input_dim));
  }
  if (batch.size() == 0) throw DegenerateInputError("empty sample batch");
  for (std::size_t i = 0; i < batch.size(); ++i) check_label(params.spec, batch.y(i));
}

// Loss of one sample; adds scale * gradient into `grad` when it is non-empty.
double sample_loss(const ModelSpec& spec, std::span<const double> w, std::span<const double> x, int y,
                   std::span<double> grad, double scale, Workspace& ws) {
  const std::size_t in = spec.input_dim;
  const bool want_grad = !grad.empty();

  switch (spec.kind) {
    case ModelKind::BinaryLogistic: {
      double z = w[in];
      for (std::size_t j = 0; j < in; ++j) z += w[j] * x[j];
      const double target = static_cast<double>(y);
      if (want_grad) {
        const double coef = scale * (sigmoid(z) - target);
        for (std::size_t j = 0; j < in; ++j) grad[j] += coef * x[j];
        grad[in] += coef;
      }
      return softplus(z) - target * z;
    }
    case ModelKind::SoftmaxRegression: {
      const std::size_t classes = spec.num_classes;
      std::span<double> z(ws.logits);
      affine(w.subspan(0, classes * in), w.subspan(classes * in, classes), x, z);
      const double logit_y = z[static_cast<std::size_t>(y)];
      const double lse = softmax_in_place(z);
      if (want_grad) {
        for (std::size_t c = 0; c < classes; ++c) {
          const double coef = scale * (z[c] - (static_cast<int>(c) == y ? 1.0 : 0.0));
          double* g = grad.data() + c * in;
          for (std::size_t j = 0; j < in; ++j) g[j] += coef * x[j];
          grad[classes * in + c] += coef;
        }
      }
      return lse - logit_y;
    }
    case ModelKind::Mlp1: {
      const std::size_t hid = spec.hidden_dim;
      const std::size_t classes = spec.num_classes;
      const std::size_t w1_off = 0;
      const std::size_t b1_off = hid * in;
      const std::size_t w2_off = b1_off + hid;
      const std::size_t b2_off = w2_off + classes * hid;

      affine(w.subspan(w1_off, hid * in), w.subspan(b1_off, hid), x, ws.hidden_pre);
      for (std::size_t h = 0; h < hid; ++h) ws.hidden[h] = ws.hidden_pre[h] > 0.0 ? ws.hidden_pre[h] : 0.0;
      std::span<double> z(ws.logits);
      affine(w.subspan(w2_off, classes * hid), w.subspan(b2_off, classes), ws.hidden, z);
      const double logit_y = z[static_cast<std::size_t>(y)];
      const double lse = softmax_in_place(z);
      if (want_grad) {
        std::fill(ws.dhidden.begin(), ws.dhidden.end(), 0.0);
        for (std::size_t c = 0; c < classes; ++c) {
          const double dz = z[c] - (static_cast<int>(c) == y ? 1.0 : 0.0);
          const double* w2 = w.data() + w2_off + c * hid;
          double* g2 = grad.data() + w2_off + c * hid;
          for (std::size_t h = 0; h < hid; ++h) {
            g2[h] += scale * dz * ws.hidden[h];
            ws.dhidden[h] += w2[h] * dz;
          }
          grad[b2_off + c] += scale * dz;
        }
        for (std::size_t h = 0; h < hid; ++h) {
          // ReLU subgradient at exactly zero is taken as 0.
          if (!(ws.hidden_pre[h] > 0.0)) continue;
          const double coef = scale * ws.dhidden[h];
          double* g1 = grad.data() + w1_off + h * in;
          for (std::size_t j = 0; j < in; ++j) g1[j] += coef * x[j];
          grad[b1_off + h] += coef;
        }
      }
      return lse - logit_y;
    }
  }
  return 0.0;
}

}  // namespace

std::string_view to_string(ModelKind kind) noexcept {
  switch (kind) {
    case ModelKind::BinaryLogistic:
      return "binary-logistic";
    case ModelKind::SoftmaxRegression:
      return "softmax-regression";
    case ModelKind::Mlp1:
      return "mlp1";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view text) {
  if (text == "binary-logistic") return ModelKind::BinaryLogistic;
  if (text == "softmax-regression") return ModelKind::SoftmaxRegression;
  if (text == "mlp1") return ModelKind::Mlp1;
  throw ConfigError("unknown model kind '" + std::string(text) +
                    "' (expected binary-logistic, softmax-regression or mlp1)");
}

ModelSpec ModelSpec::binary_logistic(std::size_t input_dim) {
  return ModelSpec{ModelKind::BinaryLogistic, input_dim, 2, 0};
}

ModelSpec ModelSpec::softmax_regression(std::size_t input_dim, std::size_t num_classes) {
  return ModelSpec{ModelKind::SoftmaxRegression, input_dim, num_classes, 0};
}

ModelSpec ModelSpec::mlp1(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_classes) {
  return ModelSpec{ModelKind::Mlp1, input_dim, num_classes, hidden_dim};
}

std::size_t ModelSpec::parameter_count() const noexcept {
  switch (kind) {
    case ModelKind::BinaryLogistic:
      return input_dim + 1;
    case ModelKind::SoftmaxRegression:
      return num_classes * (input_dim + 1);
    case ModelKind::Mlp1:
      return hidden_dim * (input_dim + 1) + num_classes * (hidden_dim + 1);
  }
  return 0;
}

void ModelSpec::validate() const {
  if (input_dim == 0) throw ConfigError("model input_dim must be >= 1");
  if (num_classes < 2) throw ConfigError("model num_classes must be >= 2");
  if (kind == ModelKind::BinaryLogistic && num_classes != 2) {
    throw ConfigError("binary-logistic model must have num_classes == 2");
  }
  if (kind == ModelKind::Mlp1 && hidden_dim == 0) throw ConfigError("mlp1 hidden_dim must be >= 1");
}

ParameterVector::ParameterVector(ModelSpec s, DenseVector v) : spec(s), values(std::move(v)) {
  if (values.size() != spec.parameter_count()) {
    throw DimensionError("parameter vector length " + std::to_string(values.size()) +
                         " does not match spec (" + std::to_string(spec.parameter_count()) + ")");
  }
}

ParameterVector::ParameterVector(ModelSpec s) : spec(s), values(s.parameter_count()) {}

ParameterVector init_parameters(const ModelSpec& spec, RandomStream& rng) {
  spec.validate();
  ParameterVector p(spec);
  auto fill = [&](std::size_t offset, std::size_t count, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < count; ++i) p.values[offset + i] = rng.uniform(-bound, bound);
  };
  const std::size_t in = spec.input_dim;
  switch (spec.kind) {
    case ModelKind::BinaryLogistic:
      fill(0, in + 1, in);
      break;
    case ModelKind::SoftmaxRegression:
      fill(0, spec.num_classes * (in + 1), in);
      break;
    case ModelKind::Mlp1: {
      const std::size_t hid = spec.hidden_dim;
      fill(0, hid * (in + 1), in);
      fill(hid * (in + 1), spec.num_classes * (hid + 1), hid);
      break;
    }
  }
  return p;
}

SampleBatch::SampleBatch(const DenseMatrix& features, std::span<const int> labels)
    : features_(&features), labels_(labels), all_rows_(true) {
  if (labels.size() != features.rows()) {
    throw DimensionError("batch has " + std::to_string(features.rows()) + " rows but " +
                         std::to_string(labels.size()) + " labels");
  }
}

SampleBatch::SampleBatch(const DenseMatrix& features, std::span<const int> labels,
                         std::span<const std::size_t> rows)
    : features_(&features), labels_(labels), rows_(rows), all_rows_(false) {
  if (labels.size() != features.rows()) {
    throw DimensionError("batch has " + std::to_string(features.rows()) + " rows but " +
                         std::to_string(labels.size()) + " labels");
  }
  for (std::size_t r : rows) {
    if (r >= features.rows()) throw DimensionError("batch row index out of range");
  }
}

double forward_loss(const ParameterVector& params, const SampleBatch& batch) {
  check_batch(params, batch);
  Workspace ws(params.spec);
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    total += sample_loss(params.spec, params.values.span(), batch.x(i), batch.y(i), {}, 0.0, ws);
  }
  return total / static_cast<double>(batch.size());
}

double loss_and_gradient(const ParameterVector& params, const SampleBatch& batch, DenseVector& grad) {
  check_batch(params, batch);
  Workspace ws(params.spec);
  grad = DenseVector(params.size());
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    total += sample_loss(params.spec, params.values.span(), batch.x(i), batch.y(i), grad.span(), inv_b, ws);
  }
  return total * inv_b;
}

DenseVector batch_gradient(const ParameterVector& params, const SampleBatch& batch) {
  DenseVector grad;
  loss_and_gradient(params, batch, grad);
  return grad;
}

PerSampleGradients per_sample_gradients(const ParameterVector& params, const SampleBatch& batch) {
  check_batch(params, batch);
  Workspace ws(params.spec);
  PerSampleGradients out{DenseMatrix(batch.size(), params.size())};
  for (std::size_t i = 0; i < batch.size(); ++i) {
    sample_loss(params.spec, params.values.span(), batch.x(i), batch.y(i), out.grads.row(i), 1.0, ws);
  }
  return out;
}

DenseMatrix predict_proba(const ParameterVector& params, const DenseMatrix& features) {
  const ModelSpec& spec = params.spec;
  spec.validate();
  if (features.cols() != spec.input_dim) {
    throw DimensionError("feature dim " + std::to_string(features.cols()) +
                         " does not match model input_dim " + std::to_string(spec.input_dim));
  }
  if (params.values.size() != spec.parameter_count()) throw DimensionError("parameter vector length mismatch");

  const std::size_t in = spec.input_dim;
  const std::span<const double> w = params.values.span();
  DenseMatrix out(features.rows(), spec.num_classes);
  Workspace ws(spec);
  for (std::size_t r = 0; r < features.rows(); ++r) {
    const auto x = features.row(r);
    auto probs = out.row(r);
    switch (spec.kind) {
      case ModelKind::BinaryLogistic: {
        double z = w[in];
        for (std::size_t j = 0; j < in; ++j) z += w[j] * x[j];
        probs[0] = sigmoid(-z);
        probs[1] = sigmoid(z);
        break;
      }
      case ModelKind::SoftmaxRegression: {
        const std::size_t classes = spec.num_classes;
        affine(w.subspan(0, classes * in), w.subspan(classes * in, classes), x, probs);
        softmax_in_place(probs);
        break;
      }
      case ModelKind::Mlp1: {
        const std::size_t hid = spec.hidden_dim;
        const std::size_t classes = spec.num_classes;
        affine(w.subspan(0, hid * in), w.subspan(hid * in, hid), x, ws.hidden_pre);
        for (std::size_t h = 0; h < hid; ++h) ws.hidden[h] = std::max(ws.hidden_pre[h], 0.0);
        const std::size_t w2_off = hid * (in + 1);
        affine(w.subspan(w2_off, classes * hid), w.subspan(w2_off + classes * hid, classes), ws.hidden, probs);
        softmax_in_place(probs);
        break;
      }
    }
  }
  return out;
}

std::vector<int> predict_class(const ParameterVector& params, const DenseMatrix& features) {
  const DenseMatrix probs = predict_proba(params, features);
  std::vector<int> out(probs.rows());
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    const auto row = probs.row(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

double accuracy(const ParameterVector& params, const DenseMatrix& features, std::span<const int> labels) {
  if (labels.size() != features.rows()) throw DimensionError("accuracy: label count mismatch");
  if (labels.empty()) throw DegenerateInputError("accuracy: empty evaluation set");
  const std::vector<int> predicted = predict_class(params, features);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predicted[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

}  // namespace fedfim
