#include "fedfim/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedfim/error.hpp"

namespace fedfim {

namespace {

void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " +
                         std::to_string(b) + ")");
  }
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionError("DenseMatrix: data length " + std::to_string(data_.size()) +
                         " does not match " + std::to_string(rows_) + "x" + std::to_string(cols_));
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n, double scale) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = scale;
  return m;
}

double dot(std::span<const double> a, std::span<const double> b) {
  require_same_size(a.size(), b.size(), "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double squared_norm(std::span<const double> a) {
  double acc = 0.0;
  for (double v : a) acc += v * v;
  return acc;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  require_same_size(x.size(), y.size(), "axpy");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

DenseVector subtract(const DenseVector& a, const DenseVector& b) {
  require_same_size(a.size(), b.size(), "subtract");
  DenseVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

DenseVector scaled(const DenseVector& a, double alpha) {
  DenseVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = alpha * a[i];
  return out;
}

DenseVector matvec(const DenseMatrix& m, std::span<const double> x) {
  require_same_size(m.cols(), x.size(), "matvec");
  DenseVector out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    double acc = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) acc += row[c] * x[c];
    out[r] = acc;
  }
  return out;
}

bool all_finite(std::span<const double> values) noexcept {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

double relative_error(double a, double b) noexcept {
  const double scale = std::max({1.0, std::abs(a), std::abs(b)});
  return std::abs(a - b) / scale;
}

double max_relative_error(std::span<const double> a, std::span<const double> b) {
  require_same_size(a.size(), b.size(), "max_relative_error");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, relative_error(a[i], b[i]));
  return worst;
}

DenseVector weighted_average(std::span<const DenseVector> vectors, std::span<const double> weights) {
  if (vectors.empty()) throw DegenerateInputError("weighted_average: no vectors");
  require_same_size(vectors.size(), weights.size(), "weighted_average weights");
  const std::size_t d = vectors.front().size();
  double total = 0.0;
  for (std::size_t k = 0; k < vectors.size(); ++k) {
    require_same_size(vectors[k].size(), d, "weighted_average");
    if (weights[k] < 0.0 || !std::isfinite(weights[k])) {
      throw DegenerateInputError("weighted_average: weights must be finite and nonnegative");
    }
    total += weights[k];
  }
  if (!(total > 0.0)) throw DegenerateInputError("weighted_average: weight sum is zero");

  DenseVector out(d);
  for (std::size_t k = 0; k < vectors.size(); ++k) {
    if (weights[k] == 0.0) continue;
    axpy(weights[k], vectors[k].span(), out.span());
  }
  for (double& v : out) v /= total;
  return out;
}

DenseVector finite_difference_gradient(const ScalarFunction& f, const DenseVector& point, double h) {
  if (!(h > 0.0)) throw DegenerateInputError("finite_difference_gradient: step must be positive");
  DenseVector probe = point;
  DenseVector grad(point.size());
  for (std::size_t j = 0; j < point.size(); ++j) {
    probe[j] = point[j] + h;
    const double up = f(probe);
    probe[j] = point[j] - h;
    const double down = f(probe);
    probe[j] = point[j];
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("finite_difference_gradient: non-finite function value at coordinate " +
                         std::to_string(j));
    }
    grad[j] = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace fedfim
