#include "fedfim/fim_lbfgs.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "fedfim/error.hpp"

namespace fedfim {

std::string_view to_string(H0Mode mode) noexcept {
  return mode == H0Mode::Identity ? "identity" : "gamma-scaled";
}

H0Mode parse_h0_mode(std::string_view text) {
  if (text == "identity") return H0Mode::Identity;
  if (text == "gamma-scaled") return H0Mode::GammaScaled;
  throw ConfigError("unknown h0 mode '" + std::string(text) + "' (expected identity or gamma-scaled)");
}

void OptimizerConfig::validate() const {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("lbfgs: eta must be positive");
  if (memory < 1) throw ConfigError("lbfgs: memory must be >= 1");
  if (!(cautious_eps > 0.0)) throw ConfigError("lbfgs: cautious_eps must be positive");
  if (!(fim_damping >= 0.0)) throw ConfigError("lbfgs: fim_damping must be >= 0");
}

LbfgsMemory::LbfgsMemory(std::size_t capacity, H0Mode h0_mode) : capacity_(capacity), h0_mode_(h0_mode) {
  if (capacity_ < 1) throw ConfigError("L-BFGS memory capacity must be >= 1");
}

double LbfgsMemory::h0_scale() const noexcept {
  if (h0_mode_ == H0Mode::Identity || pairs_.empty()) return 1.0;
  const CurvaturePair& newest = pairs_.back();
  return 1.0 / (newest.rho * squared_norm(newest.y.span()));
}

bool LbfgsMemory::push(DenseVector s, DenseVector y, double cautious_eps) {
  if (s.size() != y.size()) throw DimensionError("curvature pair: s and y lengths differ");
  if (!pairs_.empty() && pairs_.front().s.size() != s.size()) {
    throw DimensionError("curvature pair dimension differs from stored pairs");
  }
  const double ys = dot(y.span(), s.span());
  const double ss = squared_norm(s.span());
  if (!std::isfinite(ys) || !(ss > 0.0) || !(ys >= cautious_eps * ss) || !(ys > 0.0)) {
    ++skipped_;
    return false;
  }
  if (pairs_.size() == capacity_) pairs_.pop_front();
  pairs_.push_back(CurvaturePair{std::move(s), std::move(y), 1.0 / ys});
  ++accepted_;
  return true;
}

FimDiagonal fim_diagonal(const PerSampleGradients& grads, double damping) {
  const DenseMatrix& g = grads.grads;
  if (g.rows() == 0) throw DegenerateInputError("fim_diagonal: empty gradient batch");
  FimDiagonal out{DenseVector(g.cols()), g.rows()};
  for (std::size_t i = 0; i < g.rows(); ++i) {
    const auto row = g.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) out.diag[j] += row[j] * row[j];
  }
  const double inv_b = 1.0 / static_cast<double>(g.rows());
  for (double& v : out.diag) v = v * inv_b + damping;
  return out;
}

FimDiagonal aggregate_fim(std::span<const FimDiagonal> parts) {
  std::vector<double> weights(parts.size(), 1.0);
  return aggregate_fim(parts, weights);
}

FimDiagonal aggregate_fim(std::span<const FimDiagonal> parts, std::span<const double> weights) {
  if (parts.empty()) throw DegenerateInputError("aggregate_fim: no parts");
  std::vector<DenseVector> diags;
  diags.reserve(parts.size());
  std::size_t total_batch = 0;
  for (const FimDiagonal& p : parts) {
    diags.push_back(p.diag);
    total_batch += p.batch_size;
  }
  return FimDiagonal{weighted_average(diags, weights), total_batch};
}

DenseVector smooth_y(const FimDiagonal& fim, const DenseVector& s) {
  if (fim.diag.size() != s.size()) throw DimensionError("smooth_y: FIM diagonal and s lengths differ");
  DenseVector y(s.size());
  for (std::size_t j = 0; j < s.size(); ++j) y[j] = fim.diag[j] * s[j];
  return y;
}

LbfgsMemory update_memory(LbfgsMemory mem, DenseVector s, DenseVector y, double cautious_eps) {
  mem.push(std::move(s), std::move(y), cautious_eps);
  return mem;
}

DenseVector two_loop_direction(const LbfgsMemory& mem, const DenseVector& g) {
  const auto& pairs = mem.pairs();
  if (!pairs.empty() && pairs.front().s.size() != g.size()) {
    throw DimensionError("two_loop_direction: gradient length differs from stored pairs");
  }
  DenseVector q = g;
  std::vector<double> alpha(pairs.size());
  for (std::size_t k = pairs.size(); k-- > 0;) {
    const CurvaturePair& p = pairs[k];
    alpha[k] = p.rho * dot(p.s.span(), q.span());
    axpy(-alpha[k], p.y.span(), q.span());
  }
  const double gamma = mem.h0_scale();
  for (double& v : q) v *= gamma;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const CurvaturePair& p = pairs[k];
    const double beta = p.rho * dot(p.y.span(), q.span());
    axpy(alpha[k] - beta, p.s.span(), q.span());
  }
  for (double& v : q) v = -v;
  return q;
}

DenseMatrix dense_bfgs_oracle(const LbfgsMemory& mem, std::size_t dim) {
  DenseMatrix h = DenseMatrix::identity(dim, mem.h0_scale());
  for (const CurvaturePair& p : mem.pairs()) {
    if (p.s.size() != dim) throw DimensionError("dense_bfgs_oracle: pair dimension mismatch");
    const double ys = dot(p.y.span(), p.s.span());
    if (!(ys > 0.0)) throw NumericError("dense_bfgs_oracle: non-positive curvature pair");
    const double rho = 1.0 / ys;
    // V = I - rho y s^T, H <- V^T H V + rho s s^T.
    DenseMatrix v = DenseMatrix::identity(dim);
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = 0; j < dim; ++j) v(i, j) -= rho * p.y[i] * p.s[j];
    DenseMatrix hv(dim, dim);
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t k = 0; k < dim; ++k) {
        const double hik = h(i, k);
        for (std::size_t j = 0; j < dim; ++j) hv(i, j) += hik * v(k, j);
      }
    DenseMatrix next(dim, dim);
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t k = 0; k < dim; ++k) {
        const double vki = v(k, i);
        for (std::size_t j = 0; j < dim; ++j) next(i, j) += vki * hv(k, j);
      }
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = 0; j < dim; ++j) next(i, j) += rho * p.s[i] * p.s[j];
    h = std::move(next);
  }
  return h;
}

double curvature_ratio(const DenseVector& s, const DenseVector& y) {
  const double ys = dot(y.span(), s.span());
  if (!(ys > 0.0)) throw NumericError("curvature_ratio: y.s must be positive");
  return squared_norm(y.span()) / ys;
}

double curvature_ratio(const CurvaturePair& pair) { return curvature_ratio(pair.s, pair.y); }

}  // namespace fedfim
