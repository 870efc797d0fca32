#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <string_view>

#include "fedfim/model.hpp"
#include "fedfim/numerics.hpp"

namespace fedfim {

/// Diagonal of the empirical Fisher information over a batch: the mean of
/// elementwise-squared per-sample gradients, plus damping.
struct FimDiagonal {
  DenseVector diag;
  std::size_t batch_size = 0;
};

/// One stored curvature pair: s = w_{t+1} - w_t, y = B s, rho = 1 / (y.s).
struct CurvaturePair {
  DenseVector s;
  DenseVector y;
  double rho = 0.0;
};

enum class H0Mode { Identity, GammaScaled };

std::string_view to_string(H0Mode mode) noexcept;
H0Mode parse_h0_mode(std::string_view text);

struct OptimizerConfig {
  double eta = 1.0;
  std::size_t memory = 10;
  double cautious_eps = 1e-8;
  H0Mode h0_mode = H0Mode::GammaScaled;
  double fim_damping = 1e-6;

  void validate() const;
};

/// Bounded FIFO of curvature pairs. Pairs that fail the cautious test
/// y.s >= eps * |s|^2 are counted and dropped.
class LbfgsMemory {
 public:
  explicit LbfgsMemory(std::size_t capacity, H0Mode h0_mode = H0Mode::GammaScaled);

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return pairs_.size(); }
  bool empty() const noexcept { return pairs_.empty(); }
  H0Mode h0_mode() const noexcept { return h0_mode_; }
  std::size_t skipped() const noexcept { return skipped_; }
  std::size_t accepted() const noexcept { return accepted_; }

  /// Oldest first.
  const std::deque<CurvaturePair>& pairs() const noexcept { return pairs_; }

  /// s.y / y.y of the newest pair in gamma-scaled mode, otherwise 1.
  double h0_scale() const noexcept;

  /// Returns true when the pair was stored.
  bool push(DenseVector s, DenseVector y, double cautious_eps);

 private:
  std::size_t capacity_;
  H0Mode h0_mode_;
  std::deque<CurvaturePair> pairs_;
  std::size_t skipped_ = 0;
  std::size_t accepted_ = 0;
};

FimDiagonal fim_diagonal(const PerSampleGradients& grads, double damping = 0.0);
/// Unweighted mean over parts; batch sizes are summed.
FimDiagonal aggregate_fim(std::span<const FimDiagonal> parts);
/// Weighted variant used when the FIM weighting is configured by sample size.
FimDiagonal aggregate_fim(std::span<const FimDiagonal> parts, std::span<const double> weights);

/// y_j = diag_j * s_j
DenseVector smooth_y(const FimDiagonal& fim, const DenseVector& s);

/// Value-semantics wrapper around LbfgsMemory::push.
LbfgsMemory update_memory(LbfgsMemory mem, DenseVector s, DenseVector y, double cautious_eps);

/// p = -H g by the two-loop recursion, H0 = h0_scale * I.
DenseVector two_loop_direction(const LbfgsMemory& mem, const DenseVector& g);

/// Explicit inverse-Hessian approximation obtained by applying the BFGS
/// inverse update H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T over the
/// stored pairs, oldest first, from H0 = h0_scale * I. Intended for small d.
DenseMatrix dense_bfgs_oracle(const LbfgsMemory& mem, std::size_t dim);

/// |y|^2 / (y.s)
double curvature_ratio(const CurvaturePair& pair);
double curvature_ratio(const DenseVector& s, const DenseVector& y);

}  // namespace fedfim
