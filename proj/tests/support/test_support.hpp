#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "fedfim/data.hpp"
#include "fedfim/model.hpp"
#include "fedfim/numerics.hpp"
#include "fedfim/rng.hpp"

namespace fedfim::testing {

inline Dataset make_dataset(std::size_t rows, std::size_t cols, std::vector<double> values, std::vector<int> labels,
                            std::size_t num_classes) {
  Dataset ds;
  ds.features = std::make_shared<const DenseMatrix>(rows, cols, std::move(values));
  ds.labels = std::move(labels);
  ds.num_classes = num_classes;
  ds.name = "fixture";
  return ds;
}

/// Gaussian features, labels uniform over n classes.
inline Dataset random_dataset(std::size_t rows, std::size_t cols, std::size_t num_classes, RandomStream& rng) {
  std::vector<double> x(rows * cols);
  for (double& v : x) v = rng.normal();
  std::vector<int> y(rows);
  for (int& v : y) v = static_cast<int>(rng.uniform_index(num_classes));
  return make_dataset(rows, cols, std::move(x), std::move(y), num_classes);
}

inline DenseVector random_vector(std::size_t n, RandomStream& rng, double scale = 1.0) {
  DenseVector v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("fedfim_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Gauss-Jordan inverse with partial pivoting, for small test matrices.
inline DenseMatrix invert(const DenseMatrix& a) {
  const std::size_t n = a.rows();
  DenseMatrix m = a;
  DenseMatrix inv = DenseMatrix::identity(n);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(m(r, col)) > std::abs(m(pivot, col))) pivot = r;
    for (std::size_t c = 0; c < n; ++c) {
      std::swap(m(col, c), m(pivot, c));
      std::swap(inv(col, c), inv(pivot, c));
    }
    const double p = m(col, col);
    for (std::size_t c = 0; c < n; ++c) {
      m(col, c) /= p;
      inv(col, c) /= p;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = m(r, col);
      for (std::size_t c = 0; c < n; ++c) {
        m(r, c) -= f * m(col, c);
        inv(r, c) -= f * inv(col, c);
      }
    }
  }
  return inv;
}

}  // namespace fedfim::testing
