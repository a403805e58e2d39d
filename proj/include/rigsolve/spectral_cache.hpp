#pragma once

#include <cstdint>
#include <vector>

#include "rigsolve/rig.hpp"

namespace rigsolve {

/// One nonzero of D^(i): the pairwise correction (j, k) has value `value`
/// at coordinate i, so D^(i)_{jk} = D^(i)_{kj} = value / 2.
struct PairEntry {
  int j = 0;
  int k = 0;
  double value = 0.0;
};

/// Per-coordinate view of the pairwise corrections together with the
/// spectral bounds the MM surrogate needs. Built once per rig and shared
/// read-only across frames and threads.
struct QuadraticCache {
  Eigen::Index n_controllers = 0;
  Eigen::Index n_coords = 0;

  // CSR over coordinates: entries of coordinate i live in
  // entries[row_offsets[i] .. row_offsets[i+1]).
  std::vector<std::size_t> row_offsets;
  std::vector<PairEntry> entries;

  Vector lambda_min;
  Vector lambda_max;
  Vector sigma_max;

  /// 2m * sum_i sigma_max[i]^2, the quartic coefficient of the surrogate.
  double s_coefficient = 0.0;

  /// Sorted controllers appearing in at least one pairwise correction.
  std::vector<int> involved_controllers;

  std::size_t row_size(Eigen::Index i) const {
    return row_offsets[static_cast<std::size_t>(i) + 1] - row_offsets[static_cast<std::size_t>(i)];
  }
};

QuadraticCache build_cache(const Rig& rig);

/// w^T D^(i) w.
double quad_form(const QuadraticCache& cache, Eigen::Index i, const Eigen::Ref<const Vector>& w);

/// h_i = B_i + 2 w^T D^(i).
Vector h_row(const QuadraticCache& cache, const Rig& rig, Eigen::Index i,
             const Eigen::Ref<const Vector>& w);

/// Dense D^(i); intended for diagnostics and tests.
Matrix dense_d(const QuadraticCache& cache, Eigen::Index i);

}  // namespace rigsolve
