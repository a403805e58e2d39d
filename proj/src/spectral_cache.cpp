#include "rigsolve/spectral_cache.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "rigsolve/errors.hpp"

namespace rigsolve {

namespace {

void check_coord(const QuadraticCache& cache, Eigen::Index i) {
  if (i < 0 || i >= cache.n_coords) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("coordinate {} outside [0, {})", i, cache.n_coords));
  }
}

void check_width(const QuadraticCache& cache, const Eigen::Ref<const Vector>& w) {
  if (w.size() != cache.n_controllers) {
    throw Error(ErrorCode::kDimensionMismatch,
                fmt::format("weights: length {}, cache has {} controllers", w.size(),
                            cache.n_controllers));
  }
}

}  // namespace

QuadraticCache build_cache(const Rig& rig) {
  QuadraticCache cache;
  cache.n_controllers = rig.n_controllers();
  cache.n_coords = rig.n_coords();

  const auto& pairs = rig.corrections2();
  const auto& supports = rig.correction2_support();
  const auto n = static_cast<std::size_t>(cache.n_coords);

  // Two passes (count, then fill) keep entry order within a row fixed by the
  // correction order, which makes the cache reproducible bit for bit.
  std::vector<std::size_t> counts(n, 0);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    for (Eigen::Index i = supports[p].begin; i < supports[p].end; ++i) {
      if (pairs[p].delta[i] != 0.0) ++counts[static_cast<std::size_t>(i)];
    }
  }
  cache.row_offsets.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) cache.row_offsets[i + 1] = cache.row_offsets[i] + counts[i];
  cache.entries.resize(cache.row_offsets[n]);
  std::vector<std::size_t> cursor(cache.row_offsets.begin(), cache.row_offsets.end() - 1);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const int j = pairs[p].controllers[0];
    const int k = pairs[p].controllers[1];
    for (Eigen::Index i = supports[p].begin; i < supports[p].end; ++i) {
      const double v = pairs[p].delta[i];
      if (v != 0.0) cache.entries[cursor[static_cast<std::size_t>(i)]++] = {j, k, v};
    }
  }

  std::vector<int> involved;
  for (const auto& c : pairs) {
    involved.push_back(c.controllers[0]);
    involved.push_back(c.controllers[1]);
  }
  std::sort(involved.begin(), involved.end());
  involved.erase(std::unique(involved.begin(), involved.end()), involved.end());
  cache.involved_controllers = std::move(involved);

  cache.lambda_min = Vector::Zero(cache.n_coords);
  cache.lambda_max = Vector::Zero(cache.n_coords);
  cache.sigma_max = Vector::Zero(cache.n_coords);

  // Controllers with no entry at coordinate i contribute zero rows and
  // columns, so the spectrum is that of the dense submatrix over the local
  // controllers, plus 0 whenever some controller is left out.
  std::vector<int> local;
  std::vector<int> slot(static_cast<std::size_t>(cache.n_controllers), -1);
  Eigen::SelfAdjointEigenSolver<Matrix> eig;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t begin = cache.row_offsets[i];
    const std::size_t end = cache.row_offsets[i + 1];
    if (begin == end) continue;
    local.clear();
    for (std::size_t e = begin; e < end; ++e) {
      local.push_back(cache.entries[e].j);
      local.push_back(cache.entries[e].k);
    }
    std::sort(local.begin(), local.end());
    local.erase(std::unique(local.begin(), local.end()), local.end());
    for (std::size_t a = 0; a < local.size(); ++a) slot[static_cast<std::size_t>(local[a])] = static_cast<int>(a);

    const auto size = static_cast<Eigen::Index>(local.size());
    Matrix d = Matrix::Zero(size, size);
    for (std::size_t e = begin; e < end; ++e) {
      const int a = slot[static_cast<std::size_t>(cache.entries[e].j)];
      const int b = slot[static_cast<std::size_t>(cache.entries[e].k)];
      d(a, b) = 0.5 * cache.entries[e].value;
      d(b, a) = 0.5 * cache.entries[e].value;
    }
    for (int c : local) slot[static_cast<std::size_t>(c)] = -1;

    double lo = 0.0;
    double hi = 0.0;
    if (size == 2) {
      // Single entry: eigenvalues are exactly +-|d01|.
      lo = -std::abs(d(0, 1));
      hi = std::abs(d(0, 1));
    } else {
      eig.compute(d, Eigen::EigenvaluesOnly);
      lo = eig.eigenvalues().minCoeff();
      hi = eig.eigenvalues().maxCoeff();
    }
    if (size < cache.n_controllers) {
      lo = std::min(lo, 0.0);
      hi = std::max(hi, 0.0);
    }
    const auto ii = static_cast<Eigen::Index>(i);
    cache.lambda_min[ii] = lo;
    cache.lambda_max[ii] = hi;
    cache.sigma_max[ii] = std::max(std::abs(lo), std::abs(hi));
  }

  cache.s_coefficient =
      2.0 * static_cast<double>(cache.n_controllers) * cache.sigma_max.squaredNorm();
  return cache;
}

double quad_form(const QuadraticCache& cache, Eigen::Index i, const Eigen::Ref<const Vector>& w) {
  check_coord(cache, i);
  check_width(cache, w);
  double sum = 0.0;
  const auto row = static_cast<std::size_t>(i);
  for (std::size_t e = cache.row_offsets[row]; e < cache.row_offsets[row + 1]; ++e) {
    const PairEntry& pe = cache.entries[e];
    sum += pe.value * w[pe.j] * w[pe.k];
  }
  return sum;
}

Vector h_row(const QuadraticCache& cache, const Rig& rig, Eigen::Index i,
             const Eigen::Ref<const Vector>& w) {
  check_coord(cache, i);
  check_width(cache, w);
  Vector h = rig.blendshapes().row(i).transpose();
  const auto row = static_cast<std::size_t>(i);
  for (std::size_t e = cache.row_offsets[row]; e < cache.row_offsets[row + 1]; ++e) {
    const PairEntry& pe = cache.entries[e];
    h[pe.j] += w[pe.k] * pe.value;
    h[pe.k] += w[pe.j] * pe.value;
  }
  return h;
}

Matrix dense_d(const QuadraticCache& cache, Eigen::Index i) {
  check_coord(cache, i);
  Matrix d = Matrix::Zero(cache.n_controllers, cache.n_controllers);
  const auto row = static_cast<std::size_t>(i);
  for (std::size_t e = cache.row_offsets[row]; e < cache.row_offsets[row + 1]; ++e) {
    const PairEntry& pe = cache.entries[e];
    d(pe.j, pe.k) += 0.5 * pe.value;
    d(pe.k, pe.j) += 0.5 * pe.value;
  }
  return d;
}

}  // namespace rigsolve
