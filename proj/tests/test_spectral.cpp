#include <doctest.h>

#include "oracles.hpp"
#include "rigsolve/spectral_cache.hpp"

using namespace rigsolve;

TEST_CASE("rig without pairs has an empty spectrum") {
  std::mt19937_64 rng(1);
  const Rig rig = oracle::random_rig(rng, 10, 4, 0, 2);
  const QuadraticCache cache = build_cache(rig);
  CHECK(cache.entries.empty());
  CHECK(cache.lambda_min.isZero(0.0));
  CHECK(cache.lambda_max.isZero(0.0));
  CHECK(cache.sigma_max.isZero(0.0));
  CHECK(cache.s_coefficient == 0.0);
  CHECK(cache.involved_controllers.empty());
}

TEST_CASE("single pair gives the two by two spectrum") {
  Vector d = Vector::Zero(3);
  d[1] = 1.0;
  const Rig rig(Vector::Zero(3), Matrix::Ones(3, 2), {{{0, 1}, d}});
  const QuadraticCache cache = build_cache(rig);
  Matrix expected(2, 2);
  expected << 0, 0.5, 0.5, 0;
  CHECK(dense_d(cache, 1) == expected);
  CHECK(cache.lambda_min[1] == -0.5);
  CHECK(cache.lambda_max[1] == 0.5);
  CHECK(cache.sigma_max[1] == 0.5);
  CHECK(cache.sigma_max[0] == 0.0);
  CHECK(cache.s_coefficient == 2.0 * 2.0 * 0.25);
}

TEST_CASE("spectra match the Jacobi oracle on the full matrix") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 8; ++trial) {
    const int m = 4 + trial * 3;
    const Rig rig = oracle::random_rig(rng, 8, m, static_cast<std::size_t>(m + trial), 0, 0, trial % 2 == 0);
    const QuadraticCache cache = build_cache(rig);
    double s = 0.0;
    for (Eigen::Index i = 0; i < rig.n_coords(); ++i) {
      const Matrix D = oracle::dense_d(rig, i);
      CHECK((dense_d(cache, i) - D).norm() == 0.0);
      const auto ev = oracle::jacobi(D);
      CHECK(std::abs(cache.lambda_min[i] - ev.min) <= 1e-10);
      CHECK(std::abs(cache.lambda_max[i] - ev.max) <= 1e-10);
      CHECK(cache.sigma_max[i] == std::max(std::abs(cache.lambda_min[i]), std::abs(cache.lambda_max[i])));
      CHECK(cache.lambda_min[i] <= cache.lambda_max[i]);
      if (cache.row_size(i) * 2 < static_cast<std::size_t>(m)) {
        CHECK(cache.lambda_min[i] <= 0.0);
        CHECK(cache.lambda_max[i] >= 0.0);
      }
      s += cache.sigma_max[i] * cache.sigma_max[i];
    }
    CHECK(cache.s_coefficient == doctest::Approx(2.0 * m * s).epsilon(1e-13));
    CHECK(cache.s_coefficient >= 0.0);
  }
}

TEST_CASE("quadratic form and h rows match dense products") {
  std::mt19937_64 rng(4);
  const Rig rig = oracle::random_rig(rng, 10, 9, 15, 0, 0, true);
  const QuadraticCache cache = build_cache(rig);
  const Vector w = oracle::random_weights(rng, 9, 0.1);
  for (Eigen::Index i = 0; i < rig.n_coords(); ++i) {
    const Matrix D = oracle::dense_d(rig, i);
    const double expected = w.dot(D * w);
    const double scale = w.cwiseAbs().dot(D.cwiseAbs() * w.cwiseAbs());
    CHECK(std::abs(quad_form(cache, i, w) - expected) <= 1e-12 * scale);
    const Vector h = rig.blendshapes().row(i).transpose() + 2.0 * D * w;
    CHECK((h_row(cache, rig, i, w) - h).norm() <= 1e-12 * h.norm());

    CHECK(quad_form(cache, i, Vector::Zero(9)) == 0.0);
    for (int j = 0; j < 9; ++j) CHECK(quad_form(cache, i, Vector::Unit(9, j)) == 0.0);
    CHECK(h_row(cache, rig, i, Vector::Zero(9)) == rig.blendshapes().row(i).transpose());
  }
}

TEST_CASE("h rows reduce to blendshape rows without pairs") {
  std::mt19937_64 rng(9);
  const Rig rig = oracle::random_rig(rng, 6, 5, 0);
  const QuadraticCache cache = build_cache(rig);
  const Vector w = oracle::random_weights(rng, 5);
  for (Eigen::Index i = 0; i < rig.n_coords(); ++i) {
    CHECK(h_row(cache, rig, i, w) == rig.blendshapes().row(i).transpose());
  }
}

TEST_CASE("involved controllers are the sorted union of pair members") {
  Vector d = Vector::Ones(3);
  const Rig rig(Vector::Zero(3), Matrix::Ones(3, 6), {{{1, 4}, d}, {{0, 4}, d}});
  const QuadraticCache cache = build_cache(rig);
  CHECK(cache.involved_controllers == std::vector<int>{0, 1, 4});
}
