#include <doctest.h>

#include "oracles.hpp"
#include "rigsolve/errors.hpp"
#include "rigsolve/rig.hpp"

using namespace rigsolve;

namespace {

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected rigsolve::Error");
  return ErrorCode::kIo;
}

Rig two_pair_rig() {
  Matrix B(6, 3);
  B << 1, 0, 0,  //
      0, 1, 0,   //
      0, 0, 1,   //
      1, 1, 0,   //
      0, 2, 0,   //
      0, 0, 3;
  Vector d01(6);
  d01 << 0.5, 0, 0, 0, -1, 0;
  Vector d012(6);
  d012 << 0, 0, 0, 0, 0, 7;
  return Rig(Vector::Zero(6), B, {{{0, 1}, d01}}, {{{0, 1, 2}, d012}});
}

}  // namespace

TEST_CASE("zero weights give the neutral face") {
  const Rig rig = two_pair_rig();
  const Vector w = Vector::Zero(3);
  CHECK(rig.evaluate_full(w).isZero(0.0));
  CHECK(rig.evaluate_quadratic(w).isZero(0.0));
  CHECK(rig.evaluate_linear(w).isZero(0.0));
}

TEST_CASE("unit weight on a controller outside every tuple returns its column") {
  std::mt19937_64 rng(3);
  Rig rig = oracle::random_rig(rng, 20, 6, 0);
  Matrix B = rig.blendshapes();
  Vector d(60);
  d.setConstant(0.25);
  Rig with_pair(rig.neutral(), B, {{{0, 1}, d}});
  Vector w = Vector::Zero(6);
  w[4] = 1.0;
  CHECK(with_pair.evaluate_full(w) == B.col(4));
  CHECK(with_pair.evaluate_linear(w) == B.col(4));
}

TEST_CASE("two active paired controllers add their corrective") {
  const Rig rig = two_pair_rig();
  Vector w(3);
  w << 1, 1, 0;
  const Vector expected = rig.blendshapes().col(0) + rig.blendshapes().col(1) + rig.corrections2()[0].delta;
  CHECK((rig.evaluate_full(w) - expected).norm() == doctest::Approx(0.0));
}

TEST_CASE("evaluators match the tuple-sum oracle") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const bool sparse = trial % 2 == 1;
    const Rig rig = oracle::random_rig(rng, 30, 9, 12, 5, 3, sparse);
    const Vector w = oracle::random_weights(rng, 9);
    const Vector full = rig.evaluate_full(w);
    const Vector quad = rig.evaluate_quadratic(w);
    const Vector lin = rig.evaluate_linear(w);
    const double scale = 1.0 + oracle::evaluate(rig, w).norm();
    CHECK((full - oracle::evaluate(rig, w, 4)).norm() <= 1e-12 * scale);
    CHECK((quad - oracle::evaluate(rig, w, 2)).norm() <= 1e-12 * scale);
    CHECK((lin - oracle::evaluate(rig, w, 1)).norm() <= 1e-12 * scale);

    const Vector target = oracle::random_vector(rng, rig.n_coords());
    CHECK((rig.residual_g(w, target) - (oracle::evaluate(rig, w, 2) - target)).norm() <=
          1e-12 * (scale + target.norm()));

    const Vector v = oracle::random_vector(rng, rig.n_coords());
    const Vector bt = rig.blendshapes().transpose() * v;
    CHECK((rig.apply_transpose(v) - bt).norm() <= 1e-12 * (1.0 + bt.norm()));
  }
}

TEST_CASE("quadratic and full evaluation agree without higher-order terms") {
  std::mt19937_64 rng(5);
  const Rig rig = oracle::random_rig(rng, 15, 7, 10);
  const Vector w = oracle::random_weights(rng, 7);
  CHECK(rig.evaluate_quadratic(w) == rig.evaluate_full(w));
}

TEST_CASE("linear and full evaluation agree on a correction-free rig") {
  std::mt19937_64 rng(6);
  const Rig rig = oracle::random_rig(rng, 15, 7, 0);
  const Vector w = oracle::random_weights(rng, 7);
  CHECK((rig.evaluate_linear(w) - rig.evaluate_full(w)).norm() <= 1e-13 * rig.evaluate_full(w).norm());
}

TEST_CASE("residual vanishes at the quadratic evaluation") {
  std::mt19937_64 rng(8);
  const Rig rig = oracle::random_rig(rng, 12, 5, 6, 2);
  const Vector w = oracle::random_weights(rng, 5);
  CHECK(rig.residual_g(w, rig.evaluate_quadratic(w)).isZero(0.0));
  CHECK(rig.residual_g(Vector::Zero(5), Vector::Zero(36)).isZero(0.0));
}

TEST_CASE("column supports bound the nonzeros") {
  Vector v = Vector::Zero(10);
  CHECK(find_support(v).size() == 0);
  v[3] = 1.0;
  v[7] = -2.0;
  const Support s = find_support(v);
  CHECK(s.begin == 3);
  CHECK(s.end == 8);
}

TEST_CASE("rig validation") {
  const Vector neutral = Vector::Zero(6);
  const Matrix B = Matrix::Ones(6, 3);
  const Vector d = Vector::Ones(6);

  SUBCASE("descending tuple") {
    CHECK(code_of([&] { Rig(neutral, B, {{{1, 0}, d}}); }) == ErrorCode::kInvalidTuple);
  }
  SUBCASE("repeated controller") {
    CHECK(code_of([&] { Rig(neutral, B, {{{1, 1}, d}}); }) == ErrorCode::kInvalidTuple);
  }
  SUBCASE("controller out of range") {
    CHECK(code_of([&] { Rig(neutral, B, {{{0, 3}, d}}); }) == ErrorCode::kInvalidTuple);
    CHECK(code_of([&] { Rig(neutral, B, {{{-1, 2}, d}}); }) == ErrorCode::kInvalidTuple);
  }
  SUBCASE("duplicate tuple within an order") {
    CHECK(code_of([&] { Rig(neutral, B, {{{0, 1}, d}, {{0, 1}, d}}); }) == ErrorCode::kInvalidTuple);
  }
  SUBCASE("shared controllers across orders are allowed") {
    CHECK_NOTHROW(Rig(neutral, B, {{{0, 1}, d}}, {{{0, 1, 2}, d}}));
  }
  SUBCASE("length mismatches") {
    CHECK(code_of([&] { Rig(neutral, Matrix::Ones(5, 3)); }) == ErrorCode::kDimensionMismatch);
    CHECK(code_of([&] { Rig(neutral, B, {{{0, 1}, Vector::Ones(5)}}); }) == ErrorCode::kDimensionMismatch);
    CHECK(code_of([&] { Rig(Vector::Zero(5), Matrix::Ones(5, 3)); }) == ErrorCode::kInvalidRig);
  }
  SUBCASE("empty rig") {
    CHECK_THROWS_AS(Rig(Vector::Zero(0), Matrix::Zero(0, 0)), Error);
    CHECK_THROWS_AS(Rig(neutral, Matrix::Zero(6, 0)), Error);
  }
  SUBCASE("non-finite payload") {
    Matrix bad = B;
    bad(2, 1) = std::nan("");
    CHECK(code_of([&] { Rig(neutral, bad); }) == ErrorCode::kInvalidRig);
  }
  SUBCASE("weight and target lengths") {
    const Rig rig(neutral, B);
    CHECK(code_of([&] { rig.evaluate_full(Vector::Zero(2)); }) == ErrorCode::kDimensionMismatch);
    CHECK(code_of([&] { rig.residual_g(Vector::Zero(3), Vector::Zero(5)); }) ==
          ErrorCode::kDimensionMismatch);
  }
}

TEST_CASE("feasibility check") {
  Vector w(3);
  w << 0.0, 1.0, 0.5;
  CHECK_NOTHROW(check_feasible(w));
  w[1] = 1.0 + 1e-15;
  CHECK(code_of([&] { check_feasible(w); }) == ErrorCode::kContractViolation);
  w[1] = std::nan("");
  CHECK(code_of([&] { check_feasible(w); }) == ErrorCode::kContractViolation);
}

TEST_CASE("error diagnostics carry the code name") {
  const Error e(ErrorCode::kTruncatedBlob, "truncated blob: expected 10 elements, found 9");
  CHECK(e.diagnostic() == "E_TRUNCATED_BLOB: truncated blob: expected 10 elements, found 9");
}
