#pragma once

#include <array>
#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace rigsolve {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Half-open row range [begin, end) outside of which a column is exactly zero.
struct Support {
  Eigen::Index begin = 0;
  Eigen::Index end = 0;

  Eigen::Index size() const { return end - begin; }
};

/// A corrective blendshape activated by the product of `Order` controller
/// weights. Controllers are strictly ascending.
template <std::size_t Order>
struct Correction {
  std::array<int, Order> controllers{};
  Vector delta;
};

using Correction2 = Correction<2>;
using Correction3 = Correction<3>;
using Correction4 = Correction<4>;

/// Blendshape rig with up to three levels of corrective terms. All meshes
/// produced by the evaluators are relative to the neutral face.
///
/// A Rig is validated on construction and immutable afterwards, so every
/// evaluation is safe to call concurrently.
class Rig {
 public:
  Rig(Vector neutral, Matrix blendshapes, std::vector<Correction2> corrections2 = {},
      std::vector<Correction3> corrections3 = {}, std::vector<Correction4> corrections4 = {});

  Eigen::Index n_vertices() const { return neutral_.size() / 3; }
  Eigen::Index n_coords() const { return neutral_.size(); }
  Eigen::Index n_controllers() const { return blendshapes_.cols(); }

  const Vector& neutral() const { return neutral_; }
  const Matrix& blendshapes() const { return blendshapes_; }
  const std::vector<Correction2>& corrections2() const { return corrections2_; }
  const std::vector<Correction3>& corrections3() const { return corrections3_; }
  const std::vector<Correction4>& corrections4() const { return corrections4_; }

  const std::vector<Support>& blendshape_support() const { return blendshape_support_; }
  const std::vector<Support>& correction2_support() const { return correction2_support_; }

  /// Rig output with all corrective levels.
  Vector evaluate_full(const Eigen::Ref<const Vector>& w) const;
  /// Blendshapes plus pairwise corrections only.
  Vector evaluate_quadratic(const Eigen::Ref<const Vector>& w) const;
  /// Bw.
  Vector evaluate_linear(const Eigen::Ref<const Vector>& w) const;

  /// B^T v.
  Vector apply_transpose(const Eigen::Ref<const Vector>& v) const;

  /// g = evaluate_quadratic(w) - target, per coordinate.
  Vector residual_g(const Eigen::Ref<const Vector>& w,
                    const Eigen::Ref<const Vector>& target) const;

  /// Throws kDimensionMismatch unless w has m entries.
  void check_weights(const Eigen::Ref<const Vector>& w) const;
  /// Throws kDimensionMismatch unless target has 3n entries.
  void check_target(const Eigen::Ref<const Vector>& target) const;

 private:
  void add_linear(const Eigen::Ref<const Vector>& w, Vector& out) const;
  void add_pairs(const Eigen::Ref<const Vector>& w, Vector& out) const;
  void add_higher(const Eigen::Ref<const Vector>& w, Vector& out) const;

  Vector neutral_;
  Matrix blendshapes_;
  std::vector<Correction2> corrections2_;
  std::vector<Correction3> corrections3_;
  std::vector<Correction4> corrections4_;

  std::vector<Support> blendshape_support_;
  std::vector<Support> correction2_support_;
  std::vector<Support> correction3_support_;
  std::vector<Support> correction4_support_;
};

/// Smallest row range containing every nonzero entry of `v`.
Support find_support(const Eigen::Ref<const Vector>& v);

/// Throws kContractViolation unless every entry of w is finite and in [0, 1].
void check_feasible(const Eigen::Ref<const Vector>& w);

}  // namespace rigsolve
