#include "rigsolve/rig.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "rigsolve/errors.hpp"

namespace rigsolve {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimensionMismatch: return "E_DIMENSION";
    case ErrorCode::kInvalidRig: return "E_INVALID_RIG";
    case ErrorCode::kInvalidArgument: return "E_INVALID_ARGUMENT";
    case ErrorCode::kContractViolation: return "E_CONTRACT";
    case ErrorCode::kFileNotFound: return "E_FILE_NOT_FOUND";
    case ErrorCode::kVersionMismatch: return "E_VERSION";
    case ErrorCode::kSchema: return "E_SCHEMA";
    case ErrorCode::kOverlappingSections: return "E_OVERLAP";
    case ErrorCode::kTruncatedBlob: return "E_TRUNCATED_BLOB";
    case ErrorCode::kInvalidTuple: return "E_INVALID_TUPLE";
    case ErrorCode::kIo: return "E_IO";
  }
  return "E_UNKNOWN";
}

std::string Error::diagnostic() const {
  return fmt::format("{}: {}", error_code_name(code_), what());
}

namespace {

template <std::size_t Order>
void validate_corrections(const std::vector<Correction<Order>>& corrections, Eigen::Index m,
                          Eigen::Index n_coords) {
  std::set<std::array<int, Order>> seen;
  for (const auto& c : corrections) {
    for (std::size_t a = 0; a < Order; ++a) {
      if (c.controllers[a] < 0 || c.controllers[a] >= m) {
        throw Error(ErrorCode::kInvalidTuple,
                    fmt::format("order-{} correction references controller {} outside [0, {})",
                                Order, c.controllers[a], m));
      }
      if (a > 0 && c.controllers[a] <= c.controllers[a - 1]) {
        throw Error(ErrorCode::kInvalidTuple,
                    fmt::format("order-{} correction tuple ({}) is not strictly ascending", Order,
                                fmt::join(c.controllers, ",")));
      }
    }
    if (!seen.insert(c.controllers).second) {
      throw Error(ErrorCode::kInvalidTuple,
                  fmt::format("order-{} correction tuple ({}) appears more than once", Order,
                              fmt::join(c.controllers, ",")));
    }
    if (c.delta.size() != n_coords) {
      throw Error(ErrorCode::kDimensionMismatch,
                  fmt::format("corrections{}: vector has length {}, expected {}", Order,
                              c.delta.size(), n_coords));
    }
    if (!c.delta.allFinite()) {
      throw Error(ErrorCode::kInvalidRig,
                  fmt::format("corrections{}: non-finite entry", Order));
    }
  }
}

template <std::size_t Order>
std::vector<Support> supports_of(const std::vector<Correction<Order>>& corrections) {
  std::vector<Support> out;
  out.reserve(corrections.size());
  for (const auto& c : corrections) out.push_back(find_support(c.delta));
  return out;
}

template <std::size_t Order>
double weight_product(const std::array<int, Order>& controllers,
                      const Eigen::Ref<const Vector>& w) {
  double coef = 1.0;
  for (int j : controllers) coef *= w[j];
  return coef;
}

template <std::size_t Order>
void add_corrections(const std::vector<Correction<Order>>& corrections,
                     const std::vector<Support>& supports, const Eigen::Ref<const Vector>& w,
                     Vector& out) {
  for (std::size_t p = 0; p < corrections.size(); ++p) {
    const double coef = weight_product(corrections[p].controllers, w);
    if (coef == 0.0) continue;
    const Support& s = supports[p];
    out.segment(s.begin, s.size()) += coef * corrections[p].delta.segment(s.begin, s.size());
  }
}

}  // namespace

Support find_support(const Eigen::Ref<const Vector>& v) {
  Eigen::Index begin = 0;
  while (begin < v.size() && v[begin] == 0.0) ++begin;
  if (begin == v.size()) return {0, 0};
  Eigen::Index end = v.size();
  while (v[end - 1] == 0.0) --end;
  return {begin, end};
}

void check_feasible(const Eigen::Ref<const Vector>& w) {
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    if (!(w[j] >= 0.0 && w[j] <= 1.0)) {
      throw Error(ErrorCode::kContractViolation,
                  fmt::format("weight {} = {} lies outside [0, 1]", j, w[j]));
    }
  }
}

Rig::Rig(Vector neutral, Matrix blendshapes, std::vector<Correction2> corrections2,
         std::vector<Correction3> corrections3, std::vector<Correction4> corrections4)
    : neutral_(std::move(neutral)),
      blendshapes_(std::move(blendshapes)),
      corrections2_(std::move(corrections2)),
      corrections3_(std::move(corrections3)),
      corrections4_(std::move(corrections4)) {
  if (neutral_.size() == 0 || neutral_.size() % 3 != 0) {
    throw Error(ErrorCode::kInvalidRig,
                fmt::format("neutral: length {} is not a positive multiple of 3", neutral_.size()));
  }
  if (blendshapes_.rows() != neutral_.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                fmt::format("blendshapes: {} rows, expected {}", blendshapes_.rows(),
                            neutral_.size()));
  }
  if (blendshapes_.cols() < 1) {
    throw Error(ErrorCode::kInvalidRig, "blendshapes: rig needs at least one controller");
  }
  if (!neutral_.allFinite() || !blendshapes_.allFinite()) {
    throw Error(ErrorCode::kInvalidRig, "rig contains non-finite values");
  }
  const Eigen::Index m = blendshapes_.cols();
  validate_corrections(corrections2_, m, n_coords());
  validate_corrections(corrections3_, m, n_coords());
  validate_corrections(corrections4_, m, n_coords());

  blendshape_support_.reserve(static_cast<std::size_t>(m));
  for (Eigen::Index j = 0; j < m; ++j) blendshape_support_.push_back(find_support(blendshapes_.col(j)));
  correction2_support_ = supports_of(corrections2_);
  correction3_support_ = supports_of(corrections3_);
  correction4_support_ = supports_of(corrections4_);
}

void Rig::check_weights(const Eigen::Ref<const Vector>& w) const {
  if (w.size() != n_controllers()) {
    throw Error(ErrorCode::kDimensionMismatch,
                fmt::format("weights: length {}, rig has {} controllers", w.size(),
                            n_controllers()));
  }
}

void Rig::check_target(const Eigen::Ref<const Vector>& target) const {
  if (target.size() != n_coords()) {
    throw Error(ErrorCode::kDimensionMismatch,
                fmt::format("target: length {}, rig has {} coordinates", target.size(),
                            n_coords()));
  }
}

void Rig::add_linear(const Eigen::Ref<const Vector>& w, Vector& out) const {
  for (Eigen::Index j = 0; j < n_controllers(); ++j) {
    if (w[j] == 0.0) continue;
    const Support& s = blendshape_support_[static_cast<std::size_t>(j)];
    out.segment(s.begin, s.size()) += w[j] * blendshapes_.col(j).segment(s.begin, s.size());
  }
}

void Rig::add_pairs(const Eigen::Ref<const Vector>& w, Vector& out) const {
  add_corrections(corrections2_, correction2_support_, w, out);
}

void Rig::add_higher(const Eigen::Ref<const Vector>& w, Vector& out) const {
  add_corrections(corrections3_, correction3_support_, w, out);
  add_corrections(corrections4_, correction4_support_, w, out);
}

Vector Rig::evaluate_full(const Eigen::Ref<const Vector>& w) const {
  check_weights(w);
  Vector out = Vector::Zero(n_coords());
  add_linear(w, out);
  add_pairs(w, out);
  add_higher(w, out);
  return out;
}

Vector Rig::evaluate_quadratic(const Eigen::Ref<const Vector>& w) const {
  check_weights(w);
  Vector out = Vector::Zero(n_coords());
  add_linear(w, out);
  add_pairs(w, out);
  return out;
}

Vector Rig::evaluate_linear(const Eigen::Ref<const Vector>& w) const {
  check_weights(w);
  Vector out = Vector::Zero(n_coords());
  add_linear(w, out);
  return out;
}

Vector Rig::apply_transpose(const Eigen::Ref<const Vector>& v) const {
  check_target(v);
  Vector out(n_controllers());
  for (Eigen::Index j = 0; j < n_controllers(); ++j) {
    const Support& s = blendshape_support_[static_cast<std::size_t>(j)];
    out[j] = blendshapes_.col(j).segment(s.begin, s.size()).dot(v.segment(s.begin, s.size()));
  }
  return out;
}

Vector Rig::residual_g(const Eigen::Ref<const Vector>& w,
                       const Eigen::Ref<const Vector>& target) const {
  check_target(target);
  Vector g = evaluate_quadratic(w);
  g -= target;
  return g;
}

}  // namespace rigsolve
