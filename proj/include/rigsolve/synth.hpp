#pragma once

#include <cstdint>
#include <vector>

#include "rigsolve/rig.hpp"

namespace rigsolve {

struct GenSpec {
  Eigen::Index n_vertices = 6012;
  Eigen::Index m = 100;
  std::size_t n_pairs = 150;
  std::size_t n_triples = 30;
  std::size_t n_quads = 10;
  std::size_t n_frames = 150;
  /// Expected fraction of active controllers per frame, in (0, 1].
  double sparsity = 0.15;
  /// Correction vector norm relative to the mean blendshape column norm.
  double correction_scale = 0.5;
  double noise_std = 0.0;
  std::uint64_t seed = 0;
  /// Fraction of the coordinates each blendshape touches.
  double block_fraction = 0.1;
  /// Standard deviation of blendshape displacements at the centre of a
  /// block (mm). A centre vertex moves about 8 mm on average.
  double amplitude = 5.0;

  /// Dimensions matching the scale of production face rigs.
  static GenSpec paper_scale();

  void validate() const;
};

struct SynthData {
  Rig rig;
  std::vector<Vector> ground_truth;
  /// Neutral-relative target meshes.
  std::vector<Vector> targets;
};

/// Deterministic in `spec` (including the seed) on every platform: the
/// sampler uses mt19937_64 with its own uniform and normal transforms.
SynthData generate(const GenSpec& spec);

}  // namespace rigsolve
