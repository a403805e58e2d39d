#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "rigsolve/rig.hpp"

namespace rigsolve {

inline constexpr int kFormatVersion = 1;

enum class SectionKind { kNeutral, kBlendshapes, kCorrection };

struct ManifestSection {
  SectionKind kind = SectionKind::kNeutral;
  int order = 0;                 // corrections only
  std::vector<int> controllers;  // corrections only
  std::uint64_t offset = 0;      // in elements
  std::uint64_t length = 0;      // in elements
};

/// JSON description of a rig blob. Every payload is a run of little-endian
/// float64 values; blendshapes are column-major.
struct RigManifest {
  int format_version = kFormatVersion;
  std::int64_t n_vertices = 0;
  std::int64_t n_controllers = 0;
  std::string data_file;
  std::vector<ManifestSection> sections;

  nlohmann::json to_json() const;
  /// Strict: unknown or missing fields raise kSchema, a different version
  /// raises kVersionMismatch.
  static RigManifest from_json(const nlohmann::json& j);
};

/// Writes `<dir>/<name>.json` and `<dir>/<name>.bin`; returns the manifest path.
std::filesystem::path save_rig(const Rig& rig, const std::filesystem::path& dir,
                               const std::string& name = "rig");
Rig load_rig(const std::filesystem::path& manifest_path);

/// FNV-1a 64 over the rig's dimensions and serialized payload, as hex.
std::string rig_hash(const Rig& rig);

enum class Coordinates { kRelative, kAbsolute };

/// Frame-major n_frames x 3n float64 LE blob plus a JSON sidecar.
void save_targets(const std::filesystem::path& sidecar, const std::vector<Vector>& frames,
                  Coordinates coordinates = Coordinates::kRelative);
/// Neutral-relative targets; absolute files have the rig's neutral subtracted.
std::vector<Vector> load_targets(const std::filesystem::path& sidecar, const Rig& rig);

struct WeightsProvenance {
  std::string solver;
  double lambda = 0.0;
  std::string init;
  std::string rig_hash;
};

struct WeightsFile {
  std::vector<Vector> frames;
  WeightsProvenance provenance;
};

/// Frame-major n_frames x m float64 LE blob plus a JSON sidecar.
void save_weights(const std::filesystem::path& sidecar, const std::vector<Vector>& frames,
                  const WeightsProvenance& provenance);
WeightsFile load_weights(const std::filesystem::path& sidecar);
/// As above, and rejects files whose controller count differs from the rig.
WeightsFile load_weights(const std::filesystem::path& sidecar, const Rig& rig);

/// Raw blob helpers.
void write_f64_le(const std::filesystem::path& path, const std::vector<double>& values);
std::vector<double> read_f64_le(const std::filesystem::path& path);

}  // namespace rigsolve
