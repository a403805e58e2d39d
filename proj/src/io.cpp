#include "rigsolve/io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "rigsolve/errors.hpp"

namespace rigsolve {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void put_le(std::vector<unsigned char>& bytes, double value) {
  const auto bits = std::bit_cast<std::uint64_t>(value);
  for (int b = 0; b < 8; ++b) bytes.push_back(static_cast<unsigned char>(bits >> (8 * b)));
}

double get_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(p[b]) << (8 * b);
  return std::bit_cast<double>(bits);
}

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kFileNotFound, fmt::format("file not found: {}", path.string()));
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchema, fmt::format("{}: invalid JSON ({})", path.string(), e.what()));
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, fmt::format("cannot open '{}' for writing", path.string()));
  out << text;
  if (!out) throw Error(ErrorCode::kIo, fmt::format("failed writing '{}'", path.string()));
}

void check_keys(const json& j, std::initializer_list<const char*> required,
                std::initializer_list<const char*> optional, const std::string& context) {
  if (!j.is_object()) throw Error(ErrorCode::kSchema, fmt::format("{}: expected an object", context));
  std::set<std::string> known;
  for (const char* k : required) {
    known.insert(k);
    if (!j.contains(k)) throw Error(ErrorCode::kSchema, fmt::format("{}: missing field '{}'", context, k));
  }
  for (const char* k : optional) known.insert(k);
  for (const auto& item : j.items()) {
    if (!known.count(item.key())) {
      throw Error(ErrorCode::kSchema, fmt::format("{}: unknown field '{}'", context, item.key()));
    }
  }
}

template <typename T>
T get_field(const json& j, const char* key, const std::string& context) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::kSchema, fmt::format("{}: field '{}' has the wrong type", context, key));
  }
}

void check_version(const json& j, const std::string& context) {
  const int version = get_field<int>(j, "format_version", context);
  if (version != kFormatVersion) {
    throw Error(ErrorCode::kVersionMismatch,
                fmt::format("{}: format_version {} is not supported (expected {})", context,
                            version, kFormatVersion));
  }
}

fs::path blob_path_for(const fs::path& sidecar) {
  fs::path blob = sidecar;
  blob.replace_extension(".bin");
  return blob;
}

fs::path resolve_data_file(const fs::path& sidecar, const std::string& data_file) {
  return sidecar.parent_path() / data_file;
}

std::vector<double> serialize(const Rig& rig, RigManifest* manifest) {
  std::vector<double> blob;
  const auto n = static_cast<std::uint64_t>(rig.n_coords());
  auto add_section = [&](SectionKind kind, int order, std::vector<int> controllers,
                         const double* data, std::uint64_t length) {
    if (manifest) {
      manifest->sections.push_back({kind, order, std::move(controllers), blob.size(), length});
    }
    blob.insert(blob.end(), data, data + length);
  };
  add_section(SectionKind::kNeutral, 0, {}, rig.neutral().data(), n);
  add_section(SectionKind::kBlendshapes, 0, {}, rig.blendshapes().data(),
              n * static_cast<std::uint64_t>(rig.n_controllers()));
  for (const auto& c : rig.corrections2())
    add_section(SectionKind::kCorrection, 2, {c.controllers.begin(), c.controllers.end()}, c.delta.data(), n);
  for (const auto& c : rig.corrections3())
    add_section(SectionKind::kCorrection, 3, {c.controllers.begin(), c.controllers.end()}, c.delta.data(), n);
  for (const auto& c : rig.corrections4())
    add_section(SectionKind::kCorrection, 4, {c.controllers.begin(), c.controllers.end()}, c.delta.data(), n);
  return blob;
}

const char* kind_name(SectionKind kind) {
  switch (kind) {
    case SectionKind::kNeutral: return "neutral";
    case SectionKind::kBlendshapes: return "blendshapes";
    case SectionKind::kCorrection: return "correction";
  }
  return "neutral";
}

template <std::size_t Order>
Correction<Order> make_correction(const ManifestSection& s, const std::vector<double>& blob) {
  Correction<Order> c;
  std::copy(s.controllers.begin(), s.controllers.end(), c.controllers.begin());
  c.delta = Eigen::Map<const Vector>(blob.data() + s.offset, static_cast<Eigen::Index>(s.length));
  return c;
}

}  // namespace

void write_f64_le(const fs::path& path, const std::vector<double>& values) {
  std::vector<unsigned char> bytes;
  bytes.reserve(values.size() * 8);
  for (double v : values) put_le(bytes, v);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, fmt::format("cannot open '{}' for writing", path.string()));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, fmt::format("failed writing '{}'", path.string()));
}

std::vector<double> read_f64_le(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kFileNotFound, fmt::format("data file not found: {}", path.string()));
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() % 8 != 0) {
    throw Error(ErrorCode::kTruncatedBlob,
                fmt::format("truncated blob: {} bytes is not a whole number of float64 values",
                            bytes.size()));
  }
  std::vector<double> values(bytes.size() / 8);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = get_le(bytes.data() + 8 * i);
  return values;
}

json RigManifest::to_json() const {
  json sections_json = json::array();
  for (const auto& s : sections) {
    json js = {{"kind", kind_name(s.kind)}, {"offset", s.offset}, {"length", s.length}};
    if (s.kind == SectionKind::kCorrection) {
      js["order"] = s.order;
      js["controllers"] = s.controllers;
    }
    sections_json.push_back(std::move(js));
  }
  return {{"format_version", format_version}, {"n_vertices", n_vertices},
          {"n_controllers", n_controllers},   {"data_file", data_file},
          {"sections", std::move(sections_json)}};
}

RigManifest RigManifest::from_json(const json& j) {
  const std::string ctx = "rig manifest";
  check_keys(j, {"format_version", "n_vertices", "n_controllers", "data_file", "sections"}, {}, ctx);
  check_version(j, ctx);
  RigManifest m;
  m.n_vertices = get_field<std::int64_t>(j, "n_vertices", ctx);
  m.n_controllers = get_field<std::int64_t>(j, "n_controllers", ctx);
  m.data_file = get_field<std::string>(j, "data_file", ctx);
  if (m.n_vertices < 1 || m.n_controllers < 1) {
    throw Error(ErrorCode::kSchema, "rig manifest: n_vertices and n_controllers must be >= 1");
  }
  if (!j.at("sections").is_array()) throw Error(ErrorCode::kSchema, "rig manifest: 'sections' must be an array");
  std::size_t index = 0;
  for (const auto& js : j.at("sections")) {
    const std::string sctx = fmt::format("rig manifest section {}", index++);
    const std::string kind = js.is_object() ? get_field<std::string>(js, "kind", sctx) : "";
    ManifestSection s;
    if (kind == "neutral" || kind == "blendshapes") {
      check_keys(js, {"kind", "offset", "length"}, {}, sctx);
      s.kind = kind == "neutral" ? SectionKind::kNeutral : SectionKind::kBlendshapes;
    } else if (kind == "correction") {
      check_keys(js, {"kind", "order", "controllers", "offset", "length"}, {}, sctx);
      s.kind = SectionKind::kCorrection;
      s.order = get_field<int>(js, "order", sctx);
      s.controllers = get_field<std::vector<int>>(js, "controllers", sctx);
      if (s.order < 2 || s.order > 4) {
        throw Error(ErrorCode::kInvalidTuple, fmt::format("{}: correction order {} not in 2..4", sctx, s.order));
      }
      if (s.controllers.size() != static_cast<std::size_t>(s.order)) {
        throw Error(ErrorCode::kInvalidTuple,
                    fmt::format("{}: order {} correction lists {} controllers", sctx, s.order,
                                s.controllers.size()));
      }
    } else {
      throw Error(ErrorCode::kSchema, fmt::format("{}: unknown kind '{}'", sctx, kind));
    }
    s.offset = get_field<std::uint64_t>(js, "offset", sctx);
    s.length = get_field<std::uint64_t>(js, "length", sctx);
    m.sections.push_back(std::move(s));
  }
  return m;
}

fs::path save_rig(const Rig& rig, const fs::path& dir, const std::string& name) {
  fs::create_directories(dir);
  RigManifest manifest;
  manifest.n_vertices = rig.n_vertices();
  manifest.n_controllers = rig.n_controllers();
  manifest.data_file = name + ".bin";
  const std::vector<double> blob = serialize(rig, &manifest);
  write_f64_le(dir / manifest.data_file, blob);
  const fs::path manifest_path = dir / (name + ".json");
  write_text(manifest_path, manifest.to_json().dump(2) + "\n");
  return manifest_path;
}

Rig load_rig(const fs::path& manifest_path) {
  const RigManifest manifest = RigManifest::from_json(read_json(manifest_path));
  const auto n = static_cast<std::uint64_t>(3 * manifest.n_vertices);
  const auto m = static_cast<std::uint64_t>(manifest.n_controllers);

  const ManifestSection* neutral = nullptr;
  const ManifestSection* blendshapes = nullptr;
  std::uint64_t required = 0;
  for (const auto& s : manifest.sections) {
    const std::uint64_t expected = s.kind == SectionKind::kBlendshapes ? n * m : n;
    if (s.length != expected) {
      throw Error(ErrorCode::kSchema,
                  fmt::format("rig manifest: {} section has length {}, expected {}",
                              kind_name(s.kind), s.length, expected));
    }
    if (s.kind == SectionKind::kNeutral) {
      if (neutral) throw Error(ErrorCode::kSchema, "rig manifest: duplicate neutral section");
      neutral = &s;
    } else if (s.kind == SectionKind::kBlendshapes) {
      if (blendshapes) throw Error(ErrorCode::kSchema, "rig manifest: duplicate blendshapes section");
      blendshapes = &s;
    }
    required = std::max(required, s.offset + s.length);
  }
  if (!neutral || !blendshapes) {
    throw Error(ErrorCode::kSchema, "rig manifest: neutral and blendshapes sections are required");
  }

  std::vector<const ManifestSection*> by_offset;
  for (const auto& s : manifest.sections) by_offset.push_back(&s);
  std::sort(by_offset.begin(), by_offset.end(),
            [](const auto* a, const auto* b) { return a->offset < b->offset; });
  for (std::size_t a = 1; a < by_offset.size(); ++a) {
    if (by_offset[a - 1]->offset + by_offset[a - 1]->length > by_offset[a]->offset) {
      throw Error(ErrorCode::kOverlappingSections,
                  fmt::format("rig manifest: sections at offsets {} and {} overlap",
                              by_offset[a - 1]->offset, by_offset[a]->offset));
    }
  }

  const fs::path blob_path = resolve_data_file(manifest_path, manifest.data_file);
  if (!fs::exists(blob_path)) {
    throw Error(ErrorCode::kFileNotFound, fmt::format("data file not found: {}", blob_path.string()));
  }
  const std::vector<double> blob = read_f64_le(blob_path);
  if (blob.size() < required) {
    throw Error(ErrorCode::kTruncatedBlob,
                fmt::format("truncated blob: expected {} elements, found {}", required, blob.size()));
  }

  Vector neutral_v = Eigen::Map<const Vector>(blob.data() + neutral->offset, static_cast<Eigen::Index>(n));
  Matrix B = Eigen::Map<const Matrix>(blob.data() + blendshapes->offset, static_cast<Eigen::Index>(n),
                                      static_cast<Eigen::Index>(m));
  std::vector<Correction2> c2;
  std::vector<Correction3> c3;
  std::vector<Correction4> c4;
  for (const auto& s : manifest.sections) {
    if (s.kind != SectionKind::kCorrection) continue;
    if (s.order == 2) c2.push_back(make_correction<2>(s, blob));
    if (s.order == 3) c3.push_back(make_correction<3>(s, blob));
    if (s.order == 4) c4.push_back(make_correction<4>(s, blob));
  }
  return Rig(std::move(neutral_v), std::move(B), std::move(c2), std::move(c3), std::move(c4));
}

std::string rig_hash(const Rig& rig) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t word) {
    for (int b = 0; b < 8; ++b) {
      h ^= (word >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  };
  mix(static_cast<std::uint64_t>(rig.n_vertices()));
  mix(static_cast<std::uint64_t>(rig.n_controllers()));
  RigManifest layout;
  for (double v : serialize(rig, &layout)) mix(std::bit_cast<std::uint64_t>(v));
  for (const auto& s : layout.sections) {
    for (int c : s.controllers) mix(static_cast<std::uint64_t>(c));
  }
  return fmt::format("{:016x}", h);
}

void save_targets(const fs::path& sidecar, const std::vector<Vector>& frames,
                  Coordinates coordinates) {
  if (frames.empty()) throw Error(ErrorCode::kInvalidArgument, "targets: no frames to save");
  const Eigen::Index n = frames.front().size();
  if (n == 0 || n % 3 != 0) throw Error(ErrorCode::kDimensionMismatch, "targets: frame length is not a multiple of 3");
  std::vector<double> blob;
  blob.reserve(frames.size() * static_cast<std::size_t>(n));
  for (const Vector& f : frames) {
    if (f.size() != n) throw Error(ErrorCode::kDimensionMismatch, "targets: frames differ in length");
    blob.insert(blob.end(), f.data(), f.data() + n);
  }
  const fs::path blob_path = blob_path_for(sidecar);
  write_f64_le(blob_path, blob);
  const json j = {{"format_version", kFormatVersion},
                  {"n_frames", frames.size()},
                  {"n_vertices", n / 3},
                  {"coordinates", coordinates == Coordinates::kRelative ? "relative" : "absolute"},
                  {"data_file", blob_path.filename().string()}};
  write_text(sidecar, j.dump(2) + "\n");
}

std::vector<Vector> load_targets(const fs::path& sidecar, const Rig& rig) {
  const json j = read_json(sidecar);
  const std::string ctx = "targets sidecar";
  check_keys(j, {"format_version", "n_frames", "n_vertices", "coordinates", "data_file"}, {}, ctx);
  check_version(j, ctx);
  const auto n_frames = get_field<std::uint64_t>(j, "n_frames", ctx);
  const auto n_vertices = get_field<std::int64_t>(j, "n_vertices", ctx);
  const auto coords = get_field<std::string>(j, "coordinates", ctx);
  if (coords != "relative" && coords != "absolute") {
    throw Error(ErrorCode::kSchema, fmt::format("{}: coordinates must be relative|absolute, got '{}'", ctx, coords));
  }
  if (n_vertices != rig.n_vertices()) {
    throw Error(ErrorCode::kDimensionMismatch,
                fmt::format("targets have {} vertices, rig has {}", n_vertices, rig.n_vertices()));
  }
  const std::vector<double> blob =
      read_f64_le(resolve_data_file(sidecar, get_field<std::string>(j, "data_file", ctx)));
  const auto n = static_cast<std::uint64_t>(rig.n_coords());
  if (blob.size() != n_frames * n) {
    throw Error(blob.size() < n_frames * n ? ErrorCode::kTruncatedBlob : ErrorCode::kSchema,
                fmt::format("{} blob: expected {} elements, found {}",
                            blob.size() < n_frames * n ? "truncated" : "oversized", n_frames * n,
                            blob.size()));
  }
  std::vector<Vector> frames;
  frames.reserve(n_frames);
  for (std::uint64_t f = 0; f < n_frames; ++f) {
    Vector v = Eigen::Map<const Vector>(blob.data() + f * n, static_cast<Eigen::Index>(n));
    if (coords == "absolute") v -= rig.neutral();
    frames.push_back(std::move(v));
  }
  return frames;
}

void save_weights(const fs::path& sidecar, const std::vector<Vector>& frames,
                  const WeightsProvenance& provenance) {
  if (frames.empty()) throw Error(ErrorCode::kInvalidArgument, "weights: no frames to save");
  const Eigen::Index m = frames.front().size();
  std::vector<double> blob;
  blob.reserve(frames.size() * static_cast<std::size_t>(m));
  for (const Vector& f : frames) {
    if (f.size() != m) throw Error(ErrorCode::kDimensionMismatch, "weights: frames differ in length");
    blob.insert(blob.end(), f.data(), f.data() + m);
  }
  const fs::path blob_path = blob_path_for(sidecar);
  write_f64_le(blob_path, blob);
  const json j = {{"format_version", kFormatVersion},
                  {"n_frames", frames.size()},
                  {"m", m},
                  {"data_file", blob_path.filename().string()},
                  {"provenance",
                   {{"solver", provenance.solver},
                    {"lambda", provenance.lambda},
                    {"init", provenance.init},
                    {"rig_hash", provenance.rig_hash}}}};
  write_text(sidecar, j.dump(2) + "\n");
}

WeightsFile load_weights(const fs::path& sidecar) {
  const json j = read_json(sidecar);
  const std::string ctx = "weights sidecar";
  check_keys(j, {"format_version", "n_frames", "m", "data_file", "provenance"}, {}, ctx);
  check_version(j, ctx);
  const auto n_frames = get_field<std::uint64_t>(j, "n_frames", ctx);
  const auto m = get_field<std::uint64_t>(j, "m", ctx);
  const json& prov = j.at("provenance");
  check_keys(prov, {"solver", "lambda", "init", "rig_hash"}, {}, ctx + " provenance");
  WeightsFile out;
  out.provenance.solver = get_field<std::string>(prov, "solver", ctx);
  out.provenance.lambda = get_field<double>(prov, "lambda", ctx);
  out.provenance.init = get_field<std::string>(prov, "init", ctx);
  out.provenance.rig_hash = get_field<std::string>(prov, "rig_hash", ctx);

  const std::vector<double> blob =
      read_f64_le(resolve_data_file(sidecar, get_field<std::string>(j, "data_file", ctx)));
  if (blob.size() != n_frames * m) {
    throw Error(blob.size() < n_frames * m ? ErrorCode::kTruncatedBlob : ErrorCode::kSchema,
                fmt::format("{} blob: expected {} elements, found {}",
                            blob.size() < n_frames * m ? "truncated" : "oversized", n_frames * m,
                            blob.size()));
  }
  out.frames.reserve(n_frames);
  for (std::uint64_t f = 0; f < n_frames; ++f) {
    out.frames.emplace_back(Eigen::Map<const Vector>(blob.data() + f * m, static_cast<Eigen::Index>(m)));
  }
  return out;
}

WeightsFile load_weights(const fs::path& sidecar, const Rig& rig) {
  WeightsFile out = load_weights(sidecar);
  if (!out.frames.empty() && out.frames.front().size() != rig.n_controllers()) {
    throw Error(ErrorCode::kDimensionMismatch,
                fmt::format("weights have {} controllers, rig has {}", out.frames.front().size(),
                            rig.n_controllers()));
  }
  return out;
}

}  // namespace rigsolve
