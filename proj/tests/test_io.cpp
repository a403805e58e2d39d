#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include <json.hpp>

#include "oracles.hpp"
#include "rigsolve/errors.hpp"
#include "rigsolve/io.hpp"
#include "rigsolve/synth.hpp"

using namespace rigsolve;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("rigsolve-io-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

json read(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

void write(const fs::path& p, const json& j) { std::ofstream(p) << j.dump(2); }

template <typename F>
Error caught(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e;
  }
  FAIL("expected rigsolve::Error");
  return Error(ErrorCode::kIo, "");
}

Rig sample_rig() {
  std::mt19937_64 rng(9);
  return oracle::random_rig(rng, 7, 5, 4, 2, 1, true);
}

void check_same(const Rig& a, const Rig& b) {
  CHECK(a.neutral() == b.neutral());
  CHECK(a.blendshapes() == b.blendshapes());
  REQUIRE(a.corrections2().size() == b.corrections2().size());
  REQUIRE(a.corrections3().size() == b.corrections3().size());
  REQUIRE(a.corrections4().size() == b.corrections4().size());
  for (std::size_t p = 0; p < a.corrections2().size(); ++p) {
    CHECK(a.corrections2()[p].controllers == b.corrections2()[p].controllers);
    CHECK(a.corrections2()[p].delta == b.corrections2()[p].delta);
  }
  for (std::size_t p = 0; p < a.corrections3().size(); ++p) {
    CHECK(a.corrections3()[p].controllers == b.corrections3()[p].controllers);
    CHECK(a.corrections3()[p].delta == b.corrections3()[p].delta);
  }
  for (std::size_t p = 0; p < a.corrections4().size(); ++p) {
    CHECK(a.corrections4()[p].controllers == b.corrections4()[p].controllers);
    CHECK(a.corrections4()[p].delta == b.corrections4()[p].delta);
  }
}

}  // namespace

TEST_CASE("rig round trip is bitwise") {
  TempDir dir;
  GenSpec spec;
  spec.n_vertices = 300;
  spec.m = 15;
  spec.n_pairs = 12;
  spec.n_triples = 3;
  spec.n_quads = 2;
  spec.n_frames = 2;
  const SynthData data = generate(spec);
  const fs::path manifest = save_rig(data.rig, dir.path);
  CHECK(manifest == dir.path / "rig.json");
  const Rig back = load_rig(manifest);
  check_same(data.rig, back);
  CHECK(rig_hash(back) == rig_hash(data.rig));
  CHECK(rig_hash(back).size() == 16);
}

TEST_CASE("blob layout is little-endian column-major") {
  TempDir dir;
  Matrix B(3, 2);
  B << 1, 4, 2, 5, 3, 6;
  Vector neutral(3);
  neutral << -1, -2, -3;
  save_rig(Rig(neutral, B), dir.path, "tiny");
  std::ifstream in(dir.path / "tiny.bin", std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), {});
  REQUIRE(bytes.size() == 9 * 8);
  // 1.0 is 0x3FF0000000000000; element 3 is B(0, 0).
  const std::vector<unsigned char> one{0, 0, 0, 0, 0, 0, 0xF0, 0x3F};
  CHECK(std::equal(one.begin(), one.end(), bytes.begin() + 3 * 8));
  const std::vector<double> values = read_f64_le(dir.path / "tiny.bin");
  CHECK(values == std::vector<double>{-1, -2, -3, 1, 2, 3, 4, 5, 6});
}

TEST_CASE("missing blob") {
  TempDir dir;
  const fs::path manifest = save_rig(sample_rig(), dir.path);
  fs::remove(dir.path / "rig.bin");
  const Error e = caught([&] { load_rig(manifest); });
  CHECK(e.code() == ErrorCode::kFileNotFound);
  CHECK(std::string(e.what()).find("data file not found") != std::string::npos);
}

TEST_CASE("blob one element short") {
  TempDir dir;
  const Rig rig = sample_rig();
  const fs::path manifest = save_rig(rig, dir.path);
  const auto size = fs::file_size(dir.path / "rig.bin");
  fs::resize_file(dir.path / "rig.bin", size - 8);
  const std::uint64_t e_count = size / 8;
  const Error e = caught([&] { load_rig(manifest); });
  CHECK(e.code() == ErrorCode::kTruncatedBlob);
  CHECK(std::string(e.what()) ==
        "truncated blob: expected " + std::to_string(e_count) + " elements, found " + std::to_string(e_count - 1));
}

TEST_CASE("manifest schema errors") {
  TempDir dir;
  const fs::path manifest = save_rig(sample_rig(), dir.path);
  const json good = read(manifest);

  SUBCASE("version mismatch") {
    json j = good;
    j["format_version"] = 2;
    write(manifest, j);
    CHECK(caught([&] { load_rig(manifest); }).code() == ErrorCode::kVersionMismatch);
  }
  SUBCASE("unknown top-level field") {
    json j = good;
    j["comment"] = "hi";
    write(manifest, j);
    CHECK(caught([&] { load_rig(manifest); }).code() == ErrorCode::kSchema);
  }
  SUBCASE("unknown section field") {
    json j = good;
    j["sections"][0]["stride"] = 1;
    write(manifest, j);
    CHECK(caught([&] { load_rig(manifest); }).code() == ErrorCode::kSchema);
  }
  SUBCASE("missing field") {
    json j = good;
    j.erase("n_controllers");
    write(manifest, j);
    CHECK(caught([&] { load_rig(manifest); }).code() == ErrorCode::kSchema);
  }
  SUBCASE("wrong type") {
    json j = good;
    j["n_vertices"] = "7";
    write(manifest, j);
    CHECK(caught([&] { load_rig(manifest); }).code() == ErrorCode::kSchema);
  }
  SUBCASE("overlapping sections") {
    json j = good;
    j["sections"][1]["offset"] = j["sections"][1]["offset"].get<std::uint64_t>() - 1;
    write(manifest, j);
    CHECK(caught([&] { load_rig(manifest); }).code() == ErrorCode::kOverlappingSections);
  }
  SUBCASE("invalid tuple") {
    json j = good;
    for (auto& s : j["sections"]) {
      if (s["kind"] == "correction" && s["order"] == 2) {
        s["controllers"] = json::array({3, 1});
        break;
      }
    }
    write(manifest, j);
    CHECK(caught([&] { load_rig(manifest); }).code() == ErrorCode::kInvalidTuple);
  }
  SUBCASE("wrong section length") {
    json j = good;
    j["sections"][0]["length"] = 20;
    write(manifest, j);
    CHECK(caught([&] { load_rig(manifest); }).code() == ErrorCode::kSchema);
  }
  SUBCASE("not json") {
    std::ofstream(manifest) << "{ nope";
    CHECK(caught([&] { load_rig(manifest); }).code() == ErrorCode::kSchema);
  }
  SUBCASE("missing manifest") {
    CHECK(caught([&] { load_rig(dir.path / "other.json"); }).code() == ErrorCode::kFileNotFound);
  }
}

TEST_CASE("targets round trip and absolute coordinates") {
  TempDir dir;
  const Rig rig = sample_rig();
  std::mt19937_64 rng(2);
  std::vector<Vector> frames;
  for (int f = 0; f < 4; ++f) frames.push_back(oracle::random_vector(rng, rig.n_coords()));

  save_targets(dir.path / "t.json", frames);
  const auto back = load_targets(dir.path / "t.json", rig);
  REQUIRE(back.size() == frames.size());
  for (std::size_t f = 0; f < frames.size(); ++f) CHECK(back[f] == frames[f]);

  std::vector<Vector> absolute;
  for (const Vector& f : frames) absolute.push_back(f + rig.neutral());
  save_targets(dir.path / "abs.json", absolute, Coordinates::kAbsolute);
  CHECK(read(dir.path / "abs.json")["coordinates"] == "absolute");
  const auto rel = load_targets(dir.path / "abs.json", rig);
  for (std::size_t f = 0; f < frames.size(); ++f) CHECK(rel[f] == absolute[f] - rig.neutral());

  std::mt19937_64 rng2(3);
  const Rig other = oracle::random_rig(rng2, 8, 5, 0);
  CHECK(caught([&] { load_targets(dir.path / "t.json", other); }).code() == ErrorCode::kDimensionMismatch);

  fs::resize_file(dir.path / "t.bin", fs::file_size(dir.path / "t.bin") - 8);
  CHECK(caught([&] { load_targets(dir.path / "t.json", rig); }).code() == ErrorCode::kTruncatedBlob);
}

TEST_CASE("weights round trip with provenance") {
  TempDir dir;
  const Rig rig = sample_rig();
  std::mt19937_64 rng(4);
  std::vector<Vector> frames;
  for (int f = 0; f < 3; ++f) frames.push_back(oracle::random_weights(rng, 5));
  const WeightsProvenance prov{"mm-lm-quadratic", 2.5, "linear", rig_hash(rig)};
  save_weights(dir.path / "w.json", frames, prov);
  CHECK(fs::file_size(dir.path / "w.bin") == 8 * 3 * 5);
  const WeightsFile back = load_weights(dir.path / "w.json", rig);
  REQUIRE(back.frames.size() == 3);
  for (std::size_t f = 0; f < 3; ++f) CHECK(back.frames[f] == frames[f]);
  CHECK(back.provenance.solver == prov.solver);
  CHECK(back.provenance.lambda == prov.lambda);
  CHECK(back.provenance.init == prov.init);
  CHECK(back.provenance.rig_hash == prov.rig_hash);

  std::mt19937_64 rng2(5);
  const Rig other = oracle::random_rig(rng2, 7, 6, 0);
  CHECK(caught([&] { load_weights(dir.path / "w.json", other); }).code() == ErrorCode::kDimensionMismatch);

  json j = read(dir.path / "w.json");
  j["provenance"]["seed"] = 1;
  write(dir.path / "w.json", j);
  CHECK(caught([&] { load_weights(dir.path / "w.json"); }).code() == ErrorCode::kSchema);
}
