#include "rigsolve/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <set>

#include <fmt/format.h>

#include "rigsolve/errors.hpp"

namespace rigsolve {

namespace {

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : engine_(seed) {}

  // 53-bit uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::uint64_t below(std::uint64_t n) {
    // Rejection sampling keeps the draw unbiased and portable.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

  double normal() {
    // Box-Muller; 1 - u keeps the log argument in (0, 1].
    const double u = 1.0 - uniform();
    const double v = uniform();
    return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * std::numbers::pi * v);
  }

 private:
  std::mt19937_64 engine_;
};

double binomial(Eigen::Index n, std::size_t k) {
  if (static_cast<Eigen::Index>(k) > n) return 0.0;
  double out = 1.0;
  for (std::size_t a = 0; a < k; ++a) {
    out *= static_cast<double>(n - static_cast<Eigen::Index>(a)) / static_cast<double>(a + 1);
  }
  return out;
}

struct Block {
  Eigen::Index begin;
  Eigen::Index length;
};

// Smooth bump that is strictly positive inside the block.
double taper(Eigen::Index t, Eigen::Index length) {
  return std::sin(std::numbers::pi * (static_cast<double>(t) + 0.5) / static_cast<double>(length));
}

Vector localized_field(Sampler& rng, Eigen::Index n_coords, const Block& block, double scale) {
  Vector v = Vector::Zero(n_coords);
  for (Eigen::Index t = 0; t < block.length; ++t) {
    v[block.begin + t] = scale * taper(t, block.length) * rng.normal();
  }
  return v;
}

template <std::size_t Order>
std::vector<std::array<int, Order>> sample_tuples(Sampler& rng, Eigen::Index m, std::size_t count) {
  std::set<std::array<int, Order>> chosen;
  std::vector<std::array<int, Order>> out;
  out.reserve(count);
  while (out.size() < count) {
    std::set<int> members;
    while (members.size() < Order) members.insert(static_cast<int>(rng.below(static_cast<std::uint64_t>(m))));
    std::array<int, Order> tuple{};
    std::copy(members.begin(), members.end(), tuple.begin());
    if (chosen.insert(tuple).second) out.push_back(tuple);
  }
  return out;
}

template <std::size_t Order>
std::vector<Correction<Order>> make_corrections(Sampler& rng, const GenSpec& spec,
                                                const std::vector<Block>& blocks, double norm,
                                                std::size_t count) {
  std::vector<Correction<Order>> out;
  const Eigen::Index n_coords = 3 * spec.n_vertices;
  for (const auto& tuple : sample_tuples<Order>(rng, spec.m, count)) {
    // Supported on the region of one of the participating blendshapes.
    const int owner = tuple[rng.below(Order)];
    Vector delta = localized_field(rng, n_coords, blocks[static_cast<std::size_t>(owner)], 1.0);
    const double current = delta.norm();
    if (current > 0.0) delta *= norm / current;
    out.push_back({tuple, std::move(delta)});
  }
  return out;
}

}  // namespace

GenSpec GenSpec::paper_scale() { return GenSpec{}; }

void GenSpec::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kInvalidArgument, msg); };
  if (n_vertices < 1) fail("gen: n_vertices must be >= 1");
  if (m < 1) fail("gen: m must be >= 1");
  if (n_frames < 1) fail("gen: n_frames must be >= 1");
  if (!(sparsity > 0.0 && sparsity <= 1.0)) fail(fmt::format("gen: sparsity {} not in (0, 1]", sparsity));
  if (!(correction_scale >= 0.0)) fail("gen: correction_scale must be >= 0");
  if (!(noise_std >= 0.0)) fail("gen: noise_std must be >= 0");
  if (!(block_fraction > 0.0 && block_fraction <= 1.0)) fail("gen: block_fraction not in (0, 1]");
  if (!(amplitude > 0.0)) fail("gen: amplitude must be > 0");
  const std::array<std::pair<std::size_t, std::size_t>, 3> orders{
      {{2, n_pairs}, {3, n_triples}, {4, n_quads}}};
  for (const auto& [order, count] : orders) {
    if (count == 0) continue;
    const double available = binomial(m, order);
    if (static_cast<double>(count) > available) {
      fail(fmt::format("gen: {} order-{} tuples requested but only {} exist for m = {}", count,
                       order, available, m));
    }
  }
}

SynthData generate(const GenSpec& spec) {
  spec.validate();
  Sampler rng(spec.seed);
  const Eigen::Index n_coords = 3 * spec.n_vertices;

  Vector neutral(n_coords);
  for (Eigen::Index i = 0; i < n_coords; ++i) neutral[i] = 100.0 * rng.normal();

  const Eigen::Index n_blocks = std::max<Eigen::Index>(
      1, static_cast<Eigen::Index>(std::llround(spec.block_fraction * static_cast<double>(spec.n_vertices))));
  std::vector<Block> blocks;
  Matrix B(n_coords, spec.m);
  for (Eigen::Index j = 0; j < spec.m; ++j) {
    const auto start_vertex = static_cast<Eigen::Index>(
        rng.below(static_cast<std::uint64_t>(spec.n_vertices - n_blocks + 1)));
    blocks.push_back({3 * start_vertex, 3 * n_blocks});
    B.col(j) = localized_field(rng, n_coords, blocks.back(), spec.amplitude);
  }
  const double mean_norm = B.colwise().norm().mean();
  const double correction_norm = spec.correction_scale * mean_norm;

  // FIXME: tuple sampling is by rejection and slows down sharply when a count
  // approaches binomial(m, k); enumerate-and-shuffle would fix that.
  auto c2 = make_corrections<2>(rng, spec, blocks, correction_norm, spec.n_pairs);
  auto c3 = make_corrections<3>(rng, spec, blocks, correction_norm, spec.n_triples);
  auto c4 = make_corrections<4>(rng, spec, blocks, correction_norm, spec.n_quads);

  // Clamped sinusoids: a controller is active while sin(phase) exceeds
  // cos(pi * sparsity), which happens for a `sparsity` fraction of phases.
  const double cut = std::cos(std::numbers::pi * spec.sparsity);
  const std::size_t m = static_cast<std::size_t>(spec.m);
  std::vector<double> phase(m), freq(m), peak(m);
  for (std::size_t j = 0; j < m; ++j) {
    phase[j] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    freq[j] = rng.uniform(0.5, 2.0);
    peak[j] = rng.uniform(0.5, 1.0);
  }

  SynthData data{Rig(std::move(neutral), std::move(B), std::move(c2), std::move(c3), std::move(c4)),
                 {}, {}};
  data.ground_truth.reserve(spec.n_frames);
  data.targets.reserve(spec.n_frames);
  const double frames = static_cast<double>(spec.n_frames);
  for (std::size_t f = 0; f < spec.n_frames; ++f) {
    Vector w(spec.m);
    for (std::size_t j = 0; j < m; ++j) {
      const double angle = 2.0 * std::numbers::pi * freq[j] * static_cast<double>(f) / frames + phase[j];
      const double raw = peak[j] * (std::sin(angle) - cut) / (1.0 - cut);
      w[static_cast<Eigen::Index>(j)] = std::clamp(raw, 0.0, 1.0);
    }
    Vector target = data.rig.evaluate_full(w);
    if (spec.noise_std > 0.0) {
      for (Eigen::Index i = 0; i < n_coords; ++i) target[i] += spec.noise_std * rng.normal();
    }
    data.ground_truth.push_back(std::move(w));
    data.targets.push_back(std::move(target));
  }
  return data;
}

}  // namespace rigsolve
