#include "slth/random.hpp"

#include <cmath>
#include <numbers>

#include "slth/error.hpp"

namespace slth {
namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                    std::uint32_t& lo) {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
    mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kPhiloxW0;
    key[1] += kPhiloxW1;
  }
  return ctr;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

SeedSpec derive_stream(SeedSpec parent, std::uint64_t tag,
                       std::uint64_t index) {
  const std::uint64_t id = mix64(mix64(parent.stream_id ^ mix64(tag)) + index);
  return {parent.master_seed, id};
}

std::uint64_t hash_label(std::string_view label) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

RandomStream::RandomStream(SeedSpec seed)
    : key_{static_cast<std::uint32_t>(seed.master_seed),
           static_cast<std::uint32_t>(seed.master_seed >> 32)},
      stream_(seed.stream_id) {}

std::uint32_t RandomStream::next_u32() {
  if (buffered_ == 0) {
    buffer_ = philox4x32({static_cast<std::uint32_t>(block_),
                          static_cast<std::uint32_t>(block_ >> 32),
                          static_cast<std::uint32_t>(stream_),
                          static_cast<std::uint32_t>(stream_ >> 32)},
                         key_);
    ++block_;
    buffered_ = 4;
  }
  return buffer_[4 - buffered_--];
}

std::uint64_t RandomStream::next_u64() {
  const std::uint64_t hi = next_u32();
  return (hi << 32) | next_u32();
}

double RandomStream::uniform() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

std::uint64_t RandomStream::below(std::uint64_t bound) {
  if (bound == 0) throw ParameterError("below: bound must be positive");
  // Rejection keeps the draw unbiased.
  const std::uint64_t limit = -bound % bound;
  for (;;) {
    const std::uint64_t x = next_u64();
    if (x >= limit) return x % bound;
  }
}

double RandomStream::normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  cached_normal_ = radius * std::sin(angle);
  has_cached_normal_ = true;
  return radius * std::cos(angle);
}

Tensor4 sample_normal_tensor(Shape4 shape, SeedSpec seed) {
  Tensor4 out(shape);
  RandomStream rng(seed);
  for (double& v : out.values()) v = rng.normal();
  return out;
}

NsnEnsemble sample_nsn(std::size_t n, std::size_t d, SeedSpec seed) {
  if (n == 0 || d == 0) throw ShapeError("sample_nsn: n and d must be >= 1");
  NsnEnsemble ens;
  ens.count = n;
  ens.dim = d;
  ens.scalars.resize(n);
  ens.directions.resize(n * d);
  ens.vectors.resize(n * d);
  RandomStream rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = rng.normal();
    ens.scalars[i] = z;
    for (std::size_t j = 0; j < d; ++j) {
      const double dir = rng.normal();
      ens.directions[i * d + j] = dir;
      ens.vectors[i * d + j] = z * dir;
    }
  }
  return ens;
}

std::vector<double> sample_half_normal(std::size_t n, SeedSpec seed) {
  if (n == 0) throw ShapeError("sample_half_normal: n must be >= 1");
  std::vector<double> out(n);
  RandomStream rng(seed);
  for (double& v : out) v = std::abs(rng.normal());
  return out;
}

FeatureMap sample_uniform_feature_map(std::size_t height, std::size_t width,
                                      std::size_t channels, double lo, double hi,
                                      SeedSpec seed) {
  FeatureMap out(height, width, channels);
  RandomStream rng(seed);
  for (double& v : out.values()) v = rng.uniform(lo, hi);
  return out;
}

}  // namespace slth
