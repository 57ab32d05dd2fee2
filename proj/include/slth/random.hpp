#pragma once

// Seeded, counter-based sampling. A (master_seed, stream_id) pair names an
// independent stream; the n-th block of a stream is a pure function of
// (master_seed, stream_id, n), so results do not depend on scheduling.

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "slth/tensor.hpp"

namespace slth {

struct SeedSpec {
  std::uint64_t master_seed = 0;
  std::uint64_t stream_id = 0;

  friend bool operator==(const SeedSpec&, const SeedSpec&) = default;
};

/// Philox4x32-10 block function (Salmon et al., "Parallel random numbers:
/// as easy as 1, 2, 3").
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// SplitMix64 finalizer; used to derive stream ids.
std::uint64_t mix64(std::uint64_t x);

/// Combine a seed, a 64-bit tag, and an index into a child stream.
SeedSpec derive_stream(SeedSpec parent, std::uint64_t tag, std::uint64_t index);

/// FNV-1a over a string; turns a descriptive plan label into a tag.
std::uint64_t hash_label(std::string_view label);

/// Sequential reader over one stream. Not thread-safe; give each worker its
/// own stream id.
class RandomStream {
 public:
  explicit RandomStream(SeedSpec seed);

  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, bound). bound must be positive.
  std::uint64_t below(std::uint64_t bound);
  /// Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal();

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int buffered_ = 0;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;

  std::uint32_t next_u32();
};

/// Normally-scaled normal ensemble: vector i is scalars[i] * directions[i, :].
struct NsnEnsemble {
  std::size_t count = 0;
  std::size_t dim = 0;
  std::vector<double> scalars;     // count
  std::vector<double> directions;  // count x dim, row-major
  std::vector<double> vectors;     // count x dim, row-major

  double vector(std::size_t i, std::size_t j) const {
    return vectors[i * dim + j];
  }
};

/// Tensor with i.i.d. N(0, 1) entries. Throws ShapeError on a zero dimension.
Tensor4 sample_normal_tensor(Shape4 shape, SeedSpec seed);

/// Draws n NSN vectors of dimension d. Vector i consumes its scalar and then
/// its d directions, so the first m vectors of a larger draw coincide with a
/// draw of size m from the same seed.
NsnEnsemble sample_nsn(std::size_t n, std::size_t d, SeedSpec seed);

/// |N(0, 1)| draws.
std::vector<double> sample_half_normal(std::size_t n, SeedSpec seed);

/// Uniform entries on [lo, hi].
FeatureMap sample_uniform_feature_map(std::size_t height, std::size_t width,
                                      std::size_t channels, double lo, double hi,
                                      SeedSpec seed);

}  // namespace slth
