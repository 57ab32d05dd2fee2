#pragma once

// Binary structure masks congruent to a Tensor4.
//
// A mask stores explicit bits together with a declared kind. The kind is a
// claim about the bit pattern that validate_structure re-checks; nothing else
// trusts it.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "slth/tensor.hpp"

namespace slth {

enum class MaskTag : std::uint8_t {
  ChannelBlocked = 1,
  FilterRemoval = 2,
  Composite = 3,
};

struct MaskKind {
  MaskTag tag = MaskTag::FilterRemoval;
  /// ChannelBlocked: kernels per input channel.
  std::size_t block_size = 0;
  /// FilterRemoval: kept kernel indices, sorted and unique.
  std::vector<std::size_t> kept;
  /// Composite: flat list of non-composite parts.
  std::vector<MaskKind> parts;

  static MaskKind channel_blocked(std::size_t n);
  static MaskKind filter_removal(std::vector<std::size_t> kept);
  static MaskKind composite(std::vector<MaskKind> parts);

  std::string describe() const;
  friend bool operator==(const MaskKind&, const MaskKind&) = default;
};

class Mask4 {
 public:
  Mask4() = default;
  /// Throws ShapeError on a size mismatch, ParameterError on a non-binary bit.
  Mask4(Shape4 shape, std::vector<std::uint8_t> bits, MaskKind kind);

  const Shape4& shape() const { return shape_; }
  const MaskKind& kind() const { return kind_; }
  std::span<const std::uint8_t> bits() const { return bits_; }
  std::uint8_t bit(std::size_t i, std::size_t j, std::size_t t,
                   std::size_t l) const {
    return bits_[((i * shape_.cols + j) * shape_.channels + t) * shape_.kernels + l];
  }
  std::size_t ones() const;
  /// True iff kernel l has at least one 1 bit.
  bool kernel_active(std::size_t l) const;

  /// Copy with one bit flipped and the declared kind unchanged.
  Mask4 with_flipped(std::size_t i, std::size_t j, std::size_t t,
                     std::size_t l) const;

  friend bool operator==(const Mask4&, const Mask4&) = default;

 private:
  Shape4 shape_;
  std::vector<std::uint8_t> bits_;
  MaskKind kind_;
};

/// d x d x c x (c*n) mask with bit(i, j, k, l) = 1 iff l / n == k (0-based).
/// Throws ParameterError if any argument is zero.
Mask4 channel_blocked_mask(std::size_t d, std::size_t c, std::size_t n);

/// Keeps whole kernels of a 1 x 1 x c x (2nc) tensor by sign: within channel
/// t's block, the first n kernels survive when V >= 0 and the last n when
/// V <= 0. Zeros survive in both halves. The result is a FilterRemoval mask.
/// Throws ShapeError unless V is 1 x 1 x c x 2nc.
Mask4 sign_split_mask(const Tensor4& v, std::size_t n);

/// All-ones on the kept kernels, zeros elsewhere. Throws ParameterError for an
/// index outside [0, kernels).
Mask4 filter_removal_mask(Shape4 shape, std::vector<std::size_t> kept);

/// Bitwise AND. Filter-removal parts are merged into a single one; the result
/// is Composite unless only one part remains. Throws ShapeError on mismatch.
Mask4 compose(const Mask4& a, const Mask4& b);

struct MaskViolation {
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t t = 0;
  std::size_t l = 0;
  std::uint8_t expected = 0;
  std::uint8_t actual = 0;
};

struct StructureReport {
  bool valid = true;
  /// Shape-level problems, e.g. a channel-blocked claim with kernels != n * c.
  std::vector<std::string> problems;
  std::vector<MaskViolation> violations;

  std::string summary() const;
};

/// Recomputes the bits implied by the declared kind and lists every mismatch.
StructureReport validate_structure(const Mask4& mask);

/// True iff the kind is Composite with exactly one ChannelBlocked(n) part and
/// one FilterRemoval part.
bool is_blocked_filter_composite(const MaskKind& kind, std::size_t n);

Tensor4 apply_mask(const Tensor4& tensor, const Mask4& mask);

/// Binary layout, little-endian throughout:
///   "SLTM"  u32 version (=1)  u32 rows  u32 cols  u32 channels  u32 kernels
///   kind    u8 tag, then ChannelBlocked: u32 n
///                       FilterRemoval:  u32 count, count x u32 index
///                       Composite:      u32 count, count x kind
///   bits    ceil(volume / 8) bytes, bit b of the flat index at byte b / 8,
///           position b % 8 (least significant first)
std::vector<std::uint8_t> serialize_mask(const Mask4& mask);
/// Throws ParameterError on malformed input.
Mask4 deserialize_mask(std::span<const std::uint8_t> bytes);

void write_mask(const Mask4& mask, const std::filesystem::path& path);
Mask4 read_mask(const std::filesystem::path& path);

/// Human-readable dump: a header line, then one row of kernel bits per
/// (i, j, channel).
std::string dump_mask_text(const Mask4& mask);

}  // namespace slth
