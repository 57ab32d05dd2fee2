#include "slth/masks.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>

#include "slth/error.hpp"

namespace slth {
namespace {

constexpr std::uint32_t kMaskVersion = 1;
constexpr char kMaskMagic[4] = {'S', 'L', 'T', 'M'};

std::vector<std::size_t> sorted_unique(std::vector<std::size_t> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

std::vector<std::size_t> intersect(const std::vector<std::size_t>& a,
                                   const std::vector<std::size_t>& b) {
  std::vector<std::size_t> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                        std::back_inserter(out));
  return out;
}

void flatten_into(const MaskKind& kind, std::vector<MaskKind>& out) {
  if (kind.tag == MaskTag::Composite) {
    for (const MaskKind& p : kind.parts) flatten_into(p, out);
  } else {
    out.push_back(kind);
  }
}

// Channel-blocked parts first (deduplicated), then one merged filter removal.
MaskKind normalize(std::vector<MaskKind> flat) {
  std::vector<MaskKind> parts;
  std::optional<std::vector<std::size_t>> kept;
  for (MaskKind& p : flat) {
    if (p.tag == MaskTag::FilterRemoval) {
      kept = kept ? intersect(*kept, p.kept) : p.kept;
    } else if (std::find(parts.begin(), parts.end(), p) == parts.end()) {
      parts.push_back(std::move(p));
    }
  }
  if (kept) parts.push_back(MaskKind::filter_removal(std::move(*kept)));
  if (parts.size() == 1) return parts.front();
  MaskKind out;
  out.tag = MaskTag::Composite;
  out.parts = std::move(parts);
  return out;
}

// Bit the given non-composite kind requires at (t, l); spatial position is
// irrelevant for every kind.
std::uint8_t expected_bit(const MaskKind& kind, std::size_t t, std::size_t l) {
  switch (kind.tag) {
    case MaskTag::ChannelBlocked:
      return l / kind.block_size == t ? 1 : 0;
    case MaskTag::FilterRemoval:
      return std::binary_search(kind.kept.begin(), kind.kept.end(), l) ? 1 : 0;
    case MaskTag::Composite: {
      std::uint8_t b = 1;
      for (const MaskKind& p : kind.parts) b &= expected_bit(p, t, l);
      return b;
    }
  }
  return 0;
}

void check_kind_against_shape(const MaskKind& kind, const Shape4& shape,
                              std::vector<std::string>& problems) {
  switch (kind.tag) {
    case MaskTag::ChannelBlocked:
      if (kind.block_size == 0 || shape.kernels != kind.block_size * shape.channels) {
        problems.push_back("ChannelBlocked(" + std::to_string(kind.block_size) +
                           ") needs kernels = n * channels, have " +
                           std::to_string(shape.kernels) + " kernels and " +
                           std::to_string(shape.channels) + " channels");
      }
      break;
    case MaskTag::FilterRemoval:
      for (std::size_t l : kind.kept) {
        if (l >= shape.kernels) {
          problems.push_back("FilterRemoval keeps kernel " + std::to_string(l) +
                             " of " + std::to_string(shape.kernels));
        }
      }
      if (!std::is_sorted(kind.kept.begin(), kind.kept.end()) ||
          std::adjacent_find(kind.kept.begin(), kind.kept.end()) != kind.kept.end()) {
        problems.push_back("FilterRemoval kept list is not sorted and unique");
      }
      break;
    case MaskTag::Composite:
      if (kind.parts.empty()) problems.push_back("Composite has no parts");
      for (const MaskKind& p : kind.parts) check_kind_against_shape(p, shape, problems);
      break;
  }
}

class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) out_.push_back(static_cast<std::uint8_t>(v >> s));
  }
  void size(std::size_t v) {
    if (v > 0xFFFFFFFFu) throw ParameterError("mask field exceeds 32 bits");
    u32(static_cast<std::uint32_t>(v));
  }
  std::vector<std::uint8_t>& bytes() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}
  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(in_[pos_++]) << (8 * b);
    return v;
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto out = in_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw ParameterError("mask data is truncated");
  }
};

void write_kind(ByteWriter& w, const MaskKind& kind) {
  w.u8(static_cast<std::uint8_t>(kind.tag));
  switch (kind.tag) {
    case MaskTag::ChannelBlocked:
      w.size(kind.block_size);
      break;
    case MaskTag::FilterRemoval:
      w.size(kind.kept.size());
      for (std::size_t l : kind.kept) w.size(l);
      break;
    case MaskTag::Composite:
      w.size(kind.parts.size());
      for (const MaskKind& p : kind.parts) write_kind(w, p);
      break;
  }
}

MaskKind read_kind(ByteReader& r, int depth) {
  if (depth > 8) throw ParameterError("mask kind nesting too deep");
  const std::uint8_t tag = r.u8();
  switch (tag) {
    case static_cast<std::uint8_t>(MaskTag::ChannelBlocked):
      return MaskKind::channel_blocked(r.u32());
    case static_cast<std::uint8_t>(MaskTag::FilterRemoval): {
      const std::uint32_t count = r.u32();
      std::vector<std::size_t> kept;
      for (std::uint32_t i = 0; i < count; ++i) kept.push_back(r.u32());
      MaskKind k;
      k.tag = MaskTag::FilterRemoval;
      k.kept = std::move(kept);
      return k;
    }
    case static_cast<std::uint8_t>(MaskTag::Composite): {
      const std::uint32_t count = r.u32();
      MaskKind k;
      k.tag = MaskTag::Composite;
      for (std::uint32_t i = 0; i < count; ++i) k.parts.push_back(read_kind(r, depth + 1));
      return k;
    }
    default:
      throw ParameterError("unknown mask kind tag " + std::to_string(tag));
  }
}

}  // namespace

MaskKind MaskKind::channel_blocked(std::size_t n) {
  MaskKind k;
  k.tag = MaskTag::ChannelBlocked;
  k.block_size = n;
  return k;
}

MaskKind MaskKind::filter_removal(std::vector<std::size_t> kept) {
  MaskKind k;
  k.tag = MaskTag::FilterRemoval;
  k.kept = sorted_unique(std::move(kept));
  return k;
}

MaskKind MaskKind::composite(std::vector<MaskKind> parts) {
  std::vector<MaskKind> flat;
  for (const MaskKind& p : parts) flatten_into(p, flat);
  MaskKind k;
  k.tag = MaskTag::Composite;
  k.parts = std::move(flat);
  return k;
}

std::string MaskKind::describe() const {
  switch (tag) {
    case MaskTag::ChannelBlocked:
      return "ChannelBlocked(" + std::to_string(block_size) + ")";
    case MaskTag::FilterRemoval: {
      std::string s = "FilterRemoval{";
      for (std::size_t i = 0; i < kept.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(kept[i]);
      }
      return s + "}";
    }
    case MaskTag::Composite: {
      std::string s = "Composite[";
      for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) s += ", ";
        s += parts[i].describe();
      }
      return s + "]";
    }
  }
  return "?";
}

Mask4::Mask4(Shape4 shape, std::vector<std::uint8_t> bits, MaskKind kind)
    : shape_(shape), bits_(std::move(bits)), kind_(std::move(kind)) {
  if (shape.rows == 0 || shape.cols == 0 || shape.channels == 0 || shape.kernels == 0) {
    throw ShapeError("mask dimensions must be positive");
  }
  if (bits_.size() != shape.volume()) {
    throw ShapeError("mask has " + std::to_string(bits_.size()) + " bits, shape needs " +
                     std::to_string(shape.volume()));
  }
  for (std::uint8_t b : bits_) {
    if (b > 1) throw ParameterError("mask bits must be 0 or 1");
  }
}

std::size_t Mask4::ones() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1));
}

bool Mask4::kernel_active(std::size_t l) const {
  for (std::size_t i = 0; i < shape_.rows; ++i)
    for (std::size_t j = 0; j < shape_.cols; ++j)
      for (std::size_t t = 0; t < shape_.channels; ++t)
        if (bit(i, j, t, l)) return true;
  return false;
}

Mask4 Mask4::with_flipped(std::size_t i, std::size_t j, std::size_t t,
                          std::size_t l) const {
  Mask4 out = *this;
  const std::size_t idx = ((i * shape_.cols + j) * shape_.channels + t) * shape_.kernels + l;
  out.bits_.at(idx) ^= 1;
  return out;
}

Mask4 channel_blocked_mask(std::size_t d, std::size_t c, std::size_t n) {
  if (d == 0 || c == 0 || n == 0) {
    throw ParameterError("channel_blocked_mask: d, c, n must be >= 1");
  }
  const Shape4 shape{d, d, c, c * n};
  std::vector<std::uint8_t> bits(shape.volume());
  const MaskKind kind = MaskKind::channel_blocked(n);
  std::size_t idx = 0;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t t = 0; t < c; ++t)
        for (std::size_t l = 0; l < shape.kernels; ++l) bits[idx++] = expected_bit(kind, t, l);
  return Mask4(shape, std::move(bits), kind);
}

Mask4 sign_split_mask(const Tensor4& v, std::size_t n) {
  const Shape4& s = v.shape();
  if (s.rows != 1 || s.cols != 1) {
    throw ShapeError("sign_split_mask: V must have 1 x 1 spatial shape");
  }
  if (n == 0 || s.kernels != 2 * n * s.channels) {
    throw ShapeError("sign_split_mask: V needs 2 * n * channels kernels");
  }
  std::vector<std::size_t> kept;
  for (std::size_t l = 0; l < s.kernels; ++l) {
    const std::size_t t = l / (2 * n);
    const double value = v.at(0, 0, t, l);
    const bool first_half = l % (2 * n) < n;
    if (first_half ? value >= 0.0 : value <= 0.0) kept.push_back(l);
  }
  return filter_removal_mask(s, std::move(kept));
}

Mask4 filter_removal_mask(Shape4 shape, std::vector<std::size_t> kept) {
  for (std::size_t l : kept) {
    if (l >= shape.kernels) {
      throw ParameterError("filter_removal_mask: kernel " + std::to_string(l) +
                           " out of range [0, " + std::to_string(shape.kernels) + ")");
    }
  }
  const MaskKind kind = MaskKind::filter_removal(std::move(kept));
  std::vector<std::uint8_t> bits(shape.volume());
  for (std::size_t idx = 0; idx < bits.size(); ++idx) {
    bits[idx] = expected_bit(kind, 0, idx % std::max<std::size_t>(shape.kernels, 1));
  }
  return Mask4(shape, std::move(bits), kind);
}

Mask4 compose(const Mask4& a, const Mask4& b) {
  if (!(a.shape() == b.shape())) throw ShapeError("compose: shape mismatch");
  std::vector<std::uint8_t> bits(a.bits().begin(), a.bits().end());
  const auto rhs = b.bits();
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] &= rhs[i];
  std::vector<MaskKind> flat;
  flatten_into(a.kind(), flat);
  flatten_into(b.kind(), flat);
  return Mask4(a.shape(), std::move(bits), normalize(std::move(flat)));
}

std::string StructureReport::summary() const {
  if (valid) return "valid";
  std::ostringstream os;
  os << "invalid:";
  for (const std::string& p : problems) os << ' ' << p << ';';
  if (!violations.empty()) {
    os << ' ' << violations.size() << " bit violation(s), first at (" << violations[0].i
       << ',' << violations[0].j << ',' << violations[0].t << ',' << violations[0].l
       << ") expected " << int(violations[0].expected) << " got "
       << int(violations[0].actual);
  }
  return os.str();
}

StructureReport validate_structure(const Mask4& mask) {
  StructureReport report;
  const Shape4& s = mask.shape();
  check_kind_against_shape(mask.kind(), s, report.problems);
  if (!report.problems.empty()) {
    report.valid = false;
    return report;
  }
  for (std::size_t i = 0; i < s.rows; ++i)
    for (std::size_t j = 0; j < s.cols; ++j)
      for (std::size_t t = 0; t < s.channels; ++t)
        for (std::size_t l = 0; l < s.kernels; ++l) {
          const std::uint8_t want = expected_bit(mask.kind(), t, l);
          const std::uint8_t got = mask.bit(i, j, t, l);
          if (want != got) report.violations.push_back({i, j, t, l, want, got});
        }
  report.valid = report.violations.empty();
  return report;
}

bool is_blocked_filter_composite(const MaskKind& kind, std::size_t n) {
  if (kind.tag != MaskTag::Composite || kind.parts.size() != 2) return false;
  return kind.parts[0] == MaskKind::channel_blocked(n) &&
         kind.parts[1].tag == MaskTag::FilterRemoval;
}

Tensor4 apply_mask(const Tensor4& tensor, const Mask4& mask) {
  if (!(tensor.shape() == mask.shape())) throw ShapeError("apply_mask: shape mismatch");
  Tensor4 out = tensor;
  auto values = out.values();
  const auto bits = mask.bits();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!bits[i]) values[i] = 0.0;
  }
  return out;
}

std::vector<std::uint8_t> serialize_mask(const Mask4& mask) {
  ByteWriter w;
  for (char c : kMaskMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u32(kMaskVersion);
  const Shape4& s = mask.shape();
  w.size(s.rows);
  w.size(s.cols);
  w.size(s.channels);
  w.size(s.kernels);
  write_kind(w, mask.kind());
  const auto bits = mask.bits();
  std::vector<std::uint8_t> packed((bits.size() + 7) / 8, 0);
  for (std::size_t b = 0; b < bits.size(); ++b) {
    if (bits[b]) packed[b / 8] |= static_cast<std::uint8_t>(1u << (b % 8));
  }
  auto& out = w.bytes();
  out.insert(out.end(), packed.begin(), packed.end());
  return std::move(out);
}

Mask4 deserialize_mask(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  for (char c : kMaskMagic) {
    if (r.u8() != static_cast<std::uint8_t>(c)) throw ParameterError("not a mask file");
  }
  const std::uint32_t version = r.u32();
  if (version != kMaskVersion) {
    throw ParameterError("unsupported mask version " + std::to_string(version));
  }
  Shape4 shape;
  shape.rows = r.u32();
  shape.cols = r.u32();
  shape.channels = r.u32();
  shape.kernels = r.u32();
  MaskKind kind = read_kind(r, 0);
  const std::size_t volume = shape.volume();
  const auto packed = r.take((volume + 7) / 8);
  if (!r.done()) throw ParameterError("trailing bytes after mask data");
  std::vector<std::uint8_t> bits(volume);
  for (std::size_t b = 0; b < volume; ++b) bits[b] = (packed[b / 8] >> (b % 8)) & 1u;
  return Mask4(shape, std::move(bits), std::move(kind));
}

void write_mask(const Mask4& mask, const std::filesystem::path& path) {
  const auto bytes = serialize_mask(mask);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

Mask4 read_mask(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return deserialize_mask(bytes);
}

std::string dump_mask_text(const Mask4& mask) {
  const Shape4& s = mask.shape();
  std::ostringstream os;
  os << "mask " << s.rows << 'x' << s.cols << 'x' << s.channels << 'x' << s.kernels
     << " kind=" << mask.kind().describe() << " ones=" << mask.ones() << '\n';
  for (std::size_t i = 0; i < s.rows; ++i)
    for (std::size_t j = 0; j < s.cols; ++j)
      for (std::size_t t = 0; t < s.channels; ++t) {
        os << '(' << i << ',' << j << ',' << t << ") ";
        for (std::size_t l = 0; l < s.kernels; ++l) os << (mask.bit(i, j, t, l) ? '1' : '0');
        os << '\n';
      }
  return os.str();
}

}  // namespace slth
