#pragma once

// Dense tensors and the zero-padded convolution used throughout the library.
//
// Indexing is 0-based. A FeatureMap is stored row-major as (row, col, channel)
// and a Tensor4 as (row, col, channel, kernel).

#include <array>
#include <concepts>
#include <cstddef>
#include <span>
#include <vector>

namespace slth {

class FeatureMap {
 public:
  FeatureMap() = default;
  /// Zero-filled map. Throws ShapeError on a zero dimension.
  FeatureMap(std::size_t height, std::size_t width, std::size_t channels);
  /// Throws ShapeError when data.size() does not match, ParameterError when
  /// an entry is not finite.
  FeatureMap(std::size_t height, std::size_t width, std::size_t channels,
             std::vector<double> data);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }

  double& at(std::size_t r, std::size_t c, std::size_t ch) {
    return data_[(r * width_ + c) * channels_ + ch];
  }
  double at(std::size_t r, std::size_t c, std::size_t ch) const {
    return data_[(r * width_ + c) * channels_ + ch];
  }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  bool same_shape(const FeatureMap& other) const {
    return height_ == other.height_ && width_ == other.width_ &&
           channels_ == other.channels_;
  }

  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 0;
  std::vector<double> data_;
};

struct Shape4 {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t channels = 0;
  std::size_t kernels = 0;

  std::size_t volume() const { return rows * cols * channels * kernels; }
  friend bool operator==(const Shape4&, const Shape4&) = default;
};

class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(Shape4 shape);
  Tensor4(Shape4 shape, std::vector<double> data);

  const Shape4& shape() const { return shape_; }
  std::size_t rows() const { return shape_.rows; }
  std::size_t cols() const { return shape_.cols; }
  std::size_t channels() const { return shape_.channels; }
  std::size_t kernels() const { return shape_.kernels; }
  std::size_t size() const { return data_.size(); }

  std::size_t offset(std::size_t i, std::size_t j, std::size_t t,
                     std::size_t l) const {
    return ((i * shape_.cols + j) * shape_.channels + t) * shape_.kernels + l;
  }
  double& at(std::size_t i, std::size_t j, std::size_t t, std::size_t l) {
    return data_[offset(i, j, t, l)];
  }
  double at(std::size_t i, std::size_t j, std::size_t t, std::size_t l) const {
    return data_[offset(i, j, t, l)];
  }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  friend bool operator==(const Tensor4&, const Tensor4&) = default;

 private:
  Shape4 shape_;
  std::vector<double> data_;
};

template <typename T>
concept DenseTensor = requires(T t, const T ct) {
  { t.values() } -> std::convertible_to<std::span<double>>;
  { ct.values() } -> std::convertible_to<std::span<const double>>;
};

/// Zero-padded convolution with a trailing receptive field:
///   out(r, s, l) = sum_{i, j, t} K(i, j, t, l) * X(r - i, s - j, t)
/// where X outside the spatial range reads as 0. Output keeps the input's
/// spatial size. Accumulation runs in ascending (i, j, t) order.
FeatureMap conv(const Tensor4& kernel, const FeatureMap& input);

FeatureMap relu(const FeatureMap& input);

Tensor4 hadamard(const Tensor4& a, const Tensor4& b);

FeatureMap add(const FeatureMap& a, const FeatureMap& b);
FeatureMap subtract(const FeatureMap& a, const FeatureMap& b);
Tensor4 add(const Tensor4& a, const Tensor4& b);
Tensor4 scale(const Tensor4& a, double factor);

template <DenseTensor T>
T pos_part(const T& x) {
  T out = x;
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return out;
}

template <DenseTensor T>
T neg_part(const T& x) {
  T out = x;
  for (double& v : out.values()) v = v < 0.0 ? -v : 0.0;
  return out;
}

double norm_l1(std::span<const double> values);
double norm_l2(std::span<const double> values);
double norm_max(std::span<const double> values);

template <DenseTensor T>
double norm_l1(const T& x) {
  return norm_l1(std::span<const double>(x.values()));
}
template <DenseTensor T>
double norm_l2(const T& x) {
  return norm_l2(std::span<const double>(x.values()));
}
template <DenseTensor T>
double norm_max(const T& x) {
  return norm_max(std::span<const double>(x.values()));
}

}  // namespace slth
