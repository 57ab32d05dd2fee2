#include "slth/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "slth/error.hpp"

namespace slth {
namespace {

void require_finite(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) throw ParameterError("tensor entry is not finite");
  }
}

}  // namespace

FeatureMap::FeatureMap(std::size_t height, std::size_t width,
                       std::size_t channels)
    : height_(height), width_(width), channels_(channels) {
  if (height == 0 || width == 0 || channels == 0) {
    throw ShapeError("feature map dimensions must be positive");
  }
  data_.assign(height * width * channels, 0.0);
}

FeatureMap::FeatureMap(std::size_t height, std::size_t width,
                       std::size_t channels, std::vector<double> data)
    : FeatureMap(height, width, channels) {
  if (data.size() != data_.size()) {
    throw ShapeError("feature map data length " + std::to_string(data.size()) +
                     " does not match " + std::to_string(data_.size()));
  }
  require_finite(data);
  data_ = std::move(data);
}

Tensor4::Tensor4(Shape4 shape) : shape_(shape) {
  if (shape.rows == 0 || shape.cols == 0 || shape.channels == 0 ||
      shape.kernels == 0) {
    throw ShapeError("tensor dimensions must be positive");
  }
  data_.assign(shape.volume(), 0.0);
}

Tensor4::Tensor4(Shape4 shape, std::vector<double> data) : Tensor4(shape) {
  if (data.size() != data_.size()) {
    throw ShapeError("tensor data length " + std::to_string(data.size()) +
                     " does not match " + std::to_string(data_.size()));
  }
  require_finite(data);
  data_ = std::move(data);
}

FeatureMap conv(const Tensor4& kernel, const FeatureMap& input) {
  if (kernel.channels() != input.channels()) {
    throw ShapeError("conv: kernel has " + std::to_string(kernel.channels()) +
                     " input channels, feature map has " +
                     std::to_string(input.channels()));
  }
  const std::size_t height = input.height();
  const std::size_t width = input.width();
  const std::size_t channels = input.channels();
  FeatureMap out(height, width, kernel.kernels());
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t s = 0; s < width; ++s) {
      for (std::size_t l = 0; l < kernel.kernels(); ++l) {
        double acc = 0.0;
        const std::size_t i_end = std::min(kernel.rows(), r + 1);
        const std::size_t j_end = std::min(kernel.cols(), s + 1);
        for (std::size_t i = 0; i < i_end; ++i) {
          for (std::size_t j = 0; j < j_end; ++j) {
            for (std::size_t t = 0; t < channels; ++t) {
              acc += kernel.at(i, j, t, l) * input.at(r - i, s - j, t);
            }
          }
        }
        out.at(r, s, l) = acc;
      }
    }
  }
  return out;
}

FeatureMap relu(const FeatureMap& input) { return pos_part(input); }

Tensor4 hadamard(const Tensor4& a, const Tensor4& b) {
  if (!(a.shape() == b.shape())) throw ShapeError("hadamard: shape mismatch");
  Tensor4 out = a;
  auto dst = out.values();
  auto rhs = b.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] *= rhs[i];
  return out;
}

FeatureMap add(const FeatureMap& a, const FeatureMap& b) {
  if (!a.same_shape(b)) throw ShapeError("add: shape mismatch");
  FeatureMap out = a;
  auto dst = out.values();
  auto rhs = b.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += rhs[i];
  return out;
}

FeatureMap subtract(const FeatureMap& a, const FeatureMap& b) {
  if (!a.same_shape(b)) throw ShapeError("subtract: shape mismatch");
  FeatureMap out = a;
  auto dst = out.values();
  auto rhs = b.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] -= rhs[i];
  return out;
}

Tensor4 add(const Tensor4& a, const Tensor4& b) {
  if (!(a.shape() == b.shape())) throw ShapeError("add: shape mismatch");
  Tensor4 out = a;
  auto dst = out.values();
  auto rhs = b.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += rhs[i];
  return out;
}

Tensor4 scale(const Tensor4& a, double factor) {
  Tensor4 out = a;
  for (double& v : out.values()) v *= factor;
  return out;
}

double norm_l1(std::span<const double> values) {
  double acc = 0.0;
  for (double v : values) acc += std::abs(v);
  return acc;
}

double norm_l2(std::span<const double> values) {
  double acc = 0.0;
  for (double v : values) acc += v * v;
  return std::sqrt(acc);
}

double norm_max(std::span<const double> values) {
  double acc = 0.0;
  for (double v : values) acc = std::max(acc, std::abs(v));
  return acc;
}

}  // namespace slth
