#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gradfilter/errors.hpp"

namespace gradfilter {

/// Extents of a rank-4 array. For feature maps the axes are (N, C, H, W);
/// for kernels they are (C_out, C_in, H, W).
struct Shape4 {
  std::size_t d0 = 1;
  std::size_t d1 = 1;
  std::size_t d2 = 1;
  std::size_t d3 = 1;

  [[nodiscard]] constexpr std::size_t size() const noexcept { return d0 * d1 * d2 * d3; }
  [[nodiscard]] constexpr std::size_t plane() const noexcept { return d2 * d3; }
  friend constexpr bool operator==(const Shape4&, const Shape4&) = default;
};

std::string to_string(const Shape4& s);

/// Dense row-major rank-4 array of doubles. The tag keeps feature maps and
/// kernels from being mixed up at call sites.
template <class Tag>
class Array4 {
 public:
  Array4() = default;

  explicit Array4(Shape4 shape) : shape_(shape), data_(checked_size(shape), 0.0) {}

  Array4(Shape4 shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != checked_size(shape)) {
      throw ShapeError("Array4: data length " + std::to_string(data_.size()) +
                       " does not match shape " + to_string(shape));
    }
  }

  [[nodiscard]] const Shape4& shape() const noexcept { return shape_; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }

  [[nodiscard]] std::size_t index(std::size_t i0, std::size_t i1, std::size_t i2,
                                  std::size_t i3) const noexcept {
    return ((i0 * shape_.d1 + i1) * shape_.d2 + i2) * shape_.d3 + i3;
  }

  double& operator()(std::size_t i0, std::size_t i1, std::size_t i2, std::size_t i3) noexcept {
    return data_[index(i0, i1, i2, i3)];
  }
  double operator()(std::size_t i0, std::size_t i1, std::size_t i2,
                    std::size_t i3) const noexcept {
    return data_[index(i0, i1, i2, i3)];
  }

  /// The (i0, i1) plane as a contiguous H*W span.
  [[nodiscard]] std::span<const double> plane(std::size_t i0, std::size_t i1) const noexcept {
    return {data_.data() + index(i0, i1, 0, 0), shape_.plane()};
  }
  [[nodiscard]] std::span<double> plane(std::size_t i0, std::size_t i1) noexcept {
    return {data_.data() + index(i0, i1, 0, 0), shape_.plane()};
  }

  [[nodiscard]] std::span<const double> values() const noexcept { return data_; }
  [[nodiscard]] std::span<double> values() noexcept { return data_; }
  [[nodiscard]] const std::vector<double>& raw() const noexcept { return data_; }

  friend bool operator==(const Array4&, const Array4&) = default;

 private:
  static std::size_t checked_size(const Shape4& s) {
    if (s.d0 == 0 || s.d1 == 0 || s.d2 == 0 || s.d3 == 0) {
      throw ShapeError("Array4: all extents must be >= 1, got " + to_string(s));
    }
    return s.size();
  }

  Shape4 shape_{};
  std::vector<double> data_ = std::vector<double>(1, 0.0);
};

struct FeatureMapTag {};
struct KernelTag {};

/// Feature maps and their gradients: (N, C, H, W).
using Tensor4 = Array4<FeatureMapTag>;
/// Convolution weights and their gradients: (C_out, C_in, H_k, W_k).
using Kernel4 = Array4<KernelTag>;

/// Reverses both spatial axes of every (c_out, c_in) kernel slice.
Kernel4 rot180(const Kernel4& k);

double frobenius_inner(std::span<const double> a, std::span<const double> b);

template <class Tag>
double frobenius_inner(const Array4<Tag>& a, const Array4<Tag>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("frobenius_inner: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  return frobenius_inner(a.values(), b.values());
}

double l2_norm(std::span<const double> v);

template <class Tag>
double l2_norm(const Array4<Tag>& t) {
  return l2_norm(t.values());
}

}  // namespace gradfilter
