#pragma once

#include <complex>
#include <cstddef>
#include <limits>
#include <vector>

#include "gradfilter/tensor.hpp"

namespace gradfilter {

/// Real H x W map in row-major order.
struct Map2 {
  std::size_t h = 1;
  std::size_t w = 1;
  std::vector<double> values = std::vector<double>(1, 0.0);

  Map2() = default;
  Map2(std::size_t rows, std::size_t cols) : h(rows), w(cols), values(rows * cols, 0.0) {}
  Map2(std::size_t rows, std::size_t cols, std::vector<double> data);

  double& operator()(std::size_t i, std::size_t j) noexcept { return values[i * w + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return values[i * w + j]; }
};

/// Unnormalised 2D DFT: X[u,v] = sum_{h,w} x[h,w] exp(-2 pi i (uh/H + vw/W)).
struct Spectrum2 {
  std::size_t h = 1;
  std::size_t w = 1;
  std::vector<std::complex<double>> values;

  std::complex<double> operator()(std::size_t u, std::size_t v) const noexcept {
    return values[u * w + v];
  }
  [[nodiscard]] double energy(std::size_t u, std::size_t v) const noexcept {
    return std::norm(values[u * w + v]);
  }
};

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct SnrReport {
  double snr_gy = 0.0;
  double snr_gx = 0.0;
  bool holds = false;
};

struct DcRatioReport {
  std::size_t c_out = 0;
  std::size_t c_in = 0;
  /// Row-major (c_out, c_in); +inf when the kernel slice has no AC energy.
  std::vector<double> ratios;
  double minimum = kInfinity;

  [[nodiscard]] double operator()(std::size_t o, std::size_t i) const noexcept {
    return ratios[o * c_in + i];
  }
};

Spectrum2 dft2(const Map2& map);

/// Real part of the inverse of dft2.
Map2 idft2(const Spectrum2& spectrum);

/// Cyclic convolution c[h,w] = sum_{i,j} a[(h-i) mod H, (w-j) mod W] b[i,j],
/// with b zero-extended to a's extent.
Map2 circular_conv2(const Map2& a, const Map2& b);

/// ||reference||^2 / ||reference - approx||^2, +inf when the error norm is
/// below 1e-15 * ||reference||.
double measure_snr(std::span<const double> reference, std::span<const double> approx);
double measure_snr(const Tensor4& reference, const Tensor4& approx);

/// DC energy over the largest AC energy, on a spectrum.
double dc_ratio(const Spectrum2& spectrum);

/// Per channel pair, computed on each kernel slice's own H_k x W_k DFT.
DcRatioReport dc_energy_ratio(const Kernel4& weights);

/// Same ratio for one kernel slice zero-extended to an h x w grid, the
/// spectrum that multiplies G_y in the single-patch analysis.
double dc_energy_ratio_on_grid(const Map2& kernel, std::size_t h, std::size_t w);

/// Single-patch, circular-convolution check that filtering g_y and pushing
/// it through the rotated kernel never lowers the SNR. `kernel` must be no
/// larger than g_y; the patch covers all of g_y.
SnrReport verify_prop1(const Map2& kernel, const Map2& g_y);

/// Kernel slice (o, i) as a Map2.
Map2 kernel_slice(const Kernel4& weights, std::size_t o, std::size_t i);

}  // namespace gradfilter
