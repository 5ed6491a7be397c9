#include "gradfilter/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace gradfilter {

Map2::Map2(std::size_t rows, std::size_t cols, std::vector<double> data)
    : h(rows), w(cols), values(std::move(data)) {
  if (rows == 0 || cols == 0 || values.size() != rows * cols) {
    throw ShapeError("Map2: " + std::to_string(values.size()) + " values for " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
}

namespace {

// Twiddle table for one axis: exp(sign * 2 pi i k / n), k in [0, n).
std::vector<std::complex<double>> twiddles(std::size_t n, double sign) {
  std::vector<std::complex<double>> t(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>(k) /
                         static_cast<double>(n);
    t[k] = {std::cos(angle), std::sin(angle)};
  }
  return t;
}

}  // namespace

Spectrum2 dft2(const Map2& map) {
  const auto th = twiddles(map.h, -1.0);
  const auto tw = twiddles(map.w, -1.0);
  Spectrum2 out{map.h, map.w, std::vector<std::complex<double>>(map.h * map.w)};
  for (std::size_t u = 0; u < map.h; ++u) {
    for (std::size_t v = 0; v < map.w; ++v) {
      std::complex<double> acc{0.0, 0.0};
      for (std::size_t i = 0; i < map.h; ++i) {
        const std::complex<double> row = th[(u * i) % map.h];
        for (std::size_t j = 0; j < map.w; ++j) {
          acc += map(i, j) * row * tw[(v * j) % map.w];
        }
      }
      out.values[u * map.w + v] = acc;
    }
  }
  return out;
}

Map2 idft2(const Spectrum2& spectrum) {
  const auto th = twiddles(spectrum.h, 1.0);
  const auto tw = twiddles(spectrum.w, 1.0);
  const double scale = 1.0 / static_cast<double>(spectrum.h * spectrum.w);
  Map2 out(spectrum.h, spectrum.w);
  for (std::size_t i = 0; i < spectrum.h; ++i) {
    for (std::size_t j = 0; j < spectrum.w; ++j) {
      std::complex<double> acc{0.0, 0.0};
      for (std::size_t u = 0; u < spectrum.h; ++u) {
        const std::complex<double> row = th[(u * i) % spectrum.h];
        for (std::size_t v = 0; v < spectrum.w; ++v) {
          acc += spectrum(u, v) * row * tw[(v * j) % spectrum.w];
        }
      }
      out(i, j) = acc.real() * scale;
    }
  }
  return out;
}

Map2 circular_conv2(const Map2& a, const Map2& b) {
  if (b.h > a.h || b.w > a.w) {
    throw ShapeError("circular_conv2: operand " + std::to_string(b.h) + "x" + std::to_string(b.w) +
                     " larger than map " + std::to_string(a.h) + "x" + std::to_string(a.w));
  }
  Map2 out(a.h, a.w);
  for (std::size_t h = 0; h < a.h; ++h) {
    for (std::size_t w = 0; w < a.w; ++w) {
      double acc = 0.0;
      for (std::size_t i = 0; i < b.h; ++i) {
        const std::size_t src_h = (h + a.h - i) % a.h;
        for (std::size_t j = 0; j < b.w; ++j) {
          acc += a(src_h, (w + a.w - j) % a.w) * b(i, j);
        }
      }
      out(h, w) = acc;
    }
  }
  return out;
}

double measure_snr(std::span<const double> reference, std::span<const double> approx) {
  if (reference.size() != approx.size()) {
    throw ShapeError("measure_snr: length " + std::to_string(reference.size()) + " vs " +
                     std::to_string(approx.size()));
  }
  double signal = 0.0;
  double noise = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    signal += reference[i] * reference[i];
    const double e = reference[i] - approx[i];
    noise += e * e;
  }
  if (std::sqrt(noise) <= 1e-15 * std::sqrt(signal)) return kInfinity;
  return signal / noise;
}

double measure_snr(const Tensor4& reference, const Tensor4& approx) {
  if (reference.shape() != approx.shape()) {
    throw ShapeError("measure_snr: " + to_string(reference.shape()) + " vs " +
                     to_string(approx.shape()));
  }
  return measure_snr(reference.values(), approx.values());
}

double dc_ratio(const Spectrum2& spectrum) {
  double total = 0.0;
  double max_ac = 0.0;
  for (std::size_t u = 0; u < spectrum.h; ++u) {
    for (std::size_t v = 0; v < spectrum.w; ++v) {
      const double e = spectrum.energy(u, v);
      total += e;
      if (u != 0 || v != 0) max_ac = std::max(max_ac, e);
    }
  }
  if (max_ac < 1e-15 * total || total == 0.0) return kInfinity;
  return spectrum.energy(0, 0) / max_ac;
}

Map2 kernel_slice(const Kernel4& weights, std::size_t o, std::size_t i) {
  const auto plane = weights.plane(o, i);
  return Map2(weights.shape().d2, weights.shape().d3, {plane.begin(), plane.end()});
}

DcRatioReport dc_energy_ratio(const Kernel4& weights) {
  const Shape4& s = weights.shape();
  DcRatioReport report{s.d0, s.d1, std::vector<double>(s.d0 * s.d1), kInfinity};
  for (std::size_t o = 0; o < s.d0; ++o) {
    for (std::size_t i = 0; i < s.d1; ++i) {
      const double ratio = dc_ratio(dft2(kernel_slice(weights, o, i)));
      report.ratios[o * s.d1 + i] = ratio;
      report.minimum = std::min(report.minimum, ratio);
    }
  }
  return report;
}

double dc_energy_ratio_on_grid(const Map2& kernel, std::size_t h, std::size_t w) {
  if (kernel.h > h || kernel.w > w) {
    throw ShapeError("dc_energy_ratio_on_grid: kernel larger than grid");
  }
  Map2 extended(h, w);
  for (std::size_t i = 0; i < kernel.h; ++i) {
    for (std::size_t j = 0; j < kernel.w; ++j) extended(i, j) = kernel(i, j);
  }
  return dc_ratio(dft2(extended));
}

SnrReport verify_prop1(const Map2& kernel, const Map2& g_y) {
  if (kernel.h > g_y.h || kernel.w > g_y.w) {
    throw ShapeError("verify_prop1: kernel " + std::to_string(kernel.h) + "x" +
                     std::to_string(kernel.w) + " larger than patch " + std::to_string(g_y.h) +
                     "x" + std::to_string(g_y.w));
  }
  Map2 rotated(kernel.h, kernel.w);
  for (std::size_t i = 0; i < kernel.h; ++i) {
    for (std::size_t j = 0; j < kernel.w; ++j) {
      rotated(i, j) = kernel(kernel.h - 1 - i, kernel.w - 1 - j);
    }
  }

  // Extended accumulator so a constant patch averages back to itself.
  long double sum = 0.0L;
  for (double v : g_y.values) sum += v;
  const auto mean = static_cast<double>(sum / static_cast<long double>(g_y.values.size()));
  const Map2 filtered(g_y.h, g_y.w, std::vector<double>(g_y.values.size(), mean));

  const Map2 g_x = circular_conv2(g_y, rotated);
  const Map2 g_x_filtered = circular_conv2(filtered, rotated);

  SnrReport report;
  report.snr_gy = measure_snr(g_y.values, filtered.values);
  report.snr_gx = measure_snr(g_x.values, g_x_filtered.values);
  report.holds = report.snr_gx >= report.snr_gy - 1e-9;
  return report;
}

}  // namespace gradfilter
