#include "gradfilter/tensor.hpp"

#include <cmath>

namespace gradfilter {

std::string to_string(const Shape4& s) {
  return "(" + std::to_string(s.d0) + "," + std::to_string(s.d1) + "," + std::to_string(s.d2) +
         "," + std::to_string(s.d3) + ")";
}

Kernel4 rot180(const Kernel4& k) {
  const Shape4& s = k.shape();
  Kernel4 out(s);
  for (std::size_t o = 0; o < s.d0; ++o) {
    for (std::size_t i = 0; i < s.d1; ++i) {
      for (std::size_t u = 0; u < s.d2; ++u) {
        for (std::size_t v = 0; v < s.d3; ++v) {
          out(o, i, u, v) = k(o, i, s.d2 - 1 - u, s.d3 - 1 - v);
        }
      }
    }
  }
  return out;
}

double frobenius_inner(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("frobenius_inner: length " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double l2_norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

}  // namespace gradfilter
