#include "mfc/simd/kernels.hpp"

#include <cmath>

namespace mfc::simd {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void matvec(const double* w, const double* x, double* y, std::size_t rows,
            std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) y[i] = dot(w + i * cols, x, cols);
}

void matvec_t(const double* w, const double* x, double* y, std::size_t rows,
              std::size_t cols) {
  for (std::size_t j = 0; j < cols; ++j) y[j] = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    const double xi = x[i];
    const double* row = w + i * cols;
    for (std::size_t j = 0; j < cols; ++j) y[j] += xi * row[j];
  }
}

double gaussian_pair_sum(const double* xs, const double* ys, const double* zs,
                         std::size_t n, double scale) {
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double dx = xs[i] - xs[j];
      const double dy = ys[i] - ys[j];
      const double dz = zs[i] - zs[j];
      total += std::exp(-scale * (dx * dx + dy * dy + dz * dz));
    }
  }
  return total;
}

double gram_sum(const double* f, const double* g, std::size_t n,
                std::size_t r) {
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) total += dot(f + i * r, g + j * r, r);
  return total;
}

void tanh_n(const double* in, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(in[i]);
}

constexpr KernelTable kScalar{dot,      matvec,   matvec_t,
                              gaussian_pair_sum, gram_sum, tanh_n};

}  // namespace

const KernelTable& scalar_kernels() { return kScalar; }

}  // namespace mfc::simd
