#pragma once

// Data-parallel inner loops used by the interaction evaluators and the
// feature networks. Each entry has a scalar reference implementation; wider
// variants are selected once at runtime and must agree with the reference to
// rounding (see tests/test_simd.cpp).

#include <cstddef>
#include <string_view>

namespace mfc::simd {

enum class Level { scalar, avx2 };

struct KernelTable {
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y = W x, W row-major (rows x cols)
  void (*matvec)(const double* w, const double* x, double* y, std::size_t rows,
                 std::size_t cols);
  // y = W^T x, W row-major (rows x cols), x has `rows` entries
  void (*matvec_t)(const double* w, const double* x, double* y,
                   std::size_t rows, std::size_t cols);
  // sum_i sum_j exp(-scale * |p_i - p_j|^2), coordinates in SoA layout
  double (*gaussian_pair_sum)(const double* xs, const double* ys,
                              const double* zs, std::size_t n, double scale);
  // sum_i sum_j <f_i, g_j> for row-major (n x r) blocks f and g
  double (*gram_sum)(const double* f, const double* g, std::size_t n,
                     std::size_t r);
  // out[i] = tanh(in[i]); in and out may alias
  void (*tanh)(const double* in, double* out, std::size_t n);
};

const KernelTable& scalar_kernels();
#if defined(MFC_HAVE_AVX2)
const KernelTable& avx2_kernels();
#endif

// Best level the running CPU supports (and this build contains).
Level detected_level();

// Level in use. Starts at detected_level() unless MFC_SIMD=scalar is set.
Level active_level();

// Throws std::invalid_argument if the level is not available.
void set_level(Level level);

bool available(Level level);

const KernelTable& kernels();
const KernelTable& kernels(Level level);

std::string_view to_string(Level level);

}  // namespace mfc::simd
