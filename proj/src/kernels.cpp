#include "pirnn/kernels.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <vector>

namespace pirnn::kernels {

namespace {

constexpr std::size_t kRowBlock = 4;
constexpr std::size_t kColBlock = 8;

using v4 = double __attribute__((vector_size(32)));

// NI x 8 output tile held in vector registers.
template <std::size_t NI>
void tile(const double* __restrict a, std::size_t a_row, std::size_t a_col, const double* __restrict b,
          std::size_t c, std::size_t i0, std::size_t j0, std::size_t k, double (*acc)[kColBlock]) {
  v4 lo[NI] = {}, hi[NI] = {};
  for (std::size_t p = 0; p < k; ++p) {
    const double* brow = b + p * c + j0;
    v4 b_lo, b_hi;
    std::memcpy(&b_lo, brow, sizeof b_lo);
    std::memcpy(&b_hi, brow + 4, sizeof b_hi);
    for (std::size_t ii = 0; ii < NI; ++ii) {
      const double av = a[(i0 + ii) * a_row + p * a_col];
      lo[ii] += av * b_lo;
      hi[ii] += av * b_hi;
    }
  }
  for (std::size_t ii = 0; ii < NI; ++ii) {
    std::memcpy(acc[ii], &lo[ii], sizeof lo[ii]);
    std::memcpy(acc[ii] + 4, &hi[ii], sizeof hi[ii]);
  }
}

// out = [out +] A*B with A(i, p) = a[i * a_row + p * a_col] and B row-major k x c.
// Every output element is summed from zero in increasing p, then added to out,
// which is exactly the order of the reference loops.
void blocked(const double* __restrict a, std::size_t a_row, std::size_t a_col, const double* __restrict b,
             double* __restrict out, std::size_t r, std::size_t k, std::size_t c, bool accumulate) {
  const std::size_t row_blocks = (r + kRowBlock - 1) / kRowBlock;
  auto block = [&](std::size_t rb) {
    const std::size_t i0 = rb * kRowBlock;
    const std::size_t ni = std::min(kRowBlock, r - i0);
    for (std::size_t j0 = 0; j0 < c; j0 += kColBlock) {
      const std::size_t nj = std::min(kColBlock, c - j0);
      double acc[kRowBlock][kColBlock] = {};
      if (nj == kColBlock) {
        switch (ni) {
          case 4: tile<4>(a, a_row, a_col, b, c, i0, j0, k, acc); break;
          case 3: tile<3>(a, a_row, a_col, b, c, i0, j0, k, acc); break;
          case 2: tile<2>(a, a_row, a_col, b, c, i0, j0, k, acc); break;
          default: tile<1>(a, a_row, a_col, b, c, i0, j0, k, acc); break;
        }
      } else {
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = b + p * c + j0;
          for (std::size_t ii = 0; ii < ni; ++ii) {
            const double av = a[(i0 + ii) * a_row + p * a_col];
            for (std::size_t jj = 0; jj < nj; ++jj) acc[ii][jj] += av * brow[jj];
          }
        }
      }
      for (std::size_t ii = 0; ii < ni; ++ii) {
        double* orow = out + (i0 + ii) * c + j0;
        for (std::size_t jj = 0; jj < nj; ++jj) orow[jj] = accumulate ? orow[jj] + acc[ii][jj] : acc[ii][jj];
      }
    }
  };
  if (r * k * c < kParallelWork) {
    for (std::size_t rb = 0; rb < row_blocks; ++rb) block(rb);
    return;
  }
  const auto n = static_cast<std::int64_t>(row_blocks);
#pragma omp parallel for schedule(static)
  for (std::int64_t rb = 0; rb < n; ++rb) block(static_cast<std::size_t>(rb));
}

}  // namespace

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> out, std::size_t r,
             std::size_t k, std::size_t c, bool accumulate) {
  blocked(a.data(), k, 1, b.data(), out.data(), r, k, c, accumulate);
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> out, std::size_t r,
             std::size_t k, std::size_t c, bool accumulate) {
  thread_local std::vector<double> bt;
  bt.resize(k * c);
  for (std::size_t j = 0; j < c; ++j) {
    for (std::size_t p = 0; p < k; ++p) bt[p * c + j] = b[j * k + p];
  }
  blocked(a.data(), k, 1, bt.data(), out.data(), r, k, c, accumulate);
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> out, std::size_t r,
             std::size_t k, std::size_t c, bool accumulate) {
  blocked(a.data(), 1, r, b.data(), out.data(), r, k, c, accumulate);
}

namespace reference {

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> out, std::size_t r,
             std::size_t k, std::size_t c, bool accumulate) {
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * c + j];
      out[i * c + j] = accumulate ? out[i * c + j] + s : s;
    }
  }
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> out, std::size_t r,
             std::size_t k, std::size_t c, bool accumulate) {
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[j * k + p];
      out[i * c + j] = accumulate ? out[i * c + j] + s : s;
    }
  }
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> out, std::size_t r,
             std::size_t k, std::size_t c, bool accumulate) {
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[p * r + i] * b[p * c + j];
      out[i * c + j] = accumulate ? out[i * c + j] + s : s;
    }
  }
}

}  // namespace reference

}  // namespace pirnn::kernels
