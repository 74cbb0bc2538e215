#pragma once

#include <cstddef>
#include <span>

// Dense matrix-product kernels on row-major buffers.
//
// Every kernel comes in two flavours: `reference::` is the plain triple loop
// used as a test oracle and as the benchmark baseline; the unqualified
// version is register-blocked and splits rows across OpenMP threads once
// r * k * c reaches kParallelWork. Both sum every output element in the same
// order, so they agree bitwise for any thread count.
namespace pirnn::kernels {

// C (r x c) = A (r x k) * B (k x c); adds into C when `accumulate`.
void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> out, std::size_t r,
             std::size_t k, std::size_t c, bool accumulate = false);
// C (r x c) = A (r x k) * B^T, with B stored c x k.
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> out, std::size_t r,
             std::size_t k, std::size_t c, bool accumulate = false);
// C (r x c) = A^T * B, with A stored k x r and B stored k x c.
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> out, std::size_t r,
             std::size_t k, std::size_t c, bool accumulate = false);

// Products with at least this many multiply-adds are split across threads.
inline constexpr std::size_t kParallelWork = std::size_t{1} << 18;

namespace reference {
void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> out, std::size_t r,
             std::size_t k, std::size_t c, bool accumulate = false);
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> out, std::size_t r,
             std::size_t k, std::size_t c, bool accumulate = false);
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> out, std::size_t r,
             std::size_t k, std::size_t c, bool accumulate = false);
}  // namespace reference

}  // namespace pirnn::kernels
