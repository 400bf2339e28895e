#pragma once

// Dense kernels used by the encoder. Matrices are row-major.
//
// `serial::` holds the reference loops; `parallel::` splits the same loops
// over output rows with OpenMP, so every output element is summed in the
// same order and results are bit-identical to the serial version.

#include <cstddef>

namespace ompadvisor {

namespace serial {

// C[m×n] (+)= A[m×k] · B[k×n]
template <class T>
void matmul(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate);
// C[m×n] (+)= A[m×k] · B[n×k]ᵀ
template <class T>
void matmul_bt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate);
// C[m×n] (+)= A[k×m]ᵀ · B[k×n]
template <class T>
void matmul_at(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate);

template <class T>
void softmax_rows(T* x, std::size_t rows, std::size_t cols);

// y = gamma * xhat + beta, xhat = (x - mean) * rstd. xhat and rstd are
// kept for the backward pass.
template <class T>
void layernorm(const T* x, const T* gamma, const T* beta, T* y, T* xhat, T* rstd, std::size_t rows,
               std::size_t cols, T eps);

template <class T>
void gelu(const T* x, T* y, std::size_t n);

}  // namespace serial

namespace parallel {

template <class T>
void matmul(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate);
template <class T>
void matmul_bt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate);
template <class T>
void matmul_at(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate);
template <class T>
void softmax_rows(T* x, std::size_t rows, std::size_t cols);
template <class T>
void layernorm(const T* x, const T* gamma, const T* beta, T* y, T* xhat, T* rstd, std::size_t rows,
               std::size_t cols, T eps);
template <class T>
void gelu(const T* x, T* y, std::size_t n);

}  // namespace parallel

// Thread count used by the dispatching kernels below. Initialized from
// OMPADVISOR_THREADS (default 1); 1 selects the serial kernels.
int kernel_threads();
void set_kernel_threads(int threads);

template <class T>
void matmul(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    kernel_threads() > 1 ? parallel::matmul(a, b, c, m, k, n, accumulate) : serial::matmul(a, b, c, m, k, n, accumulate);
}
template <class T>
void matmul_bt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    kernel_threads() > 1 ? parallel::matmul_bt(a, b, c, m, k, n, accumulate)
                         : serial::matmul_bt(a, b, c, m, k, n, accumulate);
}
template <class T>
void matmul_at(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    kernel_threads() > 1 ? parallel::matmul_at(a, b, c, m, k, n, accumulate)
                         : serial::matmul_at(a, b, c, m, k, n, accumulate);
}
template <class T>
void softmax_rows(T* x, std::size_t rows, std::size_t cols) {
    kernel_threads() > 1 ? parallel::softmax_rows(x, rows, cols) : serial::softmax_rows(x, rows, cols);
}
template <class T>
void layernorm(const T* x, const T* gamma, const T* beta, T* y, T* xhat, T* rstd, std::size_t rows,
               std::size_t cols, T eps) {
    kernel_threads() > 1 ? parallel::layernorm(x, gamma, beta, y, xhat, rstd, rows, cols, eps)
                         : serial::layernorm(x, gamma, beta, y, xhat, rstd, rows, cols, eps);
}
template <class T>
void gelu(const T* x, T* y, std::size_t n) {
    kernel_threads() > 1 ? parallel::gelu(x, y, n) : serial::gelu(x, y, n);
}

}  // namespace ompadvisor
