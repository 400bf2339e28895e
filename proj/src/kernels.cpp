#include "ompadvisor/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <string>

namespace ompadvisor {

namespace {

// Row kernels shared by both variants; the variants differ only in how rows
// are distributed.

template <class T>
inline void matmul_row(const T* a_row, const T* b, T* c_row, std::size_t k, std::size_t n, bool accumulate) {
    if (!accumulate) {
        std::fill(c_row, c_row + n, T(0));
    }
    for (std::size_t p = 0; p < k; ++p) {
        const T av = a_row[p];
        const T* b_row = b + p * n;
        for (std::size_t j = 0; j < n; ++j) {
            c_row[j] += av * b_row[j];
        }
    }
}

template <class T>
inline T dot(const T* x, const T* y, std::size_t n) {
    T acc[8] = {};
    std::size_t p = 0;
    for (; p + 8 <= n; p += 8) {
        for (std::size_t u = 0; u < 8; ++u) {
            acc[u] += x[p + u] * y[p + u];
        }
    }
    for (; p < n; ++p) {
        acc[0] += x[p] * y[p];
    }
    return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

template <class T>
inline void matmul_bt_row(const T* a_row, const T* b, T* c_row, std::size_t k, std::size_t n, bool accumulate) {
    for (std::size_t j = 0; j < n; ++j) {
        const T v = dot(a_row, b + j * k, k);
        c_row[j] = accumulate ? c_row[j] + v : v;
    }
}

template <class T>
inline void matmul_at_row(const T* a, const T* b, T* c_row, std::size_t i, std::size_t m, std::size_t k,
                          std::size_t n, bool accumulate) {
    if (!accumulate) {
        std::fill(c_row, c_row + n, T(0));
    }
    for (std::size_t p = 0; p < k; ++p) {
        const T av = a[p * m + i];
        if (av == T(0)) {
            continue;
        }
        const T* b_row = b + p * n;
        for (std::size_t j = 0; j < n; ++j) {
            c_row[j] += av * b_row[j];
        }
    }
}

template <class T>
inline void softmax_row(T* row, std::size_t cols) {
    T mx = row[0];
    for (std::size_t j = 1; j < cols; ++j) {
        mx = std::max(mx, row[j]);
    }
    T sum = 0;
    for (std::size_t j = 0; j < cols; ++j) {
        row[j] = std::exp(row[j] - mx);
        sum += row[j];
    }
    const T inv = T(1) / sum;
    for (std::size_t j = 0; j < cols; ++j) {
        row[j] *= inv;
    }
}

template <class T>
inline void layernorm_row(const T* x, const T* gamma, const T* beta, T* y, T* xhat, T* rstd, std::size_t cols,
                          T eps) {
    T mean = 0;
    for (std::size_t j = 0; j < cols; ++j) {
        mean += x[j];
    }
    mean /= static_cast<T>(cols);
    T var = 0;
    for (std::size_t j = 0; j < cols; ++j) {
        const T d = x[j] - mean;
        var += d * d;
    }
    var /= static_cast<T>(cols);
    const T r = T(1) / std::sqrt(var + eps);
    *rstd = r;
    for (std::size_t j = 0; j < cols; ++j) {
        xhat[j] = (x[j] - mean) * r;
        y[j] = gamma[j] * xhat[j] + beta[j];
    }
}

template <class T>
inline T gelu_value(T x) {
    constexpr T c = T(0.7978845608028654);  // sqrt(2/pi)
    return T(0.5) * x * (T(1) + std::tanh(c * (x + T(0.044715) * x * x * x)));
}

std::atomic<int>& threads_setting() {
    static std::atomic<int> threads = [] {
        const char* env = std::getenv("OMPADVISOR_THREADS");
        if (env == nullptr) {
            return 1;
        }
        try {
            return std::max(1, std::stoi(env));
        } catch (const std::exception&) {
            return 1;
        }
    }();
    return threads;
}

}  // namespace

int kernel_threads() { return threads_setting().load(std::memory_order_relaxed); }

void set_kernel_threads(int threads) { threads_setting().store(std::max(1, threads), std::memory_order_relaxed); }

namespace serial {

template <class T>
void matmul(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        matmul_row(a + i * k, b, c + i * n, k, n, accumulate);
    }
}

template <class T>
void matmul_bt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        matmul_bt_row(a + i * k, b, c + i * n, k, n, accumulate);
    }
}

template <class T>
void matmul_at(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        matmul_at_row(a, b, c + i * n, i, m, k, n, accumulate);
    }
}

template <class T>
void softmax_rows(T* x, std::size_t rows, std::size_t cols) {
    for (std::size_t i = 0; i < rows; ++i) {
        softmax_row(x + i * cols, cols);
    }
}

template <class T>
void layernorm(const T* x, const T* gamma, const T* beta, T* y, T* xhat, T* rstd, std::size_t rows,
               std::size_t cols, T eps) {
    for (std::size_t i = 0; i < rows; ++i) {
        layernorm_row(x + i * cols, gamma, beta, y + i * cols, xhat + i * cols, rstd + i, cols, eps);
    }
}

template <class T>
void gelu(const T* x, T* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = gelu_value(x[i]);
    }
}

}  // namespace serial

namespace parallel {

template <class T>
void matmul(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
#pragma omp parallel for schedule(static) num_threads(kernel_threads())
    for (std::size_t i = 0; i < m; ++i) {
        matmul_row(a + i * k, b, c + i * n, k, n, accumulate);
    }
}

template <class T>
void matmul_bt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
#pragma omp parallel for schedule(static) num_threads(kernel_threads())
    for (std::size_t i = 0; i < m; ++i) {
        matmul_bt_row(a + i * k, b, c + i * n, k, n, accumulate);
    }
}

template <class T>
void matmul_at(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
#pragma omp parallel for schedule(static) num_threads(kernel_threads())
    for (std::size_t i = 0; i < m; ++i) {
        matmul_at_row(a, b, c + i * n, i, m, k, n, accumulate);
    }
}

template <class T>
void softmax_rows(T* x, std::size_t rows, std::size_t cols) {
#pragma omp parallel for schedule(static) num_threads(kernel_threads())
    for (std::size_t i = 0; i < rows; ++i) {
        softmax_row(x + i * cols, cols);
    }
}

template <class T>
void layernorm(const T* x, const T* gamma, const T* beta, T* y, T* xhat, T* rstd, std::size_t rows,
               std::size_t cols, T eps) {
#pragma omp parallel for schedule(static) num_threads(kernel_threads())
    for (std::size_t i = 0; i < rows; ++i) {
        layernorm_row(x + i * cols, gamma, beta, y + i * cols, xhat + i * cols, rstd + i, cols, eps);
    }
}

template <class T>
void gelu(const T* x, T* y, std::size_t n) {
#pragma omp parallel for schedule(static) num_threads(kernel_threads())
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = gelu_value(x[i]);
    }
}

}  // namespace parallel

#define OMPADVISOR_INSTANTIATE(NS, T)                                                                       \
    template void NS::matmul<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t, bool);      \
    template void NS::matmul_bt<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t, bool);   \
    template void NS::matmul_at<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t, bool);   \
    template void NS::softmax_rows<T>(T*, std::size_t, std::size_t);                                       \
    template void NS::layernorm<T>(const T*, const T*, const T*, T*, T*, T*, std::size_t, std::size_t, T); \
    template void NS::gelu<T>(const T*, T*, std::size_t);

OMPADVISOR_INSTANTIATE(serial, float)
OMPADVISOR_INSTANTIATE(serial, double)
OMPADVISOR_INSTANTIATE(parallel, float)
OMPADVISOR_INSTANTIATE(parallel, double)

#undef OMPADVISOR_INSTANTIATE

}  // namespace ompadvisor
