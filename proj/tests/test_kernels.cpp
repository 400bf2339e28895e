#include <array>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "ompadvisor/kernels.hpp"
#include "ompadvisor/rng.hpp"

using namespace ompadvisor;

namespace {

template <class T>
std::vector<T> random_vec(Rng& rng, std::size_t n) {
    std::vector<T> v(n);
    for (auto& x : v) {
        x = static_cast<T>(rng.normal(0.0, 1.0));
    }
    return v;
}

struct ThreadGuard {
    int saved = kernel_threads();
    ~ThreadGuard() { set_kernel_threads(saved); }
};

}  // namespace

TEST_CASE_TEMPLATE("parallel kernels match the serial reference bit for bit", T, float, double) {
    ThreadGuard guard;
    set_kernel_threads(4);
    Rng rng(3);
    for (const auto [m, k, n] : {std::array<std::size_t, 3>{1, 1, 1}, {7, 13, 5}, {33, 64, 17}, {64, 9, 128}}) {
        const auto a = random_vec<T>(rng, m * k);
        const auto b = random_vec<T>(rng, k * n);
        const auto bt = random_vec<T>(rng, n * k);
        const auto at = random_vec<T>(rng, k * m);
        for (const bool acc : {false, true}) {
            auto base = random_vec<T>(rng, m * n);
            auto c1 = base;
            auto c2 = base;
            serial::matmul(a.data(), b.data(), c1.data(), m, k, n, acc);
            parallel::matmul(a.data(), b.data(), c2.data(), m, k, n, acc);
            CHECK(c1 == c2);
            c1 = base;
            c2 = base;
            serial::matmul_bt(a.data(), bt.data(), c1.data(), m, k, n, acc);
            parallel::matmul_bt(a.data(), bt.data(), c2.data(), m, k, n, acc);
            CHECK(c1 == c2);
            c1 = base;
            c2 = base;
            serial::matmul_at(at.data(), b.data(), c1.data(), m, k, n, acc);
            parallel::matmul_at(at.data(), b.data(), c2.data(), m, k, n, acc);
            CHECK(c1 == c2);
        }

        auto s1 = random_vec<T>(rng, m * n);
        auto s2 = s1;
        serial::softmax_rows(s1.data(), m, n);
        parallel::softmax_rows(s2.data(), m, n);
        CHECK(s1 == s2);

        const auto x = random_vec<T>(rng, m * n);
        const auto gamma = random_vec<T>(rng, n);
        const auto beta = random_vec<T>(rng, n);
        std::vector<T> y1(m * n), y2(m * n), xh1(m * n), xh2(m * n), r1(m), r2(m);
        serial::layernorm(x.data(), gamma.data(), beta.data(), y1.data(), xh1.data(), r1.data(), m, n, T(1e-5));
        parallel::layernorm(x.data(), gamma.data(), beta.data(), y2.data(), xh2.data(), r2.data(), m, n, T(1e-5));
        CHECK(y1 == y2);
        CHECK(xh1 == xh2);
        CHECK(r1 == r2);

        std::vector<T> g1(m * n), g2(m * n);
        serial::gelu(x.data(), g1.data(), m * n);
        parallel::gelu(x.data(), g2.data(), m * n);
        CHECK(g1 == g2);
    }
}

TEST_CASE("matmul agrees with a naive triple loop") {
    Rng rng(9);
    const std::size_t m = 5, k = 7, n = 3;
    const auto a = random_vec<double>(rng, m * k);
    const auto b = random_vec<double>(rng, k * n);
    std::vector<double> c(m * n), bt(n * k), at(k * m), c_bt(m * n), c_at(m * n);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            bt[j * k + i] = b[i * n + j];
        }
        for (std::size_t r = 0; r < m; ++r) {
            at[i * m + r] = a[r * k + i];
        }
    }
    matmul(a.data(), b.data(), c.data(), m, k, n, false);
    matmul_bt(a.data(), bt.data(), c_bt.data(), m, k, n, false);
    matmul_at(at.data(), b.data(), c_at.data(), m, k, n, false);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double want = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                want += a[i * k + p] * b[p * n + j];
            }
            CHECK(c[i * n + j] == doctest::Approx(want).epsilon(1e-12));
            CHECK(c_bt[i * n + j] == doctest::Approx(want).epsilon(1e-12));
            CHECK(c_at[i * n + j] == doctest::Approx(want).epsilon(1e-12));
        }
    }
}

TEST_CASE("softmax rows, layernorm and gelu values") {
    std::vector<double> x = {0.0, 0.0, std::log(2.0), -1e9};
    softmax_rows(x.data(), 1, 4);
    CHECK(x[0] == doctest::Approx(0.25));
    CHECK(x[2] == doctest::Approx(0.5));
    CHECK(x[3] == 0.0);

    const std::vector<double> in = {1.0, 3.0};
    const std::vector<double> gamma = {1.0, 1.0}, beta = {0.0, 0.5};
    std::vector<double> y(2), xhat(2), rstd(1);
    layernorm(in.data(), gamma.data(), beta.data(), y.data(), xhat.data(), rstd.data(), 1, 2, 0.0);
    CHECK(y[0] == doctest::Approx(-1.0));
    CHECK(y[1] == doctest::Approx(1.5));

    const std::vector<double> g_in = {0.0, 1.0, -3.0};
    std::vector<double> g(3);
    gelu(g_in.data(), g.data(), 3);
    CHECK(g[0] == 0.0);
    CHECK(g[1] == doctest::Approx(0.8411919906));
    CHECK(g[2] == doctest::Approx(-0.0036373920).epsilon(1e-6));
}

TEST_CASE("thread count setting") {
    ThreadGuard guard;
    set_kernel_threads(3);
    CHECK(kernel_threads() == 3);
    set_kernel_threads(0);
    CHECK(kernel_threads() >= 1);
}
