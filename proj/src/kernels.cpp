#include "vine/kernels.hpp"

#include "kernels_internal.hpp"

#include <cassert>
#include <cstdlib>
#include <string_view>

namespace vine::kernels {
namespace {

double dot_scalar(const double* x, const double* y, std::size_t n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += x[i] * y[i];
        s1 += x[i + 1] * y[i + 1];
        s2 += x[i + 2] * y[i + 2];
        s3 += x[i + 3] * y[i + 3];
    }
    double r = (s0 + s1) + (s2 + s3);
    for (; i < n; ++i) r += x[i] * y[i];
    return r;
}

double squared_distance_scalar(const double* x, const double* y, std::size_t n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const double d0 = x[i] - y[i];
        const double d1 = x[i + 1] - y[i + 1];
        const double d2 = x[i + 2] - y[i + 2];
        const double d3 = x[i + 3] - y[i + 3];
        s0 += d0 * d0;
        s1 += d1 * d1;
        s2 += d2 * d2;
        s3 += d3 * d3;
    }
    double r = (s0 + s1) + (s2 + s3);
    for (; i < n; ++i) {
        const double d = x[i] - y[i];
        r += d * d;
    }
    return r;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void rotate_scalar(double* x, double* y, double c, double s, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = x[i];
        const double yi = y[i];
        x[i] = c * xi - s * yi;
        y[i] = s * xi + c * yi;
    }
}

constexpr KernelTable scalar_kernels{
    Isa::scalar, "scalar", dot_scalar, squared_distance_scalar, axpy_scalar, rotate_scalar,
};

bool scalar_forced() {
    const char* v = std::getenv("VINE_SIMD");
    return v != nullptr && std::string_view(v) == "scalar";
}

}  // namespace

const KernelTable& scalar_table() { return scalar_kernels; }

const KernelTable* avx2_table() {
#if defined(VINE_HAVE_AVX2)
    static const bool supported = __builtin_cpu_supports("avx2");
    return supported ? &detail::avx2_kernels : nullptr;
#else
    return nullptr;
#endif
}

const KernelTable& active() {
    static const KernelTable& chosen = [] () -> const KernelTable& {
        if (!scalar_forced()) {
            if (const KernelTable* t = avx2_table()) return *t;
        }
        return scalar_kernels;
    }();
    return chosen;
}

double dot(std::span<const double> x, std::span<const double> y) {
    assert(x.size() == y.size());
    return active().dot(x.data(), y.data(), x.size());
}

double squared_distance(std::span<const double> x, std::span<const double> y) {
    assert(x.size() == y.size());
    return active().squared_distance(x.data(), y.data(), x.size());
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
    assert(x.size() == y.size());
    active().axpy(a, x.data(), y.data(), x.size());
}

void rotate(std::span<double> x, std::span<double> y, double c, double s) {
    assert(x.size() == y.size());
    active().rotate(x.data(), y.data(), c, s, x.size());
}

}  // namespace vine::kernels
