#pragma once

// Data-parallel inner loops used by the policy network, the ES update, PCA and t-SNE.
//
// Every kernel has a scalar reference implementation and, where the target supports it,
// an AVX2 variant. The variant in use is chosen once at startup from the CPU feature
// bits; setting VINE_SIMD=scalar in the environment forces the reference path.
//
// Reductions are defined with four interleaved partial sums combined as
// (s0 + s1) + (s2 + s3), followed by the tail in order. The scalar reference follows
// the same order, so every variant returns bit-identical results and archives do not
// depend on which machine produced them.

#include <cstddef>
#include <span>
#include <string_view>

namespace vine::kernels {

enum class Isa { scalar, avx2 };

struct KernelTable {
    Isa isa;
    std::string_view name;
    double (*dot)(const double* x, const double* y, std::size_t n);
    double (*squared_distance)(const double* x, const double* y, std::size_t n);
    // y += a * x
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    // (x, y) <- (c*x - s*y, s*x + c*y)
    void (*rotate)(double* x, double* y, double c, double s, std::size_t n);
};

const KernelTable& scalar_table();

/// nullptr when the AVX2 variant was not compiled in or the CPU lacks AVX2.
const KernelTable* avx2_table();

const KernelTable& active();

double dot(std::span<const double> x, std::span<const double> y);
double squared_distance(std::span<const double> x, std::span<const double> y);
void axpy(double a, std::span<const double> x, std::span<double> y);
void rotate(std::span<double> x, std::span<double> y, double c, double s);

}  // namespace vine::kernels
