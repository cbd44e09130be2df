#pragma once

// Reduction of behavior characterizations to 2D: PCA via cyclic Jacobi
// eigendecomposition and exact O(n^2) t-SNE.

#include "vine/archive.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vine::reduce {

/// Dense row-major matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix from_rows(const std::vector<std::vector<double>>& rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    const std::vector<double>& data() const { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

struct Eigen {
    std::vector<double> values;  // nonincreasing
    Matrix vectors;              // row k is the eigenvector for values[k]
    int sweeps = 0;
};

/// Cyclic Jacobi for a symmetric matrix. Stops once the off-diagonal Frobenius norm
/// falls below tolerance * ||A||_F.
Eigen jacobi_eigen(Matrix a, double tolerance = 1e-10, int max_sweeps = 100);

struct PcaModel {
    std::vector<double> mean;
    Matrix components;  // k x D, orthonormal rows, largest-magnitude entry positive
    std::vector<double> eigenvalues;
};

PcaModel pca_fit(const Matrix& x, std::size_t k);
Matrix pca_project(const PcaModel& model, const Matrix& x);

struct TsneOptions {
    double perplexity = 30.0;
    int iterations = 1000;
    double learning_rate = 200.0;
    double early_exaggeration_factor = 4.0;
    int exaggeration_iters = 100;
    std::uint64_t seed = 0;

    void validate(std::size_t points) const;
};

inline constexpr int tsne_momentum_switch_iter = 250;
inline constexpr double tsne_initial_momentum = 0.5;
inline constexpr double tsne_final_momentum = 0.8;
inline constexpr double tsne_init_stdev = 1e-4;
inline constexpr double tsne_jitter_stdev = 1e-9;
inline constexpr double tsne_p_floor = 1e-12;
inline constexpr double tsne_entropy_tolerance = 1e-10;

/// Bandwidth for point `self` such that the base-2 entropy of p(j|i) matches
/// log2(perplexity). `squared_distances` includes the point itself at `self`.
double sigma_search(std::span<const double> squared_distances, std::size_t self, double perplexity);

/// p(j|i) for a given bandwidth; zero at `self`.
std::vector<double> conditional_probabilities(std::span<const double> squared_distances, std::size_t self, double sigma);

Matrix pairwise_squared_distances(const Matrix& x);

/// Copy of x with seeded N(0, tsne_jitter_stdev) noise added when any two rows are identical.
Matrix jitter_duplicates(const Matrix& x, std::uint64_t seed);

/// Symmetrized joint affinities (p(j|i) + p(i|j)) / 2n, floored at 1e-12 off the
/// diagonal and renormalized to sum to one.
Matrix joint_probabilities(const Matrix& x, double perplexity);

double kl_divergence(const Matrix& p, const Matrix& y);

struct TsneResult {
    Matrix embedding;
    double kl_after_exaggeration = 0.0;
    double kl_final = 0.0;
};

TsneResult tsne_run(const Matrix& x, const TsneOptions& options);
Matrix tsne_embed(const Matrix& x, const TsneOptions& options);

enum class Method { identity, pca, tsne };

Method parse_method(std::string_view name);
std::string_view to_string(Method method);

/// Per-generation 2D coordinates, parent first, aligned with the archive.
struct ReducedView {
    Method method = Method::identity;
    std::vector<Matrix> generations;

    bool operator==(const ReducedView&) const = default;
};

/// Pooled (all generations, parent then offspring) BC matrix.
Matrix pooled_bcs(const std::vector<GenerationRecord>& records);

ReducedView reduce_records(const RunManifest& manifest, const std::vector<GenerationRecord>& records, Method method,
                           const TsneOptions& options = {});
ReducedView reduce_run(const archive::RunArchive& run, Method method, const TsneOptions& options = {});

std::string view_file_name(Method method);
void write_view(const std::filesystem::path& run_dir, const ReducedView& view);
ReducedView read_view(const std::filesystem::path& run_dir, Method method);
std::vector<Method> available_views(const std::filesystem::path& run_dir);

}  // namespace vine::reduce
