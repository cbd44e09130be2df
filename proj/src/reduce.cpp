#include "vine/reduce.hpp"

#include "vine/error.hpp"
#include "vine/kernels.hpp"
#include "vine/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace vine::reduce {

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return {};
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != m.cols()) throw InvalidInput("ragged rows");
        std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
    }
    return m;
}

// ---------------------------------------------------------------------------
// Jacobi eigendecomposition

Eigen jacobi_eigen(Matrix a, double tolerance, int max_sweeps) {
    const std::size_t n = a.rows();
    if (a.cols() != n) throw InvalidInput("jacobi_eigen needs a square matrix");

    Matrix vt(n, n);
    for (std::size_t i = 0; i < n; ++i) vt(i, i) = 1.0;

    double norm2 = 0.0;
    for (double v : a.data()) norm2 += v * v;
    const double threshold = tolerance * std::sqrt(norm2);

    auto off_norm = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) s += a(i, j) * a(i, j);
        return std::sqrt(s);
    };

    Eigen out;
    for (; out.sweeps < max_sweeps; ++out.sweeps) {
        const double off = off_norm();
        if (off <= threshold || off == 0.0) break;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double app = a(p, p);
                const double aqq = a(q, q);
                const double theta = (aqq - app) / (2.0 * apq);
                double t;
                if (std::abs(theta) > 1e150) {
                    t = 0.5 / theta;
                } else {
                    t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                }
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                // Rows p and q are contiguous: rotate them, then mirror into the columns.
                kernels::rotate(a.row(p), a.row(q), c, s);
                for (std::size_t r = 0; r < n; ++r) {
                    if (r == p || r == q) continue;
                    a(r, p) = a(p, r);
                    a(r, q) = a(q, r);
                }
                a(p, p) = app - t * apq;
                a(q, q) = aqq + t * apq;
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                kernels::rotate(vt.row(p), vt.row(q), c, s);
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
    out.values.resize(n);
    out.vectors = Matrix(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        out.values[k] = a(order[k], order[k]);
        std::copy(vt.row(order[k]).begin(), vt.row(order[k]).end(), out.vectors.row(k).begin());
    }
    return out;
}

// ---------------------------------------------------------------------------
// PCA

PcaModel pca_fit(const Matrix& x, std::size_t k) {
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    if (n < 2) throw InvalidInput("pca_fit needs at least 2 points");
    if (k < 1 || k > std::min(n, d)) {
        throw InvalidInput("pca_fit: k=" + std::to_string(k) + " outside [1, min(n, D)=" + std::to_string(std::min(n, d)) + "]");
    }

    PcaModel model;
    model.mean.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) model.mean[j] += x(i, j);
    for (double& m : model.mean) m /= static_cast<double>(n);

    // Centered data stored feature-major so covariance entries are contiguous dot products.
    Matrix centered_t(d, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) centered_t(j, i) = x(i, j) - model.mean[j];

    Matrix cov(d, d);
    const double norm = 1.0 / static_cast<double>(n - 1);
    for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = a; b < d; ++b) {
            const double v = kernels::dot(centered_t.row(a), centered_t.row(b)) * norm;
            cov(a, b) = v;
            cov(b, a) = v;
        }
    }

    Eigen eig = jacobi_eigen(std::move(cov));
    model.components = Matrix(k, d);
    model.eigenvalues.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
        auto src = eig.vectors.row(c);
        std::size_t big = 0;
        for (std::size_t j = 1; j < d; ++j)
            if (std::abs(src[j]) > std::abs(src[big])) big = j;
        const double flip = src[big] < 0.0 ? -1.0 : 1.0;
        auto dst = model.components.row(c);
        for (std::size_t j = 0; j < d; ++j) dst[j] = flip * src[j];
        model.eigenvalues[c] = std::max(0.0, eig.values[c]);
    }
    return model;
}

Matrix pca_project(const PcaModel& model, const Matrix& x) {
    const std::size_t d = model.mean.size();
    if (x.cols() != d) {
        throw InvalidInput("pca_project: data has " + std::to_string(x.cols()) + " columns, model expects " + std::to_string(d));
    }
    const std::size_t k = model.components.rows();
    Matrix y(x.rows(), k);
    std::vector<double> centered(d);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < d; ++j) centered[j] = x(i, j) - model.mean[j];
        for (std::size_t c = 0; c < k; ++c) y(i, c) = kernels::dot(centered, model.components.row(c));
    }
    return y;
}

// ---------------------------------------------------------------------------
// t-SNE

void TsneOptions::validate(std::size_t points) const {
    if (points < 2) throw InvalidInput("t-SNE needs at least 2 points");
    if (!(perplexity > 1.0)) throw InvalidInput("perplexity must exceed 1");
    if (perplexity >= static_cast<double>(points)) {
        throw InvalidInput("perplexity " + std::to_string(perplexity) + " must be below the point count " +
                           std::to_string(points));
    }
    if (iterations < 1) throw InvalidInput("t-SNE iterations must be positive");
    if (!(learning_rate > 0.0)) throw InvalidInput("t-SNE learning rate must be positive");
    if (!(early_exaggeration_factor >= 1.0)) throw InvalidInput("early exaggeration factor must be at least 1");
    if (exaggeration_iters < 0) throw InvalidInput("exaggeration_iters must be nonnegative");
}

namespace {

// Entropy in bits of p_j ~ exp(-beta * (d_j - d_min)), and the normalizer-free probabilities.
double entropy_bits(std::span<const double> d, std::size_t self, double beta, double d_min) {
    double z = 0.0;
    double weighted = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) {
        if (j == self) continue;
        const double shifted = d[j] - d_min;
        const double e = std::exp(-beta * shifted);
        z += e;
        weighted += e * shifted;
    }
    const double h_nats = std::log(z) + beta * weighted / z;
    return h_nats / std::numbers::ln2;
}

double min_other(std::span<const double> d, std::size_t self) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < d.size(); ++j)
        if (j != self) m = std::min(m, d[j]);
    return m;
}

}  // namespace

double sigma_search(std::span<const double> d, std::size_t self, double perplexity) {
    if (self >= d.size()) throw InvalidInput("sigma_search: self index out of range");
    if (!(perplexity > 0.0)) throw InvalidInput("sigma_search: perplexity must be positive");
    double total = 0.0;
    std::size_t nonzero = 0;
    for (std::size_t j = 0; j < d.size(); ++j) {
        if (j == self) continue;
        if (d[j] < 0.0 || !std::isfinite(d[j])) throw InvalidInput("sigma_search: distances must be finite and nonnegative");
        if (d[j] > 0.0) {
            total += d[j];
            ++nonzero;
        }
    }
    if (nonzero == 0) throw InvalidInput("sigma_search: all distances are zero (duplicate points)");

    const double target = std::log2(perplexity);
    const double d_min = min_other(d, self);
    // Starting from the inverse mean distance keeps the search scale-equivariant.
    double beta = static_cast<double>(nonzero) / total;
    // Equal distances make the entropy independent of beta.
    double d_max = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j)
        if (j != self) d_max = std::max(d_max, d[j]);
    if (d_max == d_min) return std::sqrt(1.0 / (2.0 * beta));
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 64; ++iter) {
        const double h = entropy_bits(d, self, beta, d_min);
        const double diff = h - target;
        if (std::abs(diff) < tsne_entropy_tolerance) break;
        if (diff > 0.0) {
            lo = beta;
            beta = std::isinf(hi) ? beta * 2.0 : (beta + hi) / 2.0;
        } else {
            hi = beta;
            beta = (beta + lo) / 2.0;
        }
    }
    return std::sqrt(1.0 / (2.0 * beta));
}

std::vector<double> conditional_probabilities(std::span<const double> d, std::size_t self, double sigma) {
    const double beta = 1.0 / (2.0 * sigma * sigma);
    const double d_min = min_other(d, self);
    std::vector<double> p(d.size(), 0.0);
    double z = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) {
        if (j == self) continue;
        p[j] = std::exp(-beta * (d[j] - d_min));
        z += p[j];
    }
    for (double& v : p) v /= z;
    return p;
}

Matrix pairwise_squared_distances(const Matrix& x) {
    const std::size_t n = x.rows();
    Matrix d(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = kernels::squared_distance(x.row(i), x.row(j));
            d(i, j) = v;
            d(j, i) = v;
        }
    }
    return d;
}

Matrix jitter_duplicates(const Matrix& x, std::uint64_t seed) {
    std::vector<std::size_t> order(x.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto row_less = [&](std::size_t a, std::size_t b) {
        return std::lexicographical_compare(x.row(a).begin(), x.row(a).end(), x.row(b).begin(), x.row(b).end());
    };
    std::sort(order.begin(), order.end(), row_less);
    bool duplicate = false;
    for (std::size_t k = 1; k < order.size() && !duplicate; ++k) {
        duplicate = std::equal(x.row(order[k]).begin(), x.row(order[k]).end(), x.row(order[k - 1]).begin());
    }
    if (!duplicate) return x;

    Matrix out = x;
    Rng rng(derive_seed({seed, 0x6a6974ULL}));
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (double& v : out.row(i)) v += tsne_jitter_stdev * rng.normal();
    return out;
}

Matrix joint_probabilities(const Matrix& x, double perplexity) {
    const std::size_t n = x.rows();
    const Matrix d = pairwise_squared_distances(x);
    Matrix cond(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const double sigma = sigma_search(d.row(i), i, perplexity);
        const auto p = conditional_probabilities(d.row(i), i, sigma);
        std::copy(p.begin(), p.end(), cond.row(i).begin());
    }
    Matrix joint(n, n);
    double total = 0.0;
    const double scale = 1.0 / (2.0 * static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double v = std::max((cond(i, j) + cond(j, i)) * scale, tsne_p_floor);
            joint(i, j) = v;
            total += v;
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) joint(i, j) /= total;
    return joint;
}

namespace {

// Student-t numerators 1 / (1 + |y_i - y_j|^2) and their off-diagonal sum.
double student_numerators(const Matrix& y, Matrix& num) {
    const std::size_t n = y.rows();
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        num(i, i) = 0.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = 1.0 / (1.0 + kernels::squared_distance(y.row(i), y.row(j)));
            num(i, j) = v;
            num(j, i) = v;
            z += 2.0 * v;
        }
    }
    return z;
}

}  // namespace

double kl_divergence(const Matrix& p, const Matrix& y) {
    const std::size_t n = y.rows();
    Matrix num(n, n);
    const double z = student_numerators(y, num);
    double kl = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j || p(i, j) <= 0.0) continue;
            const double q = std::max(num(i, j) / z, std::numeric_limits<double>::min());
            kl += p(i, j) * std::log(p(i, j) / q);
        }
    }
    return kl;
}

TsneResult tsne_run(const Matrix& x, const TsneOptions& opts) {
    const std::size_t n = x.rows();
    opts.validate(n);
    const Matrix p = joint_probabilities(jitter_duplicates(x, opts.seed), opts.perplexity);

    constexpr std::size_t dims = 2;
    TsneResult out;
    Matrix& y = out.embedding;
    y = Matrix(n, dims);
    Rng rng(derive_seed({opts.seed, 0x696e6974ULL}));
    for (std::size_t i = 0; i < n; ++i)
        for (double& v : y.row(i)) v = tsne_init_stdev * rng.normal();

    Matrix velocity(n, dims);
    Matrix gains(n, dims, 1.0);
    Matrix grad(n, dims);
    Matrix num(n, n);

    if (opts.exaggeration_iters == 0) out.kl_after_exaggeration = kl_divergence(p, y);
    for (int iter = 0; iter < opts.iterations; ++iter) {
        const double exaggeration = iter < opts.exaggeration_iters ? opts.early_exaggeration_factor : 1.0;
        const double momentum = iter < tsne_momentum_switch_iter ? tsne_initial_momentum : tsne_final_momentum;

        const double z = student_numerators(y, num);
        for (std::size_t i = 0; i < n; ++i) {
            double g0 = 0.0, g1 = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j) continue;
                const double w = (exaggeration * p(i, j) - num(i, j) / z) * num(i, j);
                g0 += w * (y(i, 0) - y(j, 0));
                g1 += w * (y(i, 1) - y(j, 1));
            }
            grad(i, 0) = 4.0 * g0;
            grad(i, 1) = 4.0 * g1;
        }

        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t c = 0; c < dims; ++c) {
                double& gain = gains(i, c);
                const bool same_sign = (grad(i, c) > 0.0) == (velocity(i, c) > 0.0);
                gain = same_sign ? gain * 0.8 : gain + 0.2;
                gain = std::max(gain, 0.01);
                velocity(i, c) = momentum * velocity(i, c) - opts.learning_rate * gain * grad(i, c);
                y(i, c) += velocity(i, c);
            }
        }

        double mean0 = 0.0, mean1 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            mean0 += y(i, 0);
            mean1 += y(i, 1);
        }
        mean0 /= static_cast<double>(n);
        mean1 /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            y(i, 0) -= mean0;
            y(i, 1) -= mean1;
        }

        if (iter + 1 == opts.exaggeration_iters) out.kl_after_exaggeration = kl_divergence(p, y);
    }
    out.kl_final = kl_divergence(p, y);
    return out;
}

Matrix tsne_embed(const Matrix& x, const TsneOptions& options) { return tsne_run(x, options).embedding; }

// ---------------------------------------------------------------------------
// Views over a run

Method parse_method(std::string_view name) {
    if (name == "identity") return Method::identity;
    if (name == "pca") return Method::pca;
    if (name == "tsne" || name == "t-sne") return Method::tsne;
    throw InvalidInput("unknown reduction method '" + std::string(name) + "' (expected identity, pca or tsne)");
}

std::string_view to_string(Method method) {
    switch (method) {
        case Method::identity: return "identity";
        case Method::pca: return "pca";
        case Method::tsne: return "tsne";
    }
    return "identity";
}

Matrix pooled_bcs(const std::vector<GenerationRecord>& records) {
    std::size_t rows = 0;
    for (const auto& r : records) rows += 1 + r.offspring.size();
    if (rows == 0) return {};
    const std::size_t d = records.front().parent_bc.size();
    Matrix m(rows, d);
    std::size_t at = 0;
    auto put = [&](const std::vector<double>& bc) {
        if (bc.size() != d) throw InvalidInput("BC dimensions differ across records");
        std::copy(bc.begin(), bc.end(), m.row(at++).begin());
    };
    for (const auto& r : records) {
        put(r.parent_bc);
        for (const auto& e : r.offspring) put(e.bc);
    }
    return m;
}

ReducedView reduce_records(const RunManifest& manifest, const std::vector<GenerationRecord>& records, Method method,
                           const TsneOptions& options) {
    ReducedView view;
    view.method = method;
    if (records.empty()) return view;
    if (method == Method::identity && manifest.bc_dimension != 2) {
        throw InvalidInput("identity view needs 2-dimensional BCs, run has bc_dimension " +
                           std::to_string(manifest.bc_dimension));
    }

    const Matrix pooled = pooled_bcs(records);
    Matrix coords;
    switch (method) {
        case Method::identity: coords = pooled; break;
        case Method::pca: coords = pca_project(pca_fit(pooled, 2), pooled); break;
        case Method::tsne: coords = tsne_embed(pooled, options); break;
    }

    std::size_t at = 0;
    for (const auto& r : records) {
        Matrix g(1 + r.offspring.size(), 2);
        for (std::size_t k = 0; k < g.rows(); ++k, ++at) {
            g(k, 0) = coords(at, 0);
            g(k, 1) = coords(at, 1);
        }
        view.generations.push_back(std::move(g));
    }
    return view;
}

ReducedView reduce_run(const archive::RunArchive& run, Method method, const TsneOptions& options) {
    std::vector<GenerationRecord> records;
    records.reserve(static_cast<std::size_t>(run.generation_count()));
    for (int g = 0; g < run.generation_count(); ++g) records.push_back(run.load_generation(g));
    return reduce_records(run.manifest(), records, method, options);
}

std::string view_file_name(Method method) { return "view_" + std::string(to_string(method)) + ".jsonl"; }

void write_view(const std::filesystem::path& run_dir, const ReducedView& view) {
    std::string out;
    for (std::size_t g = 0; g < view.generations.size(); ++g) {
        archive::json line;
        line["g"] = g;
        line["method"] = std::string(to_string(view.method));
        archive::json coords = archive::json::array();
        const Matrix& m = view.generations[g];
        for (std::size_t k = 0; k < m.rows(); ++k) coords.push_back({m(k, 0), m(k, 1)});
        line["coords"] = std::move(coords);
        out += archive::canonical_dump(line);
        out += '\n';
    }
    archive::write_file_atomic(run_dir / view_file_name(view.method), out);
}

ReducedView read_view(const std::filesystem::path& run_dir, Method method) {
    const auto path = run_dir / view_file_name(method);
    if (!std::filesystem::exists(path)) throw NotFound("view '" + std::string(to_string(method)) + "' not computed for " + run_dir.string());
    const std::string text = archive::read_file(path);
    ReducedView view;
    view.method = method;
    std::size_t pos = 0;
    int line_no = 0;
    while (pos < text.size()) {
        const std::size_t nl = text.find('\n', pos);
        ++line_no;
        const auto line = std::string_view(text).substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
        pos = nl == std::string::npos ? text.size() : nl + 1;
        try {
            const auto j = archive::json::parse(line);
            if (j.at("g").get<int>() != line_no - 1) throw ArchiveError("generation out of order");
            const auto& coords = j.at("coords");
            Matrix m(coords.size(), 2);
            for (std::size_t k = 0; k < coords.size(); ++k) {
                m(k, 0) = coords[k].at(0).get<double>();
                m(k, 1) = coords[k].at(1).get<double>();
            }
            view.generations.push_back(std::move(m));
        } catch (const std::exception& ex) {
            throw ArchiveError(path.filename().string() + " line " + std::to_string(line_no) + ": " + ex.what());
        }
    }
    return view;
}

std::vector<Method> available_views(const std::filesystem::path& run_dir) {
    std::vector<Method> out;
    for (Method m : {Method::identity, Method::pca, Method::tsne}) {
        if (std::filesystem::exists(run_dir / view_file_name(m))) out.push_back(m);
    }
    return out;
}

}  // namespace vine::reduce
