#include "vine/session.hpp"

#include "vine/error.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace vine::session {

std::vector<int> percentile_bins(std::span<const double> fitnesses, int bins) {
    const std::size_t n = fitnesses.size();
    std::vector<int> out(n, 0);
    if (n <= 1 || bins <= 1) return out;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fitnesses[a] < fitnesses[b]; });

    // Twice the average rank is the integer lo + hi, so the bin is exact integer math:
    // floor(bins * (lo + hi) / (2 (n - 1))).
    const auto denom = static_cast<long long>(2 * (n - 1));
    for (std::size_t lo = 0; lo < n;) {
        std::size_t hi = lo;
        while (hi + 1 < n && fitnesses[order[hi + 1]] == fitnesses[order[lo]]) ++hi;
        const long long bin = std::min<long long>(bins * static_cast<long long>(lo + hi) / denom, bins - 1);
        for (std::size_t k = lo; k <= hi; ++k) out[order[k]] = static_cast<int>(bin);
        lo = hi + 1;
    }
    return out;
}

Session::Session(std::filesystem::path dir, RunManifest manifest, std::vector<GenerationRecord> records,
                 std::map<reduce::Method, reduce::ReducedView> views, bool incomplete)
    : dir_(std::move(dir)), manifest_(std::move(manifest)), records_(std::move(records)), views_(std::move(views)),
      incomplete_(incomplete) {
    for (const auto& [method, view] : views_) {
        if (view.generations.size() < records_.size()) {
            throw ArchiveError("view '" + std::string(reduce::to_string(method)) + "' covers " +
                               std::to_string(view.generations.size()) + " generations, run has " +
                               std::to_string(records_.size()));
        }
        for (std::size_t g = 0; g < records_.size(); ++g) {
            if (view.generations[g].rows() != records_[g].offspring.size() + 1) {
                throw ArchiveError("view '" + std::string(reduce::to_string(method)) + "' generation " + std::to_string(g) +
                                   " is not aligned with the archive");
            }
        }
    }
}

std::shared_ptr<const Session> Session::load(const std::filesystem::path& run_dir) {
    const auto run = archive::read_run(run_dir);
    std::vector<GenerationRecord> records;
    records.reserve(static_cast<std::size_t>(run.generation_count()));
    for (int g = 0; g < run.generation_count(); ++g) records.push_back(run.load_generation(g));

    std::map<reduce::Method, reduce::ReducedView> views;
    for (auto method : reduce::available_views(run_dir)) views.emplace(method, reduce::read_view(run_dir, method));
    if (!views.contains(reduce::Method::identity) && run.manifest().bc_dimension == 2) {
        views.emplace(reduce::Method::identity, reduce::reduce_records(run.manifest(), records, reduce::Method::identity));
    }
    return std::make_shared<const Session>(run_dir, run.manifest(), std::move(records), std::move(views), run.incomplete());
}

const GenerationRecord& Session::generation(int g) const {
    if (g < 0 || g >= generation_count()) {
        throw NotFound("generation " + std::to_string(g) + " out of range (run has " + std::to_string(generation_count()) + ")");
    }
    return records_[static_cast<std::size_t>(g)];
}

std::vector<reduce::Method> Session::views() const {
    std::vector<reduce::Method> out;
    for (const auto& [m, v] : views_) out.push_back(m);
    return out;
}

const reduce::ReducedView& Session::view(reduce::Method method) const {
    auto it = views_.find(method);
    if (it == views_.end()) throw NotFound("view '" + std::string(reduce::to_string(method)) + "' is not loaded");
    return it->second;
}

PointSlice Session::generation_points(int g, reduce::Method method) const {
    const auto& v = view(method);
    const auto& rec = generation(g);
    const auto& coords = v.generations[static_cast<std::size_t>(g)];

    std::vector<double> fit;
    fit.reserve(rec.offspring.size());
    for (const auto& e : rec.offspring) fit.push_back(e.fitness);
    const auto bins = percentile_bins(fit);

    // The parent is placed by its mid-rank among the offspring but never joins the pool.
    std::size_t below = 0, tied = 0;
    for (double f : fit) {
        if (f < rec.parent_fitness) ++below;
        else if (f == rec.parent_fitness) ++tied;
    }
    const auto n = static_cast<long long>(fit.size());
    const long long parent_bin =
        n == 0 ? 0 : std::min<long long>(default_bins * static_cast<long long>(2 * below + tied) / (2 * n), default_bins - 1);

    PointSlice slice;
    slice.g = g;
    slice.points.reserve(rec.offspring.size() + 1);
    slice.points.push_back({-1, coords(0, 0), coords(0, 1), rec.parent_fitness, static_cast<int>(parent_bin), true});
    for (std::size_t i = 0; i < rec.offspring.size(); ++i) {
        slice.points.push_back({static_cast<int>(i), coords(i + 1, 0), coords(i + 1, 1), fit[i], bins[i], false});
    }
    return slice;
}

FitnessCurve Session::fitness_curve() const {
    FitnessCurve curve;
    curve.reserve(records_.size());
    for (const auto& r : records_) curve.push_back(r.parent_fitness);
    return curve;
}

int Session::nearest_point(reduce::Method method, int g, double x, double y) const {
    const auto& coords = view(method).generations.at(static_cast<std::size_t>(generation(g).g));
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < coords.rows(); ++k) {
        const double dx = coords(k, 0) - x;
        const double dy = coords(k, 1) - y;
        const double dist = dx * dx + dy * dy;
        if (dist < best_d) {
            best_d = dist;
            best = static_cast<int>(k) - 1;
        }
    }
    return best;
}

ParameterVector Session::params(int g, int i) const {
    RunManifest m = manifest_;
    m.generations_completed = generation_count();
    return archive::reconstruct_params(m, [this](int k) -> const GenerationRecord& { return generation(k); }, g, i);
}

}  // namespace vine::session
