#pragma once

// Immutable in-memory index over one loaded run and its reduced views.

#include "vine/archive.hpp"
#include "vine/reduce.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <vector>

namespace vine::session {

inline constexpr int default_bins = 5;

/// Percentile p = average rank / (n - 1) (p = 0 for n = 1); bin = min(floor(p * bins), bins - 1).
std::vector<int> percentile_bins(std::span<const double> fitnesses, int bins = default_bins);

struct Point {
    int index = -1;  // -1 is the parent
    double x = 0.0;
    double y = 0.0;
    double fitness = 0.0;
    int bin = 0;
    bool is_parent = false;

    bool operator==(const Point&) const = default;
};

struct PointSlice {
    int g = 0;
    std::vector<Point> points;  // parent first, then offspring in index order

    bool operator==(const PointSlice&) const = default;
};

using FitnessCurve = std::vector<double>;

class Session {
public:
    Session(std::filesystem::path dir, RunManifest manifest, std::vector<GenerationRecord> records,
            std::map<reduce::Method, reduce::ReducedView> views, bool incomplete);

    /// Loads every readable generation and every view file beside the run. An identity
    /// view is synthesized for 2-dimensional BCs when no file exists.
    static std::shared_ptr<const Session> load(const std::filesystem::path& run_dir);

    const std::filesystem::path& dir() const { return dir_; }
    const RunManifest& manifest() const { return manifest_; }
    int generation_count() const { return static_cast<int>(records_.size()); }
    bool incomplete() const { return incomplete_; }

    const GenerationRecord& generation(int g) const;
    std::vector<reduce::Method> views() const;
    bool has_view(reduce::Method method) const { return views_.contains(method); }
    const reduce::ReducedView& view(reduce::Method method) const;

    PointSlice generation_points(int g, reduce::Method method) const;
    FitnessCurve fitness_curve() const;
    /// Ties go to the lowest index; the parent (-1) takes part.
    int nearest_point(reduce::Method method, int g, double x, double y) const;

    ParameterVector params(int g, int i) const;

private:
    std::filesystem::path dir_;
    RunManifest manifest_;
    std::vector<GenerationRecord> records_;
    std::map<reduce::Method, reduce::ReducedView> views_;
    bool incomplete_ = false;
};

}  // namespace vine::session
