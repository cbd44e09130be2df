#include "vine/error.hpp"
#include "vine/evo.hpp"
#include "vine/trainer.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

using namespace vine;
using namespace vine::evo;

namespace {

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
    return true;
}

// Independent oracle: rank by counting, ties averaged, mapped to r/(n-1) - 0.5.
std::vector<double> ranks_by_counting(const std::vector<double>& f) {
    const std::size_t n = f.size();
    std::vector<double> w(n, 0.0);
    if (n == 1) return w;
    for (std::size_t i = 0; i < n; ++i) {
        double less = 0, equal = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (f[j] < f[i]) ++less;
            if (f[j] == f[i]) ++equal;
        }
        const double avg_rank = less + (equal - 1) / 2.0;
        w[i] = avg_rank / static_cast<double>(n - 1) - 0.5;
    }
    return w;
}

std::vector<double> random_fitnesses(std::mt19937_64& rng, std::size_t n) {
    // Small integer support forces ties.
    std::uniform_int_distribution<int> u(-20, 20);
    std::vector<double> f(n);
    for (double& v : f) v = u(rng);
    return f;
}

class MemorySink : public GenerationSink {
public:
    void begin(const RunConfig&, const std::vector<int>&, int) override {}
    void write(const GenerationRecord& r) override { records.push_back(r); }
    void finish() override { finished = true; }
    std::vector<GenerationRecord> records;
    bool finished = false;
};

}  // namespace

TEST_CASE("centered_ranks examples") {
    CHECK(centered_ranks(std::vector<double>{3.0, 1.0, 2.0}) == std::vector<double>{0.5, -0.5, 0.0});
    CHECK(centered_ranks(std::vector<double>{7.0, 7.0}) == std::vector<double>{0.0, 0.0});
    const auto w = centered_ranks(std::vector<double>{1.0, 2.0, 3.0, 4.0});
    CHECK(w[0] == doctest::Approx(-0.5));
    CHECK(w[1] == doctest::Approx(-1.0 / 6.0));
    CHECK(w[2] == doctest::Approx(1.0 / 6.0));
    CHECK(w[3] == doctest::Approx(0.5));
    CHECK(centered_ranks(std::vector<double>{5.0}) == std::vector<double>{0.0});
}

TEST_CASE("centered_ranks rejects bad input") {
    CHECK_THROWS_AS(centered_ranks(std::vector<double>{}), InvalidInput);
    CHECK_THROWS_AS(centered_ranks(std::vector<double>{1.0, NAN}), InvalidInput);
    CHECK_THROWS_AS(centered_ranks(std::vector<double>{INFINITY, 1.0}), InvalidInput);
}

TEST_CASE("centered_ranks properties on random vectors") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 1 + rng() % 60;
        const auto f = random_fitnesses(rng, n);
        const auto w = centered_ranks(f);
        const auto oracle = ranks_by_counting(f);
        for (std::size_t i = 0; i < n; ++i) CHECK(w[i] == doctest::Approx(oracle[i]).epsilon(1e-14));
        CHECK(std::abs(std::accumulate(w.begin(), w.end(), 0.0)) <= 1e-12);

        std::vector<double> g(n);
        std::transform(f.begin(), f.end(), g.begin(), [](double x) { return std::exp(x / 7.0) * 3.0 - 11.0; });
        CHECK(centered_ranks(g) == w);
    }
}

TEST_CASE("perturbation") {
    const auto a = perturbation(42, 8, 1);
    CHECK(a == perturbation(42, 8, 1));
    const auto neg = perturbation(42, 8, -1);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(neg[i] == -a[i]);
    CHECK(a != perturbation(43, 8, 1));

    const auto big = perturbation(1, 100000, 1);
    const double mean = std::accumulate(big.begin(), big.end(), 0.0) / big.size();
    double var = 0.0;
    for (double x : big) var += (x - mean) * (x - mean);
    const double stdev = std::sqrt(var / (big.size() - 1));
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(stdev - 1.0) < 0.02);
}

TEST_CASE("es_update examples") {
    SUBCASE("d=1 mirrored pair") {
        EsConfig c;
        c.population_size = 2;
        c.noise_stdev = 1.0;
        c.learning_rate = 1.0;
        const std::vector<std::vector<double>> noise{{1.0}, {-1.0}};
        const auto next = es_update(std::vector<double>{0.0}, noise, std::vector<double>{2.0, 1.0}, c);
        CHECK(next[0] == doctest::Approx(0.5).epsilon(1e-15));
    }
    SUBCASE("d=1 three offspring") {
        EsConfig c;
        c.population_size = 3;
        c.mirrored = false;
        c.noise_stdev = 0.5;
        c.learning_rate = 0.1;
        const std::vector<std::vector<double>> noise{{1.0}, {2.0}, {3.0}};
        const auto next = es_update(std::vector<double>{0.0}, noise, std::vector<double>{3.0, 1.0, 2.0}, c);
        CHECK(next[0] == doctest::Approx(-1.0 / 30.0).epsilon(1e-14));
    }
    SUBCASE("length mismatch") {
        EsConfig c;
        c.population_size = 4;
        const auto specs = es_offspring_specs(c, 0);
        CHECK_THROWS_AS(es_update(std::vector<double>{0.0}, specs, std::vector<double>{1.0, 2.0}, c), InvalidInput);
    }
}

TEST_CASE("es_update invariants") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> nd;
    EsConfig c;
    c.population_size = 20;
    c.run_seed = 4;
    std::vector<double> parent(37);
    for (double& p : parent) p = nd(rng);
    parent[3] = -0.0;
    const auto specs = es_offspring_specs(c, 3);

    SUBCASE("all ties return the parent bit-exactly") {
        const std::vector<double> ties(20, 1.25);
        CHECK(bit_equal(es_update(parent, specs, ties, c), parent));
    }
    SUBCASE("monotone fitness transforms give identical updates") {
        for (int trial = 0; trial < 20; ++trial) {
            const auto f = random_fitnesses(rng, 20);
            std::vector<double> g(20);
            std::transform(f.begin(), f.end(), g.begin(), [](double x) { return std::atan(x) * 100.0 + 5.0; });
            CHECK(bit_equal(es_update(parent, specs, f, c), es_update(parent, specs, g, c)));
        }
    }
    SUBCASE("jointly permuting (spec, fitness) pairs leaves the update unchanged") {
        std::vector<double> f(20);
        for (double& v : f) v = nd(rng);
        const auto base = es_update(parent, specs, f, c);
        for (int trial = 0; trial < 10; ++trial) {
            std::vector<std::size_t> perm(20);
            std::iota(perm.begin(), perm.end(), std::size_t{0});
            std::shuffle(perm.begin(), perm.end(), rng);
            std::vector<OffspringSpec> ps;
            std::vector<double> pf;
            for (auto k : perm) {
                ps.push_back(specs[k]);
                pf.push_back(f[k]);
            }
            const auto permuted = es_update(parent, ps, pf, c);
            for (std::size_t j = 0; j < parent.size(); ++j) CHECK(std::abs(permuted[j] - base[j]) <= 1e-12);
        }
    }
    SUBCASE("update equals the formula evaluated directly") {
        std::vector<double> f(20);
        for (double& v : f) v = nd(rng);
        const auto next = es_update(parent, specs, f, c);
        const auto w = ranks_by_counting(f);
        for (std::size_t j = 0; j < parent.size(); ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < 20; ++i) s += w[i] * perturbation(specs[i].noise_seed, parent.size(), specs[i].sign)[j];
            CHECK(next[j] == doctest::Approx(parent[j] + c.learning_rate / (20 * c.noise_stdev) * s).epsilon(1e-12));
        }
    }
}

TEST_CASE("offspring specs") {
    EsConfig c;
    c.population_size = 6;
    c.run_seed = 77;
    const auto specs = es_offspring_specs(c, 2);
    REQUIRE(specs.size() == 6);
    for (int k = 0; k < 3; ++k) {
        CHECK(specs[2 * k].noise_seed == specs[2 * k + 1].noise_seed);
        CHECK(specs[2 * k].sign == 1);
        CHECK(specs[2 * k + 1].sign == -1);
    }
    CHECK(specs[0].noise_seed != specs[2].noise_seed);
    CHECK(es_offspring_specs(c, 3)[0].noise_seed != specs[0].noise_seed);
    c.mirrored = false;
    for (const auto& s : es_offspring_specs(c, 2)) CHECK(s.sign == 1);
}

TEST_CASE("config validation") {
    EsConfig es;
    es.population_size = 3;
    CHECK_THROWS_AS(es.validate(), InvalidInput);
    es.population_size = 1;
    es.mirrored = false;
    CHECK_THROWS_AS(es.validate(), InvalidInput);
    es.population_size = 4;
    es.noise_stdev = 0.0;
    CHECK_THROWS_AS(es.validate(), InvalidInput);

    GaConfig ga;
    ga.truncation_size = 0;
    CHECK_THROWS_AS(ga.validate(), InvalidInput);
    ga.truncation_size = 5;
    ga.elite_count = 6;
    CHECK_THROWS_AS(ga.validate(), InvalidInput);
}

TEST_CASE("ga_step") {
    GaConfig c;
    c.population_size = 4;
    c.truncation_size = 2;
    c.elite_count = 1;
    std::vector<ParameterVector> pop{{0.0, 0.0}, {1.0, 1.0}, {2.0, 2.0}, {3.0, 3.0}};
    const std::vector<double> fit{0.5, 3.0, 1.0, 2.0};

    const auto kids = ga_step(pop, fit, c, 1234);
    REQUIRE(kids.size() == 4);
    CHECK(kids[0].elite);
    CHECK(kids[0].params == pop[1]);
    CHECK(kids[0].parent_index == 1);
    for (std::size_t k = 1; k < kids.size(); ++k) {
        CHECK_FALSE(kids[k].elite);
        CHECK((kids[k].parent_index == 1 || kids[k].parent_index == 3));
        const auto expect = offspring_params(pop[static_cast<std::size_t>(kids[k].parent_index)], c.mutation_stdev,
                                             {kids[k].noise_seed, 1});
        CHECK(kids[k].params == expect);
    }
    CHECK(ga_step(pop, fit, c, 1234) == kids);
    CHECK(ga_step(pop, fit, c, 1235) != kids);

    SUBCASE("parent choice covers the whole top-T over many children") {
        GaConfig big = c;
        big.population_size = 200;
        big.truncation_size = 3;
        std::vector<ParameterVector> p;
        std::vector<double> f;
        for (int i = 0; i < 200; ++i) {
            p.push_back({double(i)});
            f.push_back(double((i * 37) % 200));
        }
        const auto out = ga_step(p, f, big, 5);
        std::vector<int> top;
        std::vector<std::size_t> order(200);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](auto a, auto b) { return f[a] > f[b]; });
        std::set<int> seen;
        for (std::size_t k = 1; k < out.size(); ++k) {
            const auto pi = static_cast<std::size_t>(out[k].parent_index);
            CHECK((pi == order[0] || pi == order[1] || pi == order[2]));
            seen.insert(out[k].parent_index);
        }
        CHECK(seen.size() == 3);
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(ga_step(std::vector<ParameterVector>{}, std::vector<double>{}, c, 0), InvalidInput);
        CHECK_THROWS_AS(ga_step(std::span(pop).first(3), std::span(fit).first(3), c, 0), InvalidInput);
    }
}

TEST_CASE("run_evolution ES records every evaluation") {
    MemorySink sink;
    const auto cfg = testing::small_es(env::EnvId::point_walker, 1, 4, 3);
    const auto summary = run_evolution(cfg, sink, {1, {}});
    CHECK(summary.generations_completed == 1);
    CHECK(sink.finished);
    REQUIRE(sink.records.size() == 1);
    CHECK(sink.records[0].offspring.size() == 4);
    CHECK(sink.records[0].parent_bc.size() == 2);
    CHECK(summary.final_parent_fitness == sink.records[0].parent_fitness);
    CHECK(sink.records[0].parent_params == initial_params(env::default_policy(env::EnvId::point_walker), 3));
}

TEST_CASE("run_evolution is deterministic and thread-count independent") {
    const auto cfg = testing::small_es(env::EnvId::point_walker, 3, 6, 11);
    MemorySink a, b;
    run_evolution(cfg, a, {1, {}});
    run_evolution(cfg, b, {3, {}});
    CHECK(a.records == b.records);

    SUBCASE("consecutive parents follow es_update") {
        for (int g = 0; g + 1 < 3; ++g) {
            const auto& r = a.records[static_cast<std::size_t>(g)];
            std::vector<OffspringSpec> specs;
            std::vector<double> f;
            for (const auto& e : r.offspring) {
                specs.push_back(e.spec);
                f.push_back(e.fitness);
            }
            CHECK(es_update(r.parent_params, specs, f, cfg.es) == a.records[static_cast<std::size_t>(g) + 1].parent_params);
        }
    }
}

TEST_CASE("run_evolution GA") {
    const auto cfg = testing::small_ga(env::EnvId::grid_quest, 4, 8, 5);
    MemorySink sink;
    run_evolution(cfg, sink, {2, {}});
    REQUIRE(sink.records.size() == 4);
    for (const auto& r : sink.records) {
        CHECK(r.offspring.size() == 8);
        CHECK(r.parent_bc.size() == 128);
    }
    for (const auto& e : sink.records[0].offspring) {
        CHECK(e.parent_index == -1);
        CHECK(e.params.has_value());
    }
    for (std::size_t g = 1; g < 4; ++g) {
        const auto& prev = sink.records[g - 1];
        const auto& cur = sink.records[g];
        CHECK(cur.offspring[0].elite);
        // The elite is the previous best and is also this generation's parent entry.
        const auto best = std::max_element(prev.offspring.begin(), prev.offspring.end(),
                                           [](const auto& x, const auto& y) { return x.fitness < y.fitness; });
        CHECK(cur.offspring[0].parent_index == best - prev.offspring.begin());
        CHECK(cur.parent_fitness == best->fitness);
        CHECK(cur.offspring[0].fitness == best->fitness);
        CHECK_FALSE(cur.offspring[1].params.has_value());
    }
}

TEST_CASE("parallel_for covers every index once and propagates errors") {
    std::vector<int> hits(100, 0);
    parallel_for(100, 4, [&](std::size_t i) { hits[i] += 1; });
    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
    CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) { if (i == 7) throw InvalidInput("boom"); }), InvalidInput);
}
