#include "vine/archive.hpp"

#include "vine/error.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace vine::archive {

namespace fs = std::filesystem;

std::string format_double(double v) {
    if (!std::isfinite(v)) throw InvalidInput("cannot encode non-finite number");
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    std::string s(buf, res.ptr);
    if (s.find_first_of(".e") == std::string::npos) s += ".0";
    return s;
}

namespace {

void dump_into(const json& j, std::string& out) {
    switch (j.type()) {
        case json::value_t::number_float:
            out += format_double(j.get<double>());
            break;
        case json::value_t::array: {
            out += '[';
            bool first = true;
            for (const auto& e : j) {
                if (!first) out += ',';
                first = false;
                dump_into(e, out);
            }
            out += ']';
            break;
        }
        case json::value_t::object: {
            out += '{';
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) out += ',';
                first = false;
                out += json(it.key()).dump();
                out += ':';
                dump_into(it.value(), out);
            }
            out += '}';
            break;
        }
        default:
            out += j.dump();
    }
}

json real_array(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(x);
    return a;
}

std::vector<double> read_reals(const json& j, const char* field) {
    if (!j.is_array()) throw InvalidInput(std::string("field '") + field + "' is not an array");
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto& e : j) {
        if (!e.is_number()) throw InvalidInput(std::string("field '") + field + "' holds a non-number");
        out.push_back(e.get<double>());
    }
    return out;
}

const json& field(const json& obj, const char* name) {
    auto it = obj.find(name);
    if (it == obj.end()) throw InvalidInput(std::string("missing field '") + name + "'");
    return *it;
}

}  // namespace

std::string canonical_dump(const json& j) {
    std::string out;
    dump_into(j, out);
    return out;
}

std::string generation_file_name(int g) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "gen_%05d.jsonl", g);
    return buf;
}

json to_json(const RunConfig& config) {
    json j;
    j["algo"] = std::string(evo::to_string(config.algo));
    j["env_id"] = std::string(env::to_string(config.env));
    j["bc_mode"] = std::string(env::to_string(config.bc_mode));
    if (config.algo == evo::Algo::es) {
        const auto& c = config.es;
        j["population_size"] = c.population_size;
        j["noise_stdev"] = c.noise_stdev;
        j["learning_rate"] = c.learning_rate;
        j["mirrored"] = c.mirrored;
        j["generations"] = c.generations;
        j["run_seed"] = c.run_seed;
    } else {
        const auto& c = config.ga;
        j["population_size"] = c.population_size;
        j["truncation_size"] = c.truncation_size;
        j["mutation_stdev"] = c.mutation_stdev;
        j["elite_count"] = c.elite_count;
        j["generations"] = c.generations;
        j["run_seed"] = c.run_seed;
    }
    return j;
}

RunConfig run_config_from_json(const json& j) {
    RunConfig c;
    c.algo = evo::parse_algo(field(j, "algo").get<std::string>());
    c.env = env::parse_env_id(field(j, "env_id").get<std::string>());
    c.bc_mode = env::parse_bc_mode(field(j, "bc_mode").get<std::string>());
    if (c.algo == evo::Algo::es) {
        c.es.population_size = field(j, "population_size").get<int>();
        c.es.noise_stdev = field(j, "noise_stdev").get<double>();
        c.es.learning_rate = field(j, "learning_rate").get<double>();
        c.es.mirrored = field(j, "mirrored").get<bool>();
        c.es.generations = field(j, "generations").get<int>();
        c.es.run_seed = field(j, "run_seed").get<std::uint64_t>();
    } else {
        c.ga.population_size = field(j, "population_size").get<int>();
        c.ga.truncation_size = field(j, "truncation_size").get<int>();
        c.ga.mutation_stdev = field(j, "mutation_stdev").get<double>();
        c.ga.elite_count = field(j, "elite_count").get<int>();
        c.ga.generations = field(j, "generations").get<int>();
        c.ga.run_seed = field(j, "run_seed").get<std::uint64_t>();
    }
    return c;
}

json to_json(const RunManifest& m) {
    json j;
    j["run_id"] = m.run_id;
    j["algo"] = std::string(evo::to_string(m.config.algo));
    j["env_id"] = std::string(env::to_string(m.config.env));
    j["config"] = to_json(m.config);
    j["bc_dimension"] = m.bc_dimension;
    j["layer_sizes"] = m.layer_sizes;
    j["generations_completed"] = m.generations_completed;
    j["complete"] = m.complete;
    return j;
}

RunManifest manifest_from_json(const json& j) {
    RunManifest m;
    m.run_id = field(j, "run_id").get<std::string>();
    m.config = run_config_from_json(field(j, "config"));
    m.bc_dimension = field(j, "bc_dimension").get<int>();
    m.layer_sizes = field(j, "layer_sizes").get<std::vector<int>>();
    m.generations_completed = field(j, "generations_completed").get<int>();
    m.complete = field(j, "complete").get<bool>();
    return m;
}

std::string encode_generation(const GenerationRecord& rec) {
    std::string out;
    json parent;
    parent["g"] = rec.g;
    parent["parent_params"] = real_array(rec.parent_params);
    parent["parent_fitness"] = rec.parent_fitness;
    parent["parent_bc"] = real_array(rec.parent_bc);
    parent["rollout_seed"] = rec.parent_rollout_seed;
    out += canonical_dump(parent);
    out += '\n';
    for (const auto& e : rec.offspring) {
        json o;
        o["noise_seed"] = e.spec.noise_seed;
        o["sign"] = e.spec.sign;
        o["fitness"] = e.fitness;
        o["bc"] = real_array(e.bc);
        o["rollout_seed"] = e.rollout_seed;
        if (e.parent_index >= 0 || e.elite) {
            o["parent_index"] = e.parent_index;
            o["elite"] = e.elite;
        }
        if (e.params) o["params"] = real_array(*e.params);
        out += canonical_dump(o);
        out += '\n';
    }
    return out;
}

GenerationRecord decode_generation(std::string_view text, int g, const RunManifest& manifest) {
    const std::string file = generation_file_name(g);
    const auto expected_lines = static_cast<std::size_t>(manifest.config.population_size()) + 1;
    const auto bc_dim = static_cast<std::size_t>(manifest.bc_dimension);
    const std::size_t d = env::PolicySpec{manifest.layer_sizes}.parameter_count();

    GenerationRecord rec;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    auto fail = [&](const std::string& what) -> ArchiveError {
        return ArchiveError(file + " line " + std::to_string(line_no) + ": " + what);
    };

    while (pos < text.size()) {
        const std::size_t nl = text.find('\n', pos);
        ++line_no;
        if (nl == std::string_view::npos) throw fail("truncated line (no terminating newline)");
        const std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        if (line_no > expected_lines) throw fail("more records than population_size + 1");

        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& ex) {
            throw fail(std::string("malformed record: ") + ex.what());
        }
        try {
            if (!j.is_object()) throw InvalidInput("record is not an object");
            if (line_no == 1) {
                rec.g = field(j, "g").get<int>();
                if (rec.g != g) throw InvalidInput("record generation " + std::to_string(rec.g) + " in file for " + std::to_string(g));
                rec.parent_params = read_reals(field(j, "parent_params"), "parent_params");
                rec.parent_fitness = field(j, "parent_fitness").get<double>();
                rec.parent_bc = read_reals(field(j, "parent_bc"), "parent_bc");
                rec.parent_rollout_seed = field(j, "rollout_seed").get<std::uint64_t>();
                if (rec.parent_params.size() != d) throw InvalidInput("parent_params length differs from policy size");
                if (rec.parent_bc.size() != bc_dim) throw InvalidInput("parent_bc length differs from bc_dimension");
            } else {
                OffspringEntry e;
                e.spec.noise_seed = field(j, "noise_seed").get<std::uint64_t>();
                e.spec.sign = field(j, "sign").get<int>();
                if (e.spec.sign != 1 && e.spec.sign != -1) throw InvalidInput("sign must be +1 or -1");
                e.fitness = field(j, "fitness").get<double>();
                e.bc = read_reals(field(j, "bc"), "bc");
                e.rollout_seed = field(j, "rollout_seed").get<std::uint64_t>();
                if (auto it = j.find("parent_index"); it != j.end()) e.parent_index = it->get<int>();
                if (auto it = j.find("elite"); it != j.end()) e.elite = it->get<bool>();
                if (auto it = j.find("params"); it != j.end()) {
                    e.params = read_reals(*it, "params");
                    if (e.params->size() != d) throw InvalidInput("params length differs from policy size");
                }
                if (e.bc.size() != bc_dim) throw InvalidInput("bc length differs from bc_dimension");
                rec.offspring.push_back(std::move(e));
            }
        } catch (const InvalidInput& ex) {
            throw fail(ex.what());
        } catch (const json::exception& ex) {
            throw fail(std::string("bad field: ") + ex.what());
        }
    }
    if (line_no != expected_lines) {
        throw ArchiveError(file + ": expected " + std::to_string(expected_lines) + " records, found " +
                           std::to_string(line_no));
    }
    return rec;
}

void write_file_atomic(const fs::path& path, std::string_view contents) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ArchiveError("cannot open " + tmp.string() + " for writing");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (!out) throw ArchiveError("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw ArchiveError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArchiveError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunWriter::RunWriter(fs::path dir, std::string run_id) : dir_(std::move(dir)) {
    manifest_.run_id = run_id.empty() ? dir_.filename().string() : std::move(run_id);
    if (manifest_.run_id.empty()) manifest_.run_id = fs::absolute(dir_).parent_path().filename().string();
}

RunWriter RunWriter::open_existing(const fs::path& dir) {
    const fs::path mpath = dir / "manifest.json";
    if (!fs::exists(mpath)) throw ArchiveError("missing manifest: " + mpath.string());
    RunWriter w(dir);
    try {
        w.manifest_ = manifest_from_json(json::parse(read_file(mpath)));
    } catch (const std::exception& ex) {
        throw ArchiveError("corrupt manifest " + mpath.string() + ": " + ex.what());
    }
    w.started_ = true;
    return w;
}

void RunWriter::begin(const RunConfig& config, const std::vector<int>& layer_sizes, int bc_dimension) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw ArchiveError("cannot create run directory " + dir_.string() + ": " + ec.message());
    // A fresh run replaces everything this writer owns in the directory.
    for (const auto& entry : fs::directory_iterator(dir_)) {
        const std::string name = entry.path().filename().string();
        const bool owned = name == "manifest.json" || (name.starts_with("gen_") && name.find(".jsonl") != std::string::npos) ||
                           (name.starts_with("view_") && name.find(".jsonl") != std::string::npos);
        if (owned && entry.is_regular_file()) fs::remove(entry.path());
    }
    manifest_.config = config;
    manifest_.layer_sizes = layer_sizes;
    manifest_.bc_dimension = bc_dimension;
    manifest_.generations_completed = 0;
    manifest_.complete = false;
    write_file_atomic(dir_ / "manifest.json", canonical_dump(to_json(manifest_)) + "\n");
    started_ = true;
}

void RunWriter::write(const GenerationRecord& record) {
    if (!started_) throw ArchiveError("run writer used before begin()");
    if (record.g != manifest_.generations_completed) {
        throw ArchiveError("out-of-order generation: expected g=" + std::to_string(manifest_.generations_completed) +
                           ", got g=" + std::to_string(record.g));
    }
    if (record.offspring.size() != static_cast<std::size_t>(manifest_.config.population_size())) {
        throw ArchiveError("generation " + std::to_string(record.g) + " has " + std::to_string(record.offspring.size()) +
                           " offspring, population_size is " + std::to_string(manifest_.config.population_size()));
    }
    const auto bc_dim = static_cast<std::size_t>(manifest_.bc_dimension);
    if (record.parent_bc.size() != bc_dim) throw ArchiveError("parent_bc length differs from bc_dimension");
    for (const auto& e : record.offspring) {
        if (e.bc.size() != bc_dim) throw ArchiveError("offspring bc length differs from bc_dimension");
    }
    write_file_atomic(dir_ / generation_file_name(record.g), encode_generation(record));
    manifest_.generations_completed = record.g + 1;
    write_file_atomic(dir_ / "manifest.json", canonical_dump(to_json(manifest_)) + "\n");
}

void RunWriter::finish() {
    manifest_.complete = true;
    write_file_atomic(dir_ / "manifest.json", canonical_dump(to_json(manifest_)) + "\n");
}

void write_generation(const fs::path& dir, const GenerationRecord& record) {
    RunWriter w = RunWriter::open_existing(dir);
    w.write(record);
}

RunArchive read_run(const fs::path& dir) {
    const fs::path mpath = dir / "manifest.json";
    if (!fs::exists(mpath)) throw ArchiveError("missing manifest: " + mpath.string());
    RunArchive run;
    run.dir_ = dir;
    try {
        run.manifest_ = manifest_from_json(json::parse(read_file(mpath)));
    } catch (const std::exception& ex) {
        throw ArchiveError("corrupt manifest " + mpath.string() + ": " + ex.what());
    }
    run.incomplete_ = !run.manifest_.complete;

    const int listed = run.manifest_.generations_completed;
    int present = 0;
    while (present < listed && fs::exists(dir / generation_file_name(present))) ++present;
    if (present < listed) run.incomplete_ = true;
    run.readable_ = present;

    // A damaged final file marks the run incomplete instead of failing the load.
    if (run.readable_ > 0) {
        const int last = run.readable_ - 1;
        try {
            (void)decode_generation(read_file(dir / generation_file_name(last)), last, run.manifest_);
        } catch (const ArchiveError&) {
            run.readable_ = last;
            run.incomplete_ = true;
        }
    }
    return run;
}

GenerationRecord RunArchive::load_generation(int g) const {
    if (g < 0 || g >= readable_) {
        throw NotFound("generation " + std::to_string(g) + " out of range (run has " + std::to_string(readable_) + ")");
    }
    return decode_generation(read_file(dir_ / generation_file_name(g)), g, manifest_);
}

ParameterVector reconstruct_params(const RunManifest& manifest, const GenerationLookup& lookup, int g, int i) {
    if (g < 0 || g >= manifest.generations_completed) {
        throw NotFound("generation " + std::to_string(g) + " out of range");
    }
    const GenerationRecord& rec = lookup(g);
    if (i < -1 || i >= static_cast<int>(rec.offspring.size())) {
        throw NotFound("point index " + std::to_string(i) + " out of range for generation " + std::to_string(g));
    }
    if (i == -1) return rec.parent_params;

    const OffspringEntry& e = rec.offspring[static_cast<std::size_t>(i)];
    if (manifest.config.algo == evo::Algo::es) {
        return evo::offspring_params(rec.parent_params, manifest.config.es.noise_stdev, e.spec);
    }
    if (e.params) return *e.params;
    if (g == 0 || e.parent_index < 0) {
        if (g != 0 || e.elite) throw ArchiveError("GA member lacks provenance at generation " + std::to_string(g));
        return evo::offspring_params(rec.parent_params, manifest.config.ga.mutation_stdev, e.spec);
    }
    ParameterVector base = reconstruct_params(manifest, lookup, g - 1, e.parent_index);
    if (e.elite) return base;
    return evo::offspring_params(base, manifest.config.ga.mutation_stdev, e.spec);
}

ParameterVector reconstruct_params(const RunArchive& run, int g, int i) {
    std::map<int, GenerationRecord> cache;
    GenerationLookup lookup = [&](int k) -> const GenerationRecord& {
        auto it = cache.find(k);
        if (it == cache.end()) it = cache.emplace(k, run.load_generation(k)).first;
        return it->second;
    };
    RunManifest m = run.manifest();
    m.generations_completed = run.generation_count();
    return reconstruct_params(m, lookup, g, i);
}

}  // namespace vine::archive
