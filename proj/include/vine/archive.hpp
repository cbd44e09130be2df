#pragma once

// On-disk run storage.
//
//   <run>/manifest.json        RunManifest
//   <run>/gen_00000.jsonl      line 1: parent record, lines 2..n+1: offspring records
//   <run>/gen_00001.jsonl      ...
//
// Every file is written to a temporary name and renamed into place, so readers only
// ever see whole files. Numbers are encoded as shortest round-trip decimals and object
// keys are sorted, which makes identical records produce identical bytes.

#include "vine/records.hpp"
#include "vine/trainer.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

namespace vine::archive {

using nlohmann::json;

/// Shortest decimal that parses back to the same double; always carries a '.' or an
/// exponent so that the value reads back as a floating-point number (keeps -0.0).
std::string format_double(double v);

/// Compact JSON with sorted keys and shortest round-trip floats.
std::string canonical_dump(const json& j);

std::string generation_file_name(int g);

json to_json(const RunConfig& config);
RunConfig run_config_from_json(const json& j);
json to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const json& j);

/// Full generation file contents, one record per line.
std::string encode_generation(const GenerationRecord& record);
/// Throws ArchiveError naming the file and 1-based line on any malformed line.
GenerationRecord decode_generation(std::string_view text, int g, const RunManifest& manifest);

/// Writes atomically: temp file then rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

class RunWriter : public evo::GenerationSink {
public:
    /// run_id defaults to the directory's final path component.
    explicit RunWriter(std::filesystem::path dir, std::string run_id = {});

    void begin(const RunConfig& config, const std::vector<int>& layer_sizes, int bc_dimension) override;
    void write(const GenerationRecord& record) override;
    void finish() override;

    const RunManifest& manifest() const { return manifest_; }
    const std::filesystem::path& dir() const { return dir_; }

    /// Resumes appending to an existing run directory.
    static RunWriter open_existing(const std::filesystem::path& dir);

private:
    std::filesystem::path dir_;
    RunManifest manifest_;
    bool started_ = false;
};

/// Appends one generation to the run in `dir`; record.g must equal generations_completed.
void write_generation(const std::filesystem::path& dir, const GenerationRecord& record);

class RunArchive {
public:
    const std::filesystem::path& dir() const { return dir_; }
    const RunManifest& manifest() const { return manifest_; }

    /// Number of generation records that can be read.
    int generation_count() const { return readable_; }
    /// True when the writer never finished or the final generation file is damaged.
    bool incomplete() const { return incomplete_; }

    /// Reads and validates one generation file.
    GenerationRecord load_generation(int g) const;

private:
    friend RunArchive read_run(const std::filesystem::path& dir);

    std::filesystem::path dir_;
    RunManifest manifest_;
    int readable_ = 0;
    bool incomplete_ = false;
};

RunArchive read_run(const std::filesystem::path& dir);

using GenerationLookup = std::function<const GenerationRecord&(int g)>;

/// Parameters evaluated at training time for point i of generation g (i = -1: parent).
ParameterVector reconstruct_params(const RunManifest& manifest, const GenerationLookup& lookup, int g, int i);
ParameterVector reconstruct_params(const RunArchive& run, int g, int i);

}  // namespace vine::archive
