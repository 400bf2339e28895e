#pragma once

// Loop extraction, labeling, dedup and splitting for the JSONL corpus.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ompadvisor/dfg.hpp"

namespace ompadvisor {

enum class Split { train, valid, test, none };

const char* to_string(Split split);
Split split_from_string(std::string_view text);

struct Sample {
    std::string id;
    std::string path;
    std::string loop_code;
    std::string context_code;
    std::optional<std::string> pragma_raw;
    int label_pragma = 0;
    int label_private = 0;
    int label_reduction = 0;
    SerializedDfg dfg;
    Split split = Split::none;

    // Position in the source file; orders samples but is not serialized.
    int line = 0;
    std::size_t token_offset = 0;

    std::array<int, 3> labels() const { return {label_pragma, label_private, label_reduction}; }
};

// Text the sample's DFG token indices refer to: context (if any), newline, loop.
std::string sample_text(const Sample& sample);

enum class RejectReason { parse_error, empty_loop, barrier_critical_atomic, nested_duplicate };

const char* to_string(RejectReason reason);

struct Reject {
    std::string path;
    int line = 0;
    RejectReason reason = RejectReason::parse_error;
    std::string detail;
};

struct Extraction {
    std::vector<Sample> samples;
    std::vector<Reject> rejects;
};

// One Sample per ForStmt at any depth inside a function body. `path` is the
// name recorded in the samples; `text` is the file content.
Extraction extract_samples(std::string_view text, const std::string& path, bool with_scope);
Extraction extract_file(const std::filesystem::path& file, const std::string& display_path, bool with_scope);

// 16 hex chars of FNV-1a 64 over the canonical token sequence with
// identifiers rewritten to first-occurrence indices.
std::string normalized_hash(std::string_view code);
std::uint64_t fnv1a64(std::string_view bytes);

// Keeps the first sample per id, preserving order.
std::vector<Sample> deduplicate(std::vector<Sample> samples);

// Seeded shuffle then 80/10/10 by position. Samples whose id is in
// `holdout_ids` are never assigned to train (they get Split::none).
std::vector<Sample> split_corpus(std::vector<Sample> samples, std::uint64_t seed,
                                 const std::set<std::string>& holdout_ids);

struct CorpusStats {
    // language ("C" / "C++") -> {with_pragma, without_pragma}
    std::map<std::string, std::array<std::size_t, 2>> by_language;
    std::size_t private_clauses = 0;
    std::size_t reduction_clauses = 0;
    std::array<std::size_t, 3> length_buckets{};  // <=15, 16-50, >50 lines
    std::size_t total = 0;
};

std::string language_of(std::string_view path);
CorpusStats compute_stats(const std::vector<Sample>& samples);
std::string format_stats(const CorpusStats& stats);

// Whole-directory pipeline ---------------------------------------------------

struct CorpusOptions {
    bool with_scope = false;
    std::uint64_t seed = 0;
    std::optional<std::filesystem::path> benchmarks_dir;
};

struct CorpusBuild {
    std::vector<Sample> samples;     // deduplicated and split
    std::vector<Reject> rejects;
    std::vector<Sample> benchmark;   // labeled benchmark loops (split = none)
    std::size_t duplicates_removed = 0;
    CorpusStats stats;
};

// Source files (.c/.cc/.cpp/.cxx) under `dir`, sorted by relative path.
std::vector<std::filesystem::path> list_sources(const std::filesystem::path& dir);

Extraction extract_directory(const std::filesystem::path& dir, bool with_scope);

CorpusBuild build_corpus(const std::filesystem::path& src_dir, const CorpusOptions& options);

void write_corpus(const CorpusBuild& build, const std::filesystem::path& out_dir);

}  // namespace ompadvisor
