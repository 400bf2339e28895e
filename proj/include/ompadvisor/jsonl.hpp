#pragma once

// JSON encodings of corpus records.

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "ompadvisor/corpus.hpp"

namespace ompadvisor {

using ordered_json = nlohmann::ordered_json;

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

ordered_json to_json(const Sample& sample);
Sample sample_from_json(const nlohmann::json& j);

ordered_json to_json(const Reject& reject);
ordered_json to_json(const CorpusStats& stats);

std::vector<Sample> read_jsonl(const std::filesystem::path& file);
void write_jsonl(const std::filesystem::path& file, const std::vector<Sample>& samples);

std::string read_text_file(const std::filesystem::path& file);
void write_text_file(const std::filesystem::path& file, const std::string& content);

}  // namespace ompadvisor
