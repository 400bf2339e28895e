#pragma once

// Vocabulary and model-input encoding: [CLS] code tokens [SEP] DFG nodes,
// plus the additive attention mask over that sequence.

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "ompadvisor/corpus.hpp"

namespace ompadvisor {

inline constexpr float kMaskBlocked = -1e9f;

class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kCls = 1;
    static constexpr int kSep = 2;
    static constexpr int kUnk = 3;

    Vocabulary();

    int id(std::string_view token) const;
    const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
    int size() const { return static_cast<int>(tokens_.size()); }
    int min_freq() const { return min_freq_; }
    bool contains(std::string_view token) const { return ids_.count(std::string(token)) > 0; }

    void add(const std::string& token);
    void set_min_freq(int min_freq) { min_freq_ = min_freq; }

    bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> ids_;
    int min_freq_ = 1;
};

// Counts code-token lexemes of the given samples (callers pass the train
// split) and keeps those seen at least min_freq times, ordered by
// (-frequency, lexeme). DFG names are code tokens, so they are covered.
Vocabulary build_vocabulary(const std::vector<Sample>& train, int min_freq);

nlohmann::ordered_json to_json(const Vocabulary& vocab);
Vocabulary vocabulary_from_json(const nlohmann::json& j);

struct EncodeOptions {
    int max_code = 256;
    int max_dfg = 32;
};

struct EncodeStats {
    std::size_t samples = 0;
    std::size_t code_truncated = 0;     // samples whose code was cut to max_code
    std::size_t dfg_truncated = 0;      // samples that lost DFG nodes
    std::size_t dfg_nodes_dropped = 0;
    std::size_t unknown_tokens = 0;

    void merge(const EncodeStats& other);
};

nlohmann::ordered_json to_json(const EncodeStats& stats);

// Square additive mask, row-major, entries 0 or kMaskBlocked.
struct AttentionMask {
    std::size_t size = 0;
    std::vector<float> values;

    float at(std::size_t i, std::size_t j) const { return values[i * size + j]; }
    bool open(std::size_t i, std::size_t j) const { return at(i, j) == 0.0f; }
};

// n_code code slots sit at 1..n_code, [CLS] at 0 and [SEP] at n_code + 1;
// DFG node k sits at n_code + 2 + k. `alignment[k]` is the code slot of
// node k and `edges` index DFG nodes. Throws std::out_of_range on bad input.
AttentionMask build_attention_mask(std::size_t n_code, const std::vector<std::size_t>& alignment,
                                   const std::vector<DfgEdge>& edges);

struct EncodedInput {
    std::vector<int> ids;
    std::vector<int> positions;
    AttentionMask mask;
    std::vector<std::size_t> dfg_alignment;  // sequence slot of each DFG node's token
    std::vector<DfgEdge> dfg_edges;
    std::size_t n_code = 0;
    std::size_t n_dfg = 0;
    std::array<int, 3> labels{};

    std::size_t length() const { return ids.size(); }
};

EncodedInput encode_sample(const Sample& sample, const Vocabulary& vocab, const EncodeOptions& options,
                           EncodeStats* stats = nullptr);

}  // namespace ompadvisor
