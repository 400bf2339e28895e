#include "ompadvisor/encode.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include "ompadvisor/jsonl.hpp"

namespace ompadvisor {

Vocabulary::Vocabulary() {
    for (const char* t : {"[PAD]", "[CLS]", "[SEP]", "[UNK]"}) {
        add(t);
    }
}

int Vocabulary::id(std::string_view token) const {
    const auto it = ids_.find(std::string(token));
    return it == ids_.end() ? kUnk : it->second;
}

void Vocabulary::add(const std::string& token) {
    if (ids_.emplace(token, static_cast<int>(tokens_.size())).second) {
        tokens_.push_back(token);
    }
}

Vocabulary build_vocabulary(const std::vector<Sample>& train, int min_freq) {
    if (train.empty()) {
        throw DataError("cannot build a vocabulary from an empty training split");
    }
    std::map<std::string, std::size_t> counts;
    for (const auto& s : train) {
        for (const auto& t : lex(sample_text(s))) {
            ++counts[t.lexeme];
        }
    }
    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    Vocabulary vocab;
    vocab.set_min_freq(min_freq);
    for (const auto& [token, count] : ranked) {
        if (count >= static_cast<std::size_t>(min_freq)) {
            vocab.add(token);
        }
    }
    return vocab;
}

nlohmann::ordered_json to_json(const Vocabulary& vocab) {
    nlohmann::ordered_json j;
    for (int i = 0; i < vocab.size(); ++i) {
        j[vocab.token(i)] = i;
    }
    return j;
}

Vocabulary vocabulary_from_json(const nlohmann::json& j) {
    std::vector<std::pair<int, std::string>> entries;
    for (auto it = j.begin(); it != j.end(); ++it) {
        entries.emplace_back(it.value().get<int>(), it.key());
    }
    std::sort(entries.begin(), entries.end());
    Vocabulary vocab;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].first != static_cast<int>(i)) {
            throw DataError("vocabulary ids are not dense at id " + std::to_string(i));
        }
        if (i < 4 && vocab.token(static_cast<int>(i)) != entries[i].second) {
            throw DataError("reserved vocabulary id " + std::to_string(i) + " is not " +
                            vocab.token(static_cast<int>(i)));
        }
        vocab.add(entries[i].second);
    }
    return vocab;
}

void EncodeStats::merge(const EncodeStats& other) {
    samples += other.samples;
    code_truncated += other.code_truncated;
    dfg_truncated += other.dfg_truncated;
    dfg_nodes_dropped += other.dfg_nodes_dropped;
    unknown_tokens += other.unknown_tokens;
}

nlohmann::ordered_json to_json(const EncodeStats& stats) {
    return nlohmann::ordered_json{{"samples", stats.samples},
                                  {"code_truncated", stats.code_truncated},
                                  {"dfg_truncated", stats.dfg_truncated},
                                  {"dfg_nodes_dropped", stats.dfg_nodes_dropped},
                                  {"unknown_tokens", stats.unknown_tokens}};
}

AttentionMask build_attention_mask(std::size_t n_code, const std::vector<std::size_t>& alignment,
                                   const std::vector<DfgEdge>& edges) {
    const std::size_t n_dfg = alignment.size();
    const std::size_t code_block = n_code + 2;
    AttentionMask mask;
    mask.size = code_block + n_dfg;
    mask.values.assign(mask.size * mask.size, kMaskBlocked);
    auto open = [&](std::size_t i, std::size_t j) {
        mask.values[i * mask.size + j] = 0.0f;
        mask.values[j * mask.size + i] = 0.0f;
    };
    for (std::size_t i = 0; i < code_block; ++i) {
        for (std::size_t j = 0; j < code_block; ++j) {
            mask.values[i * mask.size + j] = 0.0f;
        }
    }
    for (std::size_t k = 0; k < n_dfg; ++k) {
        if (alignment[k] < 1 || alignment[k] > n_code) {
            throw std::out_of_range("DFG node " + std::to_string(k) + " aligned to slot " +
                                    std::to_string(alignment[k]) + " outside code block 1.." +
                                    std::to_string(n_code));
        }
        const std::size_t slot = code_block + k;
        open(slot, slot);
        open(slot, 0);
        open(slot, n_code + 1);
        open(slot, alignment[k]);
    }
    for (const auto& e : edges) {
        if (e.to < 0 || e.from < 0 || static_cast<std::size_t>(e.to) >= n_dfg ||
            static_cast<std::size_t>(e.from) >= n_dfg) {
            throw std::out_of_range("DFG edge (" + std::to_string(e.to) + "," + std::to_string(e.from) +
                                    ") outside " + std::to_string(n_dfg) + " nodes");
        }
        open(code_block + static_cast<std::size_t>(e.to), code_block + static_cast<std::size_t>(e.from));
    }
    return mask;
}

EncodedInput encode_sample(const Sample& sample, const Vocabulary& vocab, const EncodeOptions& options,
                           EncodeStats* stats) {
    const std::vector<Token> tokens = lex(sample_text(sample));
    EncodeStats local;
    local.samples = 1;

    EncodedInput in;
    in.labels = sample.labels();
    in.n_code = std::min(tokens.size(), static_cast<std::size_t>(std::max(options.max_code, 0)));
    if (in.n_code < tokens.size()) {
        local.code_truncated = 1;
    }

    // DFG nodes whose token survived truncation, then the first max_dfg of them.
    std::vector<int> new_index(sample.dfg.names.size(), -1);
    std::vector<std::size_t> kept;
    for (std::size_t k = 0; k < sample.dfg.names.size(); ++k) {
        const std::size_t tok = sample.dfg.alignment[k];
        if (tok >= tokens.size() || tokens[tok].lexeme != sample.dfg.names[k]) {
            throw DataError("sample " + sample.id + ": DFG node " + std::to_string(k) + " ('" +
                            sample.dfg.names[k] + "') is not aligned with its code token");
        }
        if (tok < in.n_code && kept.size() < static_cast<std::size_t>(std::max(options.max_dfg, 0))) {
            new_index[k] = static_cast<int>(kept.size());
            kept.push_back(k);
        }
    }
    local.dfg_nodes_dropped = sample.dfg.names.size() - kept.size();
    local.dfg_truncated = local.dfg_nodes_dropped > 0 ? 1 : 0;
    in.n_dfg = kept.size();

    auto push = [&](int id, int position) {
        in.ids.push_back(id);
        in.positions.push_back(position);
        if (id == Vocabulary::kUnk) {
            ++local.unknown_tokens;
        }
    };
    push(Vocabulary::kCls, 0);
    for (std::size_t i = 0; i < in.n_code; ++i) {
        push(vocab.id(tokens[i].lexeme), static_cast<int>(i + 1));
    }
    push(Vocabulary::kSep, 0);
    for (const std::size_t k : kept) {
        push(vocab.id(sample.dfg.names[k]), 0);
        in.dfg_alignment.push_back(sample.dfg.alignment[k] + 1);
    }
    for (const auto& e : sample.dfg.edges) {
        const int to = new_index.at(static_cast<std::size_t>(e.to));
        const int from = new_index.at(static_cast<std::size_t>(e.from));
        if (to >= 0 && from >= 0) {
            in.dfg_edges.push_back(DfgEdge{to, from});
        }
    }
    in.mask = build_attention_mask(in.n_code, in.dfg_alignment, in.dfg_edges);
    if (stats != nullptr) {
        stats->merge(local);
    }
    return in;
}

}  // namespace ompadvisor
