#include "ompadvisor/augment.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <stdexcept>

#include "ompadvisor/jsonl.hpp"
#include "ompadvisor/rng.hpp"

namespace ompadvisor {

namespace {

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

ParsedSource parse_or_throw(const std::string& code, const Sample& sample) {
    try {
        return parse_snippet(code);
    } catch (const SyntaxError& e) {
        throw DataError("sample " + sample.id + " does not parse: " + e.what());
    }
}

std::string rename_code(const std::string& code, const ParsedSource& parsed,
                        const std::map<std::string, std::string>& renames) {
    struct Edit {
        std::size_t offset;
        std::size_t length;
        std::string text;
    };
    std::vector<Edit> edits;
    for (const auto& n : variable_nodes(parsed.unit)) {
        const auto it = renames.find(n.var_name);
        if (it != renames.end()) {
            const Token& t = parsed.tokens[n.code_token_index];
            edits.push_back(Edit{t.offset, t.lexeme.size(), it->second});
        }
    }
    for (const auto& t : parsed.tokens) {
        if (t.kind == TokenKind::pragma_line) {
            // Pragma tokens are stored normalized; the source line is canonical
            // already, so the token text matches the bytes at its offset.
            std::string renamed = rename_in_pragma(t.lexeme, renames);
            if (renamed != t.lexeme) {
                edits.push_back(Edit{t.offset, t.lexeme.size(), std::move(renamed)});
            }
        }
    }
    std::sort(edits.begin(), edits.end(), [](const Edit& a, const Edit& b) { return a.offset > b.offset; });
    std::string out = code;
    for (const auto& e : edits) {
        out.replace(e.offset, e.length, e.text);
    }
    return out;
}

void collect_identifiers(const std::vector<Token>& tokens, std::set<std::string>& out) {
    for (const auto& t : tokens) {
        if (t.kind == TokenKind::identifier) {
            out.insert(t.lexeme);
        }
    }
}

}  // namespace

const char* to_string(AugMode mode) {
    switch (mode) {
        case AugMode::none: return "none";
        case AugMode::curriculum: return "curriculum";
        case AugMode::replaced: return "replaced";
    }
    return "none";
}

AugMode aug_mode_from_string(std::string_view text) {
    if (text == "none") return AugMode::none;
    if (text == "curriculum") return AugMode::curriculum;
    if (text == "replaced") return AugMode::replaced;
    throw std::invalid_argument("unknown augmentation mode '" + std::string(text) + "'");
}

double curriculum_ratio(int epoch) {
    if (epoch < 1) {
        throw std::invalid_argument("epoch must be >= 1, got " + std::to_string(epoch));
    }
    // Integer tenths keep the schedule exact: 0, .1, .2, .3, .4, .4, ...
    return static_cast<double>(std::min(epoch - 1, 4)) / 10.0;
}

double augmentation_fraction(AugMode mode, int epoch) {
    switch (mode) {
        case AugMode::none: return 0.0;
        case AugMode::curriculum: return curriculum_ratio(epoch);
        case AugMode::replaced: return 1.0;
    }
    return 0.0;
}

std::size_t rename_count(double fraction, std::size_t n) {
    if (fraction <= 0.0) {
        return 0;
    }
    const double exact = fraction * static_cast<double>(n);
    return std::min(n, static_cast<std::size_t>(std::floor(exact + 1e-9)));
}

std::vector<std::string> sample_variables(const Sample& sample) {
    std::set<std::string> names;
    for (const std::string* code : {&sample.loop_code, &sample.context_code}) {
        if (code->empty()) {
            continue;
        }
        const ParsedSource parsed = parse_or_throw(*code, sample);
        for (const auto& n : variable_nodes(parsed.unit)) {
            names.insert(n.var_name);
        }
    }
    return {names.begin(), names.end()};
}

std::string rename_in_pragma(std::string_view pragma, const std::map<std::string, std::string>& renames) {
    std::string out;
    int depth = 0;
    std::size_t i = 0;
    while (i < pragma.size()) {
        const char c = pragma[i];
        if (is_word_char(c)) {
            const std::size_t b = i;
            while (i < pragma.size() && is_word_char(pragma[i])) {
                ++i;
            }
            const std::string word(pragma.substr(b, i - b));
            const auto it = depth > 0 ? renames.find(word) : renames.end();
            out += it != renames.end() ? it->second : word;
            continue;
        }
        if (c == '(') ++depth;
        if (c == ')') --depth;
        out.push_back(c);
        ++i;
    }
    return out;
}

RenameOutcome rename_variables_detailed(const Sample& sample, double fraction, std::uint64_t seed) {
    RenameOutcome outcome;
    outcome.sample = sample;
    const ParsedSource loop = parse_or_throw(sample.loop_code, sample);
    ParsedSource context;
    if (!sample.context_code.empty()) {
        context = parse_or_throw(sample.context_code, sample);
    }
    std::set<std::string> names;
    for (const auto& n : variable_nodes(loop.unit)) {
        names.insert(n.var_name);
    }
    for (const auto& n : variable_nodes(context.unit)) {
        names.insert(n.var_name);
    }
    outcome.variable_count = names.size();
    const std::size_t k = rename_count(fraction, names.size());
    if (k == 0) {
        return outcome;
    }

    std::vector<std::string> order(names.begin(), names.end());
    Rng rng(seed);
    rng.shuffle(order);

    std::set<std::string> taken;
    collect_identifiers(loop.tokens, taken);
    collect_identifiers(context.tokens, taken);
    for (std::size_t i = 0; i < k; ++i) {
        std::string fresh;
        do {
            fresh = "var" + std::to_string(rng.below(10000));
        } while (taken.count(fresh));
        taken.insert(fresh);
        outcome.renames[order[i]] = fresh;
    }

    Sample& out = outcome.sample;
    out.loop_code = rename_code(sample.loop_code, loop, outcome.renames);
    if (!sample.context_code.empty()) {
        out.context_code = rename_code(sample.context_code, context, outcome.renames);
    }
    if (sample.pragma_raw) {
        out.pragma_raw = rename_in_pragma(*sample.pragma_raw, outcome.renames);
    }
    const ParsedSource snippet = parse_snippet(sample_text(out));
    out.dfg = serialize_dfg(build_dfg(snippet.unit, snippet.tokens));
    return outcome;
}

Sample rename_variables(const Sample& sample, double fraction, std::uint64_t seed) {
    return rename_variables_detailed(sample, fraction, seed).sample;
}

}  // namespace ompadvisor
