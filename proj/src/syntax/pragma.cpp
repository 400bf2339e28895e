#include <algorithm>
#include <cctype>
#include <unordered_set>

#include "ompadvisor/syntax.hpp"

namespace ompadvisor {

namespace {

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string collapse_spaces(std::string_view s) {
    std::string out;
    bool space = false;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            space = !out.empty();
            continue;
        }
        if (space) {
            out.push_back(' ');
            space = false;
        }
        out.push_back(c);
    }
    return out;
}

const std::unordered_set<std::string_view>& directive_words() {
    static const std::unordered_set<std::string_view> set = {
        "parallel", "for",      "do",        "simd",       "target",    "teams",   "distribute",
        "sections", "section",  "single",    "master",     "masked",    "critical", "atomic",
        "barrier",  "task",     "taskloop",  "taskwait",   "taskyield", "taskgroup", "flush",
        "ordered",  "threadprivate", "declare", "loop",    "cancel",    "cancellation", "point",
        "scope",    "workshare",
    };
    return set;
}

const std::unordered_set<std::string_view>& known_clauses() {
    static const std::unordered_set<std::string_view> set = {
        "private",   "firstprivate", "lastprivate", "shared",    "reduction",  "schedule",
        "collapse",  "num_threads",  "nowait",      "default",   "if",         "ordered",
        "copyin",    "copyprivate",  "linear",      "aligned",   "safelen",    "simdlen",
        "proc_bind", "untied",       "nogroup",     "map",       "device",     "depend",
        "final",     "mergeable",    "priority",    "grainsize", "num_tasks",  "dist_schedule",
        "num_teams", "thread_limit", "allocate",    "order",     "update",     "read",
        "write",     "capture",      "seq_cst",     "in_reduction", "task_reduction",
    };
    return set;
}

const std::unordered_set<std::string_view>& reduction_ops() {
    static const std::unordered_set<std::string_view> set = {"+", "*", "-", "&", "|", "^", "&&", "||", "min", "max"};
    return set;
}

// Splits on commas at parenthesis/bracket depth zero.
std::vector<std::string> split_top_level(std::string_view s) {
    std::vector<std::string> parts;
    int depth = 0;
    std::size_t start = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (c == '(' || c == '[') ++depth;
        if (c == ')' || c == ']') --depth;
        if (c == ',' && depth == 0) {
            parts.push_back(collapse_spaces(s.substr(start, i - start)));
            start = i + 1;
        }
    }
    parts.push_back(collapse_spaces(s.substr(start)));
    if (parts.size() == 1 && parts[0].empty()) {
        parts.clear();
    }
    return parts;
}

struct Item {
    std::string word;
    std::optional<std::string> group;  // text inside (...) when present
};

std::vector<Item> scan_items(std::string_view body, std::string_view raw) {
    std::vector<Item> items;
    std::size_t i = 0;
    while (i < body.size()) {
        const char c = body[i];
        if (std::isspace(static_cast<unsigned char>(c)) || c == ',') {
            ++i;
            continue;
        }
        if (!is_word_char(c)) {
            throw PragmaError("unexpected '" + std::string(1, c) + "' in pragma: " + std::string(raw));
        }
        const std::size_t b = i;
        while (i < body.size() && is_word_char(body[i])) ++i;
        Item item{std::string(body.substr(b, i - b)), std::nullopt};
        std::size_t j = i;
        while (j < body.size() && std::isspace(static_cast<unsigned char>(body[j]))) ++j;
        if (j < body.size() && body[j] == '(') {
            int depth = 0;
            std::size_t k = j;
            for (; k < body.size(); ++k) {
                if (body[k] == '(') ++depth;
                if (body[k] == ')' && --depth == 0) break;
            }
            if (k >= body.size()) {
                throw PragmaError("unbalanced parentheses in clause '" + item.word + "': " + std::string(raw));
            }
            item.group = std::string(body.substr(j + 1, k - j - 1));
            i = k + 1;
        } else if (j < body.size() && body[j] == ')') {
            throw PragmaError("unbalanced parentheses in pragma: " + std::string(raw));
        }
        items.push_back(std::move(item));
    }
    return items;
}

OmpClause make_clause(const Item& item, std::string_view raw) {
    OmpClause clause;
    clause.name = item.word;
    clause.known = known_clauses().count(item.word) > 0;
    if (!item.group) {
        return clause;
    }
    if (item.word == "reduction" || item.word == "in_reduction" || item.word == "task_reduction") {
        const std::string& g = *item.group;
        const std::size_t colon = g.find(':');
        if (colon == std::string::npos) {
            throw PragmaError("reduction clause without ':' in: " + std::string(raw));
        }
        std::string op = trim(g.substr(0, colon));
        if (const auto comma = op.rfind(','); comma != std::string::npos) {
            op = trim(op.substr(comma + 1));  // drop modifiers such as "inscan,"
        }
        if (op.empty()) {
            throw PragmaError("empty reduction operator in: " + std::string(raw));
        }
        if (!reduction_ops().count(op)) {
            throw PragmaError("unknown reduction operator '" + op + "' in: " + std::string(raw));
        }
        clause.reduction_op = op;
        clause.args = split_top_level(std::string_view(g).substr(colon + 1));
        if (clause.args.empty() || std::any_of(clause.args.begin(), clause.args.end(),
                                               [](const std::string& a) { return a.empty(); })) {
            throw PragmaError("reduction clause without variables in: " + std::string(raw));
        }
        return clause;
    }
    clause.args = split_top_level(*item.group);
    return clause;
}

}  // namespace

const char* to_string(OmpDirective directive) {
    switch (directive) {
        case OmpDirective::parallel_for: return "parallel_for";
        case OmpDirective::for_: return "for";
        case OmpDirective::parallel: return "parallel";
        case OmpDirective::barrier: return "barrier";
        case OmpDirective::critical: return "critical";
        case OmpDirective::atomic: return "atomic";
        case OmpDirective::other: return "other";
    }
    return "?";
}

std::string normalize_pragma_text(std::string_view raw) {
    std::string text = collapse_spaces(raw);
    if (text.rfind("# ", 0) == 0) {
        text.erase(1, 1);
    }
    return text;
}

bool OmpPragma::has_clause(std::string_view name) const { return find_clause(name) != nullptr; }

const OmpClause* OmpPragma::find_clause(std::string_view name) const {
    for (const auto& c : clauses) {
        if (c.name == name) {
            return &c;
        }
    }
    return nullptr;
}

bool is_standalone_directive(std::string_view pragma_text) {
    OmpPragma p;
    try {
        p = parse_omp_pragma(pragma_text);
    } catch (const PragmaError&) {
        return false;
    }
    if (p.directive_words.empty()) {
        return false;
    }
    static const std::unordered_set<std::string_view> standalone = {
        "barrier", "flush", "taskwait", "taskyield", "threadprivate", "cancel", "cancellation",
    };
    const std::string& first = p.directive_words.front();
    if (standalone.count(first)) {
        return true;
    }
    if (first == "target" && !p.clauses.empty()) {
        const std::string& second = p.clauses.front().name;
        return second == "update" || second == "enter" || second == "exit";
    }
    return false;
}

OmpPragma parse_omp_pragma(std::string_view raw) {
    const std::string text = normalize_pragma_text(raw);
    if (text.rfind("#pragma", 0) != 0) {
        throw PragmaError("not a pragma: " + std::string(raw));
    }
    std::size_t i = 7;
    while (i < text.size() && text[i] == ' ') ++i;
    if (text.compare(i, 3, "omp") != 0 || (i + 3 < text.size() && is_word_char(text[i + 3]))) {
        throw PragmaError("not an OpenMP pragma: " + std::string(raw));
    }
    const std::string_view body = std::string_view(text).substr(i + 3);

    OmpPragma pragma;
    pragma.raw = std::string(raw);
    const std::vector<Item> items = scan_items(body, raw);
    std::size_t k = 0;
    for (; k < items.size(); ++k) {
        const Item& item = items[k];
        if (!directive_words().count(item.word)) {
            break;
        }
        // "ordered" after a loop directive is a clause, not part of the directive.
        if (item.word == "ordered" && !pragma.directive_words.empty()) {
            break;
        }
        pragma.directive_words.push_back(item.word);
        if (item.group) {
            pragma.directive_arg = collapse_spaces(*item.group);
            ++k;
            break;
        }
    }
    for (; k < items.size(); ++k) {
        pragma.clauses.push_back(make_clause(items[k], raw));
    }

    const auto& words = pragma.directive_words;
    const auto par = std::find(words.begin(), words.end(), "parallel");
    const bool has_for = std::find(words.begin(), words.end(), "for") != words.end();
    if (par != words.end() && std::find(par, words.end(), "for") != words.end()) {
        pragma.directive = OmpDirective::parallel_for;
    } else if (has_for) {
        pragma.directive = OmpDirective::for_;
    } else if (words.size() == 1 && words[0] == "parallel") {
        pragma.directive = OmpDirective::parallel;
    } else if (!words.empty() && words[0] == "barrier") {
        pragma.directive = OmpDirective::barrier;
    } else if (!words.empty() && words[0] == "critical") {
        pragma.directive = OmpDirective::critical;
    } else if (!words.empty() && words[0] == "atomic") {
        pragma.directive = OmpDirective::atomic;
    } else {
        pragma.directive = OmpDirective::other;
    }
    return pragma;
}

}  // namespace ompadvisor
