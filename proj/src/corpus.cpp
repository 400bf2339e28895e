#include "ompadvisor/corpus.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdio>
#include <unordered_map>
#include <unordered_set>

#include "ompadvisor/jsonl.hpp"
#include "ompadvisor/kernels.hpp"
#include "ompadvisor/rng.hpp"

namespace ompadvisor {

namespace fs = std::filesystem;

namespace {

struct LoopSite {
    const AstNode* loop = nullptr;
    const AstNode* pragma = nullptr;
    const AstNode* function = nullptr;
    int depth = 0;
};

void find_loops(const AstNode& node, const AstNode* function, int depth, std::vector<LoopSite>& out) {
    const AstNode* prev = nullptr;
    for (const auto& child : node.children) {
        if (child.kind == AstKind::FunctionDef) {
            find_loops(child, &child, 0, out);
        } else if (child.kind == AstKind::ForStmt) {
            if (function != nullptr) {
                const AstNode* pragma =
                    prev != nullptr && prev->kind == AstKind::PragmaDirective ? prev : nullptr;
                out.push_back(LoopSite{&child, pragma, function, depth});
            }
            find_loops(child, function, depth + 1, out);
        } else {
            find_loops(child, function, depth, out);
        }
        prev = &child;
    }
}

bool is_empty_statement(const AstNode& s) {
    if (s.kind == AstKind::Empty) {
        return true;
    }
    if (s.kind == AstKind::CompoundStmt) {
        return std::all_of(s.children.begin(), s.children.end(), is_empty_statement);
    }
    return false;
}

// First barrier/critical/atomic pragma inside the subtree, if any.
const AstNode* find_sync_pragma(const AstNode& node) {
    const AstNode* found = nullptr;
    walk(node, [&](const AstNode& n) {
        if (found != nullptr || n.kind != AstKind::PragmaDirective) {
            return;
        }
        try {
            const OmpDirective d = parse_omp_pragma(n.value).directive;
            if (d == OmpDirective::barrier || d == OmpDirective::critical || d == OmpDirective::atomic) {
                found = &n;
            }
        } catch (const PragmaError&) {
        }
    });
    return found;
}

const AstNode* assigned_variable(const AstNode& e) {
    switch (e.kind) {
        case AstKind::Identifier: return &e;
        case AstKind::ArrayIndex: return assigned_variable(e.children[0]);
        case AstKind::UnaryOp: return e.value == "*" && !e.postfix ? assigned_variable(e.children[0]) : nullptr;
        default: return nullptr;
    }
}

// Declarations of, and earlier assignments to, the variables the loop uses.
std::string context_of(const LoopSite& site) {
    std::set<std::string> used;
    for (const auto& n : variable_nodes(*site.loop)) {
        used.insert(n.var_name);
    }
    const std::size_t loop_start = site.loop->span.first;

    std::vector<std::pair<std::size_t, std::string>> pieces;
    auto add_declaration = [&](const AstNode& decl) {
        if (decl.span.empty() || decl.span.last >= loop_start) {
            return;
        }
        AstNode kept = decl;
        kept.children.clear();
        for (const auto& d : decl.children) {
            if (used.count(d.value)) {
                kept.children.push_back(d);
            }
        }
        if (!kept.children.empty()) {
            pieces.emplace_back(decl.span.first, render(kept));
        }
    };

    const AstNode& fn = *site.function;
    for (std::size_t i = 0; i + 1 < fn.children.size(); ++i) {
        add_declaration(fn.children[i]);
    }
    walk(fn.children.back(), [&](const AstNode& n) {
        if (n.kind == AstKind::Declaration) {
            add_declaration(n);
        } else if (n.kind == AstKind::ExprStmt && !n.span.empty() && n.span.last < loop_start &&
                   n.children[0].kind == AstKind::Assign) {
            const AstNode* target = assigned_variable(n.children[0].children[0]);
            if (target != nullptr && used.count(target->value)) {
                pieces.emplace_back(n.span.first, render(n));
            }
        }
    });
    std::sort(pieces.begin(), pieces.end());
    std::string out;
    for (const auto& [pos, text] : pieces) {
        if (!out.empty()) {
            out += "\n";
        }
        out += text;
    }
    return out;
}

bool is_source_file(const fs::path& p) {
    const std::string ext = p.extension().string();
    return ext == ".c" || ext == ".cc" || ext == ".cpp" || ext == ".cxx";
}

}  // namespace

const char* to_string(Split split) {
    switch (split) {
        case Split::train: return "train";
        case Split::valid: return "valid";
        case Split::test: return "test";
        case Split::none: return "none";
    }
    return "none";
}

Split split_from_string(std::string_view text) {
    if (text == "train") return Split::train;
    if (text == "valid") return Split::valid;
    if (text == "test") return Split::test;
    if (text == "none") return Split::none;
    throw DataError("unknown split '" + std::string(text) + "'");
}

const char* to_string(RejectReason reason) {
    switch (reason) {
        case RejectReason::parse_error: return "parse_error";
        case RejectReason::empty_loop: return "empty_loop";
        case RejectReason::barrier_critical_atomic: return "barrier_critical_atomic";
        case RejectReason::nested_duplicate: return "nested_duplicate";
    }
    return "?";
}

std::string sample_text(const Sample& sample) {
    if (sample.context_code.empty()) {
        return sample.loop_code;
    }
    return sample.context_code + "\n" + sample.loop_code;
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string normalized_hash(std::string_view code) {
    const ParsedSource parsed = parse_snippet(code);
    const std::vector<Token> tokens = lex(render(parsed.unit));
    std::unordered_map<std::string, std::size_t> index;
    std::string normalized;
    for (const auto& t : tokens) {
        if (!normalized.empty()) {
            normalized.push_back(' ');
        }
        if (t.kind == TokenKind::identifier) {
            const auto [it, inserted] = index.emplace(t.lexeme, index.size());
            normalized += "$" + std::to_string(it->second);
        } else {
            normalized += t.lexeme;
        }
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(normalized)));
    return buf;
}

Extraction extract_samples(std::string_view text, const std::string& path, bool with_scope) {
    Extraction out;
    ParsedSource parsed;
    try {
        parsed = parse_source(text);
    } catch (const SyntaxError& e) {
        out.rejects.push_back(Reject{path, e.line(), RejectReason::parse_error, e.what()});
        return out;
    }

    std::vector<LoopSite> sites;
    find_loops(parsed.unit, nullptr, 0, sites);
    std::unordered_set<std::string> seen;
    for (const auto& site : sites) {
        const AstNode& loop = *site.loop;
        const int line = parsed.tokens[loop.span.first].line;
        if (is_empty_statement(loop.children[3])) {
            out.rejects.push_back(Reject{path, line, RejectReason::empty_loop, ""});
            continue;
        }
        if (const AstNode* sync = find_sync_pragma(loop.children[3])) {
            out.rejects.push_back(Reject{path, line, RejectReason::barrier_critical_atomic, sync->value});
            continue;
        }

        Sample s;
        s.path = path;
        s.line = line;
        s.token_offset = loop.span.first;
        s.loop_code = render(loop);
        s.id = normalized_hash(s.loop_code);
        if (site.depth > 0 && seen.count(s.id)) {
            out.rejects.push_back(Reject{path, line, RejectReason::nested_duplicate, s.id});
            continue;
        }
        if (site.pragma != nullptr) {
            OmpPragma pragma;
            try {
                pragma = parse_omp_pragma(site.pragma->value);
            } catch (const PragmaError& e) {
                out.rejects.push_back(Reject{path, line, RejectReason::parse_error, e.what()});
                continue;
            }
            if (pragma.directive == OmpDirective::parallel_for || pragma.directive == OmpDirective::for_) {
                s.label_pragma = 1;
                s.pragma_raw = site.pragma->value;
                s.label_private = pragma.has_clause("private") ? 1 : 0;
                s.label_reduction = pragma.has_clause("reduction") ? 1 : 0;
            }
        }
        if (with_scope) {
            s.context_code = context_of(site);
        }
        const ParsedSource snippet = parse_snippet(sample_text(s));
        s.dfg = serialize_dfg(build_dfg(snippet.unit, snippet.tokens));
        seen.insert(s.id);
        out.samples.push_back(std::move(s));
    }
    return out;
}

Extraction extract_file(const fs::path& file, const std::string& display_path, bool with_scope) {
    return extract_samples(std::string_view(read_text_file(file)), display_path, with_scope);
}

std::vector<Sample> deduplicate(std::vector<Sample> samples) {
    std::unordered_set<std::string> seen;
    std::vector<Sample> out;
    out.reserve(samples.size());
    for (auto& s : samples) {
        if (seen.insert(s.id).second) {
            out.push_back(std::move(s));
        }
    }
    return out;
}

std::vector<Sample> split_corpus(std::vector<Sample> samples, std::uint64_t seed,
                                 const std::set<std::string>& holdout_ids) {
    const std::size_t n = samples.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) {
        order[i] = i;
    }
    Rng rng(seed);
    rng.shuffle(order);
    const std::size_t n_valid = n / 10;
    const std::size_t n_test = n / 10;
    const std::size_t n_train = n - n_valid - n_test;
    for (std::size_t pos = 0; pos < n; ++pos) {
        Sample& s = samples[order[pos]];
        Split split = pos < n_train ? Split::train : (pos < n_train + n_valid ? Split::valid : Split::test);
        if (split == Split::train && holdout_ids.count(s.id)) {
            split = Split::none;
        }
        s.split = split;
    }
    return samples;
}

std::string language_of(std::string_view path) {
    return path.size() >= 2 && path.substr(path.size() - 2) == ".c" ? "C" : "C++";
}

CorpusStats compute_stats(const std::vector<Sample>& samples) {
    CorpusStats stats;
    stats.by_language["C"] = {0, 0};
    stats.by_language["C++"] = {0, 0};
    for (const auto& s : samples) {
        auto& counts = stats.by_language[language_of(s.path)];
        ++counts[s.label_pragma ? 0 : 1];
        stats.private_clauses += static_cast<std::size_t>(s.label_private);
        stats.reduction_clauses += static_cast<std::size_t>(s.label_reduction);
        const auto lines = static_cast<std::size_t>(std::count(s.loop_code.begin(), s.loop_code.end(), '\n')) + 1;
        ++stats.length_buckets[lines <= 15 ? 0 : (lines <= 50 ? 1 : 2)];
        ++stats.total;
    }
    return stats;
}

std::string format_stats(const CorpusStats& stats) {
    const auto& c = stats.by_language.at("C");
    const auto& cpp = stats.by_language.at("C++");
    char buf[256];
    std::string out;
    out += "(a) Loops per language\n";
    std::snprintf(buf, sizeof buf, "%-16s %10s %10s\n", "Description", "C", "C++");
    out += buf;
    std::snprintf(buf, sizeof buf, "%-16s %10zu %10zu\n", "With OpenMP", c[0], cpp[0]);
    out += buf;
    std::snprintf(buf, sizeof buf, "%-16s %10zu %10zu\n", "Without OpenMP", c[1], cpp[1]);
    out += buf;
    std::snprintf(buf, sizeof buf, "%-16s %10zu %10zu\n", "Total", c[0] + c[1], cpp[0] + cpp[1]);
    out += buf;
    out += "\n(b) Clauses\n";
    std::snprintf(buf, sizeof buf, "%-16s %10zu\n", "private", stats.private_clauses);
    out += buf;
    std::snprintf(buf, sizeof buf, "%-16s %10zu\n", "reduction", stats.reduction_clauses);
    out += buf;
    std::snprintf(buf, sizeof buf, "%-16s %10zu\n", "Total", stats.private_clauses + stats.reduction_clauses);
    out += buf;
    out += "\n(c) Snippet length (lines)\n";
    std::snprintf(buf, sizeof buf, "%-16s %10zu\n", "<= 15", stats.length_buckets[0]);
    out += buf;
    std::snprintf(buf, sizeof buf, "%-16s %10zu\n", "16-50", stats.length_buckets[1]);
    out += buf;
    std::snprintf(buf, sizeof buf, "%-16s %10zu\n", "> 50", stats.length_buckets[2]);
    out += buf;
    return out;
}

std::vector<fs::path> list_sources(const fs::path& dir) {
    if (!fs::is_directory(dir)) {
        throw DataError("not a directory: " + dir.string());
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (entry.is_regular_file() && is_source_file(entry.path())) {
            files.push_back(fs::relative(entry.path(), dir));
        }
    }
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.generic_string() < b.generic_string(); });
    return files;
}

Extraction extract_directory(const fs::path& dir, bool with_scope) {
    const std::vector<fs::path> files = list_sources(dir);
    std::vector<Extraction> parts(files.size());
    std::vector<std::string> errors(files.size());
    const auto n = static_cast<std::ptrdiff_t>(files.size());
#pragma omp parallel for schedule(dynamic) num_threads(kernel_threads())
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        try {
            parts[k] = extract_file(dir / files[k], files[k].generic_string(), with_scope);
        } catch (const std::exception& e) {
            errors[k] = e.what();
        }
    }
    Extraction all;
    for (std::size_t k = 0; k < files.size(); ++k) {
        if (!errors[k].empty()) {
            throw DataError(files[k].generic_string() + ": " + errors[k]);
        }
        for (auto& s : parts[k].samples) {
            all.samples.push_back(std::move(s));
        }
        for (auto& r : parts[k].rejects) {
            all.rejects.push_back(std::move(r));
        }
    }
    std::stable_sort(all.samples.begin(), all.samples.end(), [](const Sample& a, const Sample& b) {
        return a.path != b.path ? a.path < b.path : a.token_offset < b.token_offset;
    });
    std::stable_sort(all.rejects.begin(), all.rejects.end(), [](const Reject& a, const Reject& b) {
        return a.path != b.path ? a.path < b.path : a.line < b.line;
    });
    return all;
}

CorpusBuild build_corpus(const fs::path& src_dir, const CorpusOptions& options) {
    CorpusBuild build;
    std::set<std::string> holdout;
    if (options.benchmarks_dir) {
        Extraction bench = extract_directory(*options.benchmarks_dir, options.with_scope);
        for (auto& s : bench.samples) {
            holdout.insert(s.id);
            s.split = Split::none;
        }
        build.benchmark = std::move(bench.samples);
    }
    Extraction extracted = extract_directory(src_dir, options.with_scope);
    const std::size_t before = extracted.samples.size();
    std::vector<Sample> unique = deduplicate(std::move(extracted.samples));
    build.duplicates_removed = before - unique.size();
    build.samples = split_corpus(std::move(unique), options.seed, holdout);
    build.rejects = std::move(extracted.rejects);
    build.stats = compute_stats(build.samples);
    return build;
}

void write_corpus(const CorpusBuild& build, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    write_jsonl(out_dir / "corpus.jsonl", build.samples);
    std::string rejects;
    for (const auto& r : build.rejects) {
        rejects += to_json(r).dump() + "\n";
    }
    write_text_file(out_dir / "rejects.jsonl", rejects);
    write_text_file(out_dir / "stats.json", to_json(build.stats).dump(2) + "\n");
    if (!build.benchmark.empty()) {
        write_jsonl(out_dir / "benchmark.jsonl", build.benchmark);
    }
}

}  // namespace ompadvisor
