#include "support.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace testsupport {

using ompadvisor::Rng;

std::filesystem::path fixture_dir() { return OMPADVISOR_FIXTURE_DIR; }

nlohmann::json load_json(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw std::runtime_error("cannot open " + file.string());
    }
    return nlohmann::json::parse(in);
}

namespace {

class ProgramGen {
public:
    explicit ProgramGen(Rng& rng) : rng_(rng) {}

    std::string unit() {
        std::string out;
        if (rng_.chance(0.3)) {
            out += "int g_count = 0;\n";
        }
        const int functions = static_cast<int>(rng_.range(1, 3));
        for (int f = 0; f < functions; ++f) {
            out += function(f);
        }
        return out;
    }

private:
    std::string function(int index) {
        std::string out = rng_.chance(0.5) ? "void" : "double";
        out += " fn" + std::to_string(index) + "(int n, double *a, double *b, double s)\n{\n";
        out += "    int i, j;\n    double t = 0.0, acc;\n    double buf[16];\n";
        const int statements = static_cast<int>(rng_.range(1, 5));
        for (int k = 0; k < statements; ++k) {
            out += statement(2, false);
        }
        if (out.find("double fn") == 0) {
            out += "    return acc;\n";
        }
        return out + "}\n";
    }

    std::string scalar() { return rng_.pick(std::vector<std::string>{"t", "acc", "s", "n", "i", "j"}); }
    std::string array() { return rng_.pick(std::vector<std::string>{"a", "b", "buf"}); }

    std::string primary(int depth) {
        switch (rng_.below(depth > 0 ? 9 : 4)) {
            case 0: return scalar();
            case 1: return std::to_string(rng_.below(100));
            case 2: return array() + "[" + scalar() + "]";
            case 3: return std::to_string(rng_.below(10)) + ".5";
            case 4: return "(" + expr(depth - 1) + ")";
            case 5: return "sqrt(" + expr(depth - 1) + ")";
            case 6: return "-" + primary(depth - 1);
            case 7: return "(double) " + primary(depth - 1);
            default: return array() + "[" + scalar() + " + " + std::to_string(rng_.range(1, 3)) + "]";
        }
    }

    std::string expr(int depth) {
        std::string e = primary(depth);
        const int terms = static_cast<int>(rng_.below(depth > 0 ? 3 : 1));
        for (int k = 0; k < terms; ++k) {
            e += " " + rng_.pick(std::vector<std::string>{"+", "-", "*", "/", "<", "==", "&&", "%", ">="}) + " " +
                 primary(depth - 1);
        }
        if (depth > 1 && rng_.chance(0.1)) {
            e = "(" + e + ") ? " + primary(0) + " : " + primary(0);
        }
        return e;
    }

    std::string assignment() {
        const std::string op = rng_.pick(std::vector<std::string>{"=", "=", "+=", "-=", "*="});
        const std::string target = rng_.chance(0.5) ? scalar() : array() + "[" + scalar() + "]";
        return target + " " + op + " " + expr(2);
    }

    std::string indent(int depth) { return std::string(static_cast<std::size_t>(depth) * 2, ' '); }

    std::string statement(int depth, bool in_loop, bool allow_decl = true) {
        const std::string pad = indent(depth);
        std::uint64_t pick = rng_.below(depth > 5 ? 2 : 9);
        if (pick == 6 && !allow_decl) {
            pick = 0;
        }
        switch (pick) {
            case 0: return pad + assignment() + ";\n";
            case 1: return pad + scalar() + (rng_.chance(0.5) ? "++" : "--") + ";\n";
            case 2:
            case 3: {
                std::string out;
                if (rng_.chance(0.4)) {
                    out += pad + rng_.pick(std::vector<std::string>{
                                     "#pragma omp parallel for", "#pragma omp parallel for private(t)",
                                     "#pragma omp parallel for reduction(+:acc)", "#pragma omp for nowait"}) +
                           "\n";
                }
                const std::string v = rng_.chance(0.5) ? "i" : "j";
                out += pad + "for (" + v + " = 0; " + v + " < n; " + v + (rng_.chance(0.5) ? "++" : " += 2") + ")";
                return out + body(depth, true);
            }
            case 4: {
                std::string out = pad + "if (" + expr(1) + ")" + body(depth, in_loop);
                if (rng_.chance(0.4)) {
                    out += pad + "else" + body(depth, in_loop);
                }
                return out;
            }
            case 5: return pad + "while (" + scalar() + " < n)" + body(depth, in_loop);
            case 6: return pad + "double d" + std::to_string(rng_.below(50)) + " = " + expr(1) + ";\n";
            case 7: return in_loop ? pad + (rng_.chance(0.5) ? "break;\n" : "continue;\n") : pad + ";\n";
            default: return pad + "fn_ext(" + expr(1) + ", " + scalar() + ");\n";
        }
    }

    std::string body(int depth, bool in_loop) {
        if (rng_.chance(0.4)) {
            return "\n" + statement(depth + 1, in_loop, false);
        }
        std::string out = " {\n";
        const int n = static_cast<int>(rng_.below(3));
        for (int k = 0; k < n; ++k) {
            out += statement(depth + 1, in_loop);
        }
        return out + indent(depth) + "}\n";
    }

    Rng& rng_;
};

}  // namespace

std::string random_program(Rng& rng) { return ProgramGen(rng).unit(); }

StraightLine random_straight_line(Rng& rng, int max_statements, int max_vars) {
    const std::vector<std::string> pool = {"a", "b", "c", "d", "e", "f"};
    const int n_vars = static_cast<int>(rng.range(1, std::min<int>(max_vars, 6)));
    std::vector<std::string> vars(pool.begin(), pool.begin() + n_vars);

    StraightLine out;
    std::map<std::string, int> last_def;
    auto add_node = [&](const std::string& name) {
        out.node_names.push_back(name);
        return static_cast<int>(out.node_names.size()) - 1;
    };
    auto use = [&](const std::string& name) {
        const int id = add_node(name);
        if (last_def.count(name)) {
            out.edges.emplace_back(id, last_def[name]);
        }
        return id;
    };

    const int statements = static_cast<int>(rng.range(1, max_statements));
    for (int k = 0; k < statements; ++k) {
        const std::string target = rng.pick(vars);
        const bool is_decl = rng.chance(0.15);
        const bool indexed = !is_decl && rng.chance(0.25);
        const std::string op = is_decl ? "=" : rng.pick(std::vector<std::string>{"=", "=", "+=", "*="});
        const bool has_rhs = !is_decl || rng.chance(0.6);

        // Text order: target, target index, then right-hand side.
        const int def = add_node(target);
        std::string text = (is_decl ? "double " : "") + target;
        int index_node = -1;
        std::string index_name;
        if (indexed) {
            index_name = rng.pick(vars);
            index_node = add_node(index_name);
            text += "[" + index_name + "]";
        }

        std::vector<int> rhs_nodes;
        std::string rhs;
        if (has_rhs) {
            const int terms = static_cast<int>(rng.range(1, 3));
            for (int t = 0; t < terms; ++t) {
                if (t > 0) {
                    rhs += rng.pick(std::vector<std::string>{" + ", " - ", " * "});
                }
                const std::uint64_t kind = rng.below(4);
                if (kind == 0) {
                    rhs += std::to_string(rng.below(10));
                } else if (kind == 1) {
                    const std::string base = rng.pick(vars);
                    const std::string idx = rng.pick(vars);
                    rhs_nodes.push_back(use(base));
                    rhs_nodes.push_back(use(idx));
                    rhs += base + "[" + idx + "]";
                } else {
                    const std::string v = rng.pick(vars);
                    rhs_nodes.push_back(use(v));
                    rhs += v;
                }
            }
            text += " " + op + " " + rhs;
        }
        text += ";\n";
        out.text += text;

        // The index of an array store is a plain use, read after the RHS.
        if (index_node >= 0 && last_def.count(index_name)) {
            out.edges.emplace_back(index_node, last_def[index_name]);
        }
        for (const int r : rhs_nodes) {
            out.edges.emplace_back(def, r);
        }
        if (op != "=" && last_def.count(target)) {
            out.edges.emplace_back(def, last_def[target]);
        }
        last_def[target] = def;
    }
    std::sort(out.edges.begin(), out.edges.end());
    out.edges.erase(std::unique(out.edges.begin(), out.edges.end()), out.edges.end());
    return out;
}

std::string pragma_mismatch(const nlohmann::json& expected, const ompadvisor::OmpPragma& got) {
    std::ostringstream why;
    const std::string want_dir = expected.at("directive");
    if (want_dir != ompadvisor::to_string(got.directive)) {
        why << "directive " << ompadvisor::to_string(got.directive) << " != " << want_dir << "; ";
    }
    const std::string want_arg = expected.value("directive_arg", "");
    if (want_arg != got.directive_arg.value_or("")) {
        why << "directive arg '" << got.directive_arg.value_or("") << "' != '" << want_arg << "'; ";
    }
    const auto& clauses = expected.at("clauses");
    if (clauses.size() != got.clauses.size()) {
        why << got.clauses.size() << " clauses != " << clauses.size() << "; ";
        return why.str();
    }
    for (std::size_t k = 0; k < clauses.size(); ++k) {
        const auto& w = clauses[k];
        const auto& g = got.clauses[k];
        if (w.at("name") != g.name) {
            why << "clause " << k << " name " << g.name << "; ";
        }
        if (w.at("args").get<std::vector<std::string>>() != g.args) {
            why << "clause " << k << " args differ; ";
        }
        const std::string want_op = w.value("op", "");
        if (want_op != g.reduction_op.value_or("")) {
            why << "clause " << k << " op '" << g.reduction_op.value_or("") << "'; ";
        }
        if (w.value("known", true) != g.known) {
            why << "clause " << k << " known flag; ";
        }
    }
    return why.str();
}

const std::vector<ConfusionCase>& confusion_cases() {
    static const std::vector<ConfusionCase> cases = {
        {{3, 1, 1, 5}, 0.75, 0.75, 0.8},
        {{0, 0, 2, 8}, 0.0, 0.0, 0.8},
        {{5, 0, 0, 5}, 1.0, 1.0, 1.0},
        {{0, 0, 0, 7}, 0.0, 0.0, 1.0},
        {{0, 4, 0, 6}, 0.0, 0.0, 0.6},
        {{1, 3, 0, 0}, 0.25, 1.0, 0.25},
        {{2, 0, 6, 2}, 1.0, 0.25, 0.4},
        {{9, 1, 3, 7}, 0.9, 0.75, 0.8},
        {{1, 0, 0, 0}, 1.0, 1.0, 1.0},
        {{0, 5, 5, 0}, 0.0, 0.0, 0.0},
    };
    return cases;
}

std::string mask_violation(const ompadvisor::EncodedInput& in) {
    const auto& m = in.mask;
    const std::size_t L = in.length();
    if (m.size != L || m.values.size() != L * L) {
        return "mask shape";
    }
    const std::size_t code_end = in.n_code + 2;  // CLS, code, SEP
    std::set<std::pair<std::size_t, std::size_t>> edges;
    for (const auto& e : in.dfg_edges) {
        edges.emplace(static_cast<std::size_t>(e.to), static_cast<std::size_t>(e.from));
        edges.emplace(static_cast<std::size_t>(e.from), static_cast<std::size_t>(e.to));
    }
    for (std::size_t i = 0; i < L; ++i) {
        for (std::size_t j = 0; j < L; ++j) {
            const float v = m.at(i, j);
            if (v != 0.0f && v != ompadvisor::kMaskBlocked) {
                return "entry outside {0, blocked}";
            }
            if (v != m.at(j, i)) {
                return "asymmetric at " + std::to_string(i) + "," + std::to_string(j);
            }
            bool open = false;
            if (i < code_end && j < code_end) {
                open = true;
            } else if (i >= code_end && j >= code_end) {
                const std::size_t a = i - code_end;
                const std::size_t b = j - code_end;
                open = a == b || edges.count({a, b});
            } else {
                const std::size_t node = (i >= code_end ? i : j) - code_end;
                const std::size_t other = i >= code_end ? j : i;
                open = other == 0 || other == in.n_code + 1 || other == in.dfg_alignment[node];
            }
            if (open != (v == 0.0f)) {
                return "wrong entry at " + std::to_string(i) + "," + std::to_string(j);
            }
        }
    }
    return "";
}

std::size_t renamed_variable_count(const ompadvisor::Sample& before, const ompadvisor::Sample& after,
                                   std::size_t* variable_count) {
    const std::set<std::string> old_names(before.dfg.names.begin(), before.dfg.names.end());
    const std::set<std::string> new_names(after.dfg.names.begin(), after.dfg.names.end());
    std::size_t renamed = 0;
    for (const auto& n : old_names) {
        renamed += new_names.count(n) == 0 ? 1 : 0;
    }
    if (variable_count != nullptr) {
        *variable_count = old_names.size();
    }
    return renamed;
}

}  // namespace testsupport
