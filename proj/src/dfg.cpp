#include "ompadvisor/dfg.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace ompadvisor {

namespace {

using State = std::map<std::string, std::set<int>>;

State merge(const State& a, const State& b) {
    State out = a;
    for (const auto& [name, defs] : b) {
        out[name].insert(defs.begin(), defs.end());
    }
    return out;
}

std::size_t declarator_name_token(const AstNode& d) {
    return d.span.first + static_cast<std::size_t>(d.pointer_depth);
}

// Base variable of an lvalue such as x, a[i][j], *p, or nullptr.
const AstNode* lvalue_base(const AstNode& e) {
    switch (e.kind) {
        case AstKind::Identifier: return &e;
        case AstKind::ArrayIndex: return lvalue_base(e.children[0]);
        case AstKind::UnaryOp:
            if (e.value == "*" && !e.postfix) {
                return lvalue_base(e.children[0]);
            }
            return nullptr;
        default: return nullptr;
    }
}

void collect_nodes(const AstNode& node, std::vector<DfgNode>& out) {
    switch (node.kind) {
        case AstKind::Identifier:
            out.push_back(DfgNode{0, node.value, node.span.first, Occurrence::use});
            return;
        case AstKind::Declarator:
            if (!node.value.empty()) {
                out.push_back(DfgNode{0, node.value, declarator_name_token(node), Occurrence::def});
            }
            for (const auto& child : node.children) {
                collect_nodes(child, out);
            }
            return;
        case AstKind::Call:
            for (std::size_t i = 1; i < node.children.size(); ++i) {
                collect_nodes(node.children[i], out);
            }
            return;
        default:
            break;
    }
    for (const auto& child : node.children) {
        collect_nodes(child, out);
    }
    // Mark defining occurrences.
    const AstNode* target = nullptr;
    if (node.kind == AstKind::Assign) {
        target = lvalue_base(node.children[0]);
    } else if (node.kind == AstKind::UnaryOp && (node.value == "++" || node.value == "--")) {
        target = lvalue_base(node.children[0]);
    }
    if (target != nullptr) {
        for (auto it = out.rbegin(); it != out.rend(); ++it) {
            if (it->code_token_index == target->span.first) {
                it->occurrence = Occurrence::def;
                break;
            }
        }
    }
}

class Analyzer {
public:
    explicit Analyzer(const std::vector<DfgNode>& nodes) {
        for (const auto& n : nodes) {
            id_of_token_[n.code_token_index] = n.node_id;
        }
    }

    std::vector<DfgEdge> edges() const {
        return std::vector<DfgEdge>(edges_.begin(), edges_.end());
    }

    void unit(const AstNode& tu) {
        State globals;
        for (const auto& item : tu.children) {
            if (item.kind == AstKind::FunctionDef) {
                State st = globals;
                function(item, st);
            } else {
                statement(item, globals);
            }
        }
    }

private:
    int node_at(std::size_t token) const {
        const auto it = id_of_token_.find(token);
        if (it == id_of_token_.end()) {
            throw std::logic_error("no DFG node for token " + std::to_string(token));
        }
        return it->second;
    }

    void connect(int to, const std::set<int>& from) {
        for (int f : from) {
            if (f != to) {
                edges_.insert(DfgEdge{to, f});
            }
        }
    }

    void function(const AstNode& fn, State& st) {
        for (std::size_t i = 0; i + 1 < fn.children.size(); ++i) {
            statement(fn.children[i], st);
        }
        statement(fn.children.back(), st);
    }

    void declaration(const AstNode& decl, State& st) {
        for (const auto& d : decl.children) {
            std::set<int> sources;
            for (int k = 0; k < d.dims; ++k) {
                eval(d.children[static_cast<std::size_t>(k)], st);
            }
            if (d.children.size() > static_cast<std::size_t>(d.dims)) {
                sources = eval(d.children.back(), st);
            }
            if (d.value.empty()) {
                continue;
            }
            const int id = node_at(declarator_name_token(d));
            connect(id, sources);
            st[d.value] = {id};
        }
    }

    // Evaluates the index/pointer sub-expressions of an lvalue as uses.
    void lvalue_operands(const AstNode& e, State& st) {
        if (e.kind == AstKind::ArrayIndex) {
            lvalue_operands(e.children[0], st);
            eval(e.children[1], st);
        } else if (e.kind == AstKind::UnaryOp) {
            lvalue_operands(e.children[0], st);
        }
    }

    std::set<int> define(const AstNode& target, const std::set<int>& sources, bool reads_prior, State& st) {
        const AstNode* base = lvalue_base(target);
        if (base == nullptr) {
            std::set<int> used = eval(target, st);
            return used;
        }
        lvalue_operands(target, st);
        const int id = node_at(base->span.first);
        connect(id, sources);
        if (reads_prior) {
            connect(id, st[base->value]);
        }
        st[base->value] = {id};
        return {id};
    }

    std::set<int> eval(const AstNode& e, State& st) {
        switch (e.kind) {
            case AstKind::Identifier: {
                const int id = node_at(e.span.first);
                connect(id, st[e.value]);
                return {id};
            }
            case AstKind::Constant:
            case AstKind::Empty:
                return {};
            case AstKind::Assign: {
                const std::set<int> sources = eval(e.children[1], st);
                return define(e.children[0], sources, e.value != "=", st);
            }
            case AstKind::UnaryOp:
                if (e.value == "++" || e.value == "--") {
                    return define(e.children[0], {}, true, st);
                }
                if (e.children.empty()) {
                    return {};
                }
                return eval(e.children[0], st);
            case AstKind::BinaryOp:
                if (e.value == ",") {
                    eval(e.children[0], st);
                    return eval(e.children[1], st);
                }
                break;
            case AstKind::Conditional: {
                std::set<int> out = eval(e.children[0], st);
                State other = st;
                std::set<int> a = eval(e.children[1], st);
                std::set<int> b = eval(e.children[2], other);
                st = merge(st, other);
                out.insert(a.begin(), a.end());
                out.insert(b.begin(), b.end());
                return out;
            }
            case AstKind::Call: {
                std::set<int> out;
                for (std::size_t i = 1; i < e.children.size(); ++i) {
                    std::set<int> s = eval(e.children[i], st);
                    out.insert(s.begin(), s.end());
                }
                return out;
            }
            default:
                break;
        }
        std::set<int> out;
        for (const auto& child : e.children) {
            std::set<int> s = eval(child, st);
            out.insert(s.begin(), s.end());
        }
        return out;
    }

    // One trip through a loop: condition, body, then the increment.
    void loop_pass(const AstNode* cond, const AstNode& body, const AstNode* inc, State& st) {
        if (cond != nullptr) {
            eval(*cond, st);
        }
        statement(body, st);
        if (inc != nullptr) {
            eval(*inc, st);
        }
    }

    void loop(const AstNode* cond, const AstNode& body, const AstNode* inc, State& st) {
        State first = st;
        loop_pass(cond, body, inc, first);
        const State entry = merge(st, first);
        State second = entry;
        loop_pass(cond, body, inc, second);
        st = merge(entry, second);
    }

    void statement(const AstNode& s, State& st) {
        switch (s.kind) {
            case AstKind::Declaration:
                declaration(s, st);
                break;
            case AstKind::CompoundStmt:
            case AstKind::TranslationUnit:
                for (const auto& child : s.children) {
                    statement(child, st);
                }
                break;
            case AstKind::ExprStmt:
            case AstKind::ReturnStmt:
                for (const auto& child : s.children) {
                    eval(child, st);
                }
                break;
            case AstKind::IfStmt: {
                eval(s.children[0], st);
                State other = st;
                statement(s.children[1], st);
                if (s.children.size() > 2) {
                    statement(s.children[2], other);
                }
                st = merge(st, other);
                break;
            }
            case AstKind::WhileStmt:
                loop(&s.children[0], s.children[1], nullptr, st);
                break;
            case AstKind::ForStmt: {
                const AstNode& init = s.children[0];
                if (init.kind == AstKind::Declaration) {
                    declaration(init, st);
                } else {
                    eval(init, st);
                }
                loop(&s.children[1], s.children[3], &s.children[2], st);
                break;
            }
            case AstKind::FunctionDef:
                function(s, st);
                break;
            default:
                break;  // pragmas, break/continue, empty statements
        }
    }

    std::unordered_map<std::size_t, int> id_of_token_;
    std::set<DfgEdge> edges_;
};

}  // namespace

std::vector<DfgNode> variable_nodes(const AstNode& unit) {
    std::vector<DfgNode> nodes;
    collect_nodes(unit, nodes);
    std::sort(nodes.begin(), nodes.end(),
              [](const DfgNode& a, const DfgNode& b) { return a.code_token_index < b.code_token_index; });
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        nodes[i].node_id = static_cast<int>(i);
    }
    return nodes;
}

DataFlowGraph build_dfg(const AstNode& unit, const std::vector<Token>& tokens) {
    DataFlowGraph graph;
    graph.nodes = variable_nodes(unit);
    for (const auto& n : graph.nodes) {
        if (n.code_token_index >= tokens.size() || tokens[n.code_token_index].lexeme != n.var_name) {
            throw std::logic_error("DFG node '" + n.var_name + "' is not aligned with its token");
        }
    }
    Analyzer analyzer(graph.nodes);
    analyzer.unit(unit);
    graph.edges = analyzer.edges();
    return graph;
}

SerializedDfg serialize_dfg(const DataFlowGraph& graph) {
    SerializedDfg out;
    out.names.reserve(graph.nodes.size());
    out.alignment.reserve(graph.nodes.size());
    for (const auto& n : graph.nodes) {
        out.names.push_back(n.var_name);
        out.alignment.push_back(n.code_token_index);
    }
    out.edges = graph.edges;
    return out;
}

DataFlowGraph deserialize_dfg(const SerializedDfg& serialized) {
    DataFlowGraph graph;
    for (std::size_t i = 0; i < serialized.names.size(); ++i) {
        graph.nodes.push_back(
            DfgNode{static_cast<int>(i), serialized.names[i], serialized.alignment[i], Occurrence::use});
    }
    graph.edges = serialized.edges;
    return graph;
}

}  // namespace ompadvisor
