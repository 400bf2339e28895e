#pragma once

// Data-flow graph over variable occurrences: an edge (to, from) records that
// the value at occurrence `to` comes from occurrence `from`.

#include <compare>
#include <cstddef>
#include <string>
#include <vector>

#include "ompadvisor/syntax.hpp"

namespace ompadvisor {

enum class Occurrence { def, use };

struct DfgNode {
    int node_id = 0;
    std::string var_name;
    std::size_t code_token_index = 0;
    Occurrence occurrence = Occurrence::use;

    bool operator==(const DfgNode&) const = default;
};

struct DfgEdge {
    int to = 0;
    int from = 0;

    auto operator<=>(const DfgEdge&) const = default;
};

struct DataFlowGraph {
    std::vector<DfgNode> nodes;
    std::vector<DfgEdge> edges;  // sorted by (to, from)

    bool operator==(const DataFlowGraph&) const = default;
};

// Identifier occurrences in variable position (callees and type names are
// excluded), numbered in token order.
std::vector<DfgNode> variable_nodes(const AstNode& unit);

// Reaching-definitions construction:
//  - `x = e` makes x a def fed by every variable use in e; `x op= e` and
//    `x++` also draw from the definitions of x that reach them;
//  - a use draws from all reaching definitions (union over if/else arms);
//  - loops run twice, the second time with the body's exported definitions
//    merged into the entry state, which adds the back edges;
//  - `a[i] = e` defines the whole of `a`; `i` stays an ordinary use;
//  - declarations without initializer are defs with no incoming edges.
DataFlowGraph build_dfg(const AstNode& unit, const std::vector<Token>& tokens);

struct SerializedDfg {
    std::vector<std::string> names;
    std::vector<std::size_t> alignment;
    std::vector<DfgEdge> edges;

    bool operator==(const SerializedDfg&) const = default;
};

SerializedDfg serialize_dfg(const DataFlowGraph& graph);

// Inverse of serialize_dfg; occurrence kinds are not part of the serialized
// form and come back as `use`.
DataFlowGraph deserialize_dfg(const SerializedDfg& serialized);

}  // namespace ompadvisor
