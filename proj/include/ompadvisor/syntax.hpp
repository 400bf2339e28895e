#pragma once

// Lexer, parser and canonical renderer for the C subset used by loop
// kernels, plus the OpenMP pragma parser.

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ompadvisor {

enum class TokenKind {
    identifier,
    keyword,
    number,
    string_literal,
    char_literal,
    op,
    punctuation,
    pragma_line,
};

const char* to_string(TokenKind kind);

struct Token {
    TokenKind kind = TokenKind::identifier;
    std::string lexeme;
    int line = 1;
    int col = 1;
    std::size_t offset = 0;  // byte offset of the first character in the input
};

class SyntaxError : public std::runtime_error {
public:
    SyntaxError(int line, int col, std::string expected);

    int line() const { return line_; }
    int col() const { return col_; }
    const std::string& expected() const { return expected_; }

private:
    int line_;
    int col_;
    std::string expected_;
};

class PragmaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::vector<Token> lex(std::string_view source);

enum class AstKind {
    TranslationUnit,
    FunctionDef,
    Declaration,
    Declarator,
    CompoundStmt,
    ForStmt,
    WhileStmt,
    IfStmt,
    ExprStmt,
    ReturnStmt,
    BreakStmt,
    ContinueStmt,
    Empty,
    Assign,
    BinaryOp,
    UnaryOp,
    Conditional,
    Cast,
    Call,
    ArrayIndex,
    Identifier,
    Constant,
    InitList,
    PragmaDirective,
};

const char* to_string(AstKind kind);

struct TokenSpan {
    // Inclusive token index range; first > last marks a node that owns no token.
    std::size_t first = 1;
    std::size_t last = 0;

    bool empty() const { return first > last; }
};

// Kind-specific payload:
//   FunctionDef  value=name, type_name=return type, pointer_depth; children =
//                parameter Declarations followed by the body (CompoundStmt or Empty)
//   Declaration  type_name; children = Declarators
//   Declarator   value=name, pointer_depth, dims array extents, then optional initializer
//   Assign       value=operator ("=", "+=", ...); children = target, source
//   BinaryOp     value=operator; children = lhs, rhs
//   UnaryOp      value=operator, postfix for x++/x--; sizeof(type) keeps the type in type_name
//   Cast         type_name (including '*'s); child = operand
//   Call         children = callee Identifier, arguments...
//   Identifier   value=name
//   Constant     value=lexeme
//   PragmaDirective value=whitespace-normalized pragma text, standalone for barrier & co.
struct AstNode {
    AstKind kind = AstKind::Empty;
    std::string value;
    std::string type_name;
    int pointer_depth = 0;
    int dims = 0;
    bool postfix = false;
    bool standalone = false;
    std::vector<AstNode> children;
    TokenSpan span;
};

struct ParsedSource {
    AstNode unit;
    std::vector<Token> tokens;
};

// Whole-file parse: functions, global declarations and pragmas.
ParsedSource parse_source(std::string_view source);

// Statement-list parse used for extracted loops and their context. The result
// is a TranslationUnit whose children are statements.
ParsedSource parse_snippet(std::string_view source);

// Canonical source text: single spaces, one statement per line, braces always.
std::string render(const AstNode& node);

// Structural equality ignoring token spans. A control-flow body that is a
// CompoundStmt holding exactly one statement compares equal to that statement,
// and an Empty body equals an empty CompoundStmt, since render() always braces.
bool structurally_equal(const AstNode& a, const AstNode& b);

std::string ast_dump(const AstNode& node);

template <class Fn>
void walk(const AstNode& node, Fn&& fn) {
    fn(node);
    for (const auto& child : node.children) {
        walk(child, fn);
    }
}

// OpenMP directives -------------------------------------------------------

enum class OmpDirective { parallel_for, for_, parallel, barrier, critical, atomic, other };

const char* to_string(OmpDirective directive);

struct OmpClause {
    std::string name;
    std::vector<std::string> args;
    std::optional<std::string> reduction_op;
    bool known = true;  // false for clauses outside the recognized set ("other")

    bool operator==(const OmpClause&) const = default;
};

struct OmpPragma {
    OmpDirective directive = OmpDirective::other;
    std::vector<std::string> directive_words;  // e.g. {"parallel", "for"}
    std::optional<std::string> directive_arg;   // critical(name), flush(list)
    std::vector<OmpClause> clauses;
    std::string raw;

    bool has_clause(std::string_view name) const;
    const OmpClause* find_clause(std::string_view name) const;
};

OmpPragma parse_omp_pragma(std::string_view raw);

// Whitespace-collapsed pragma text, "#pragma omp ..." with no trailing space.
std::string normalize_pragma_text(std::string_view raw);

// Directives that do not annotate a following statement.
bool is_standalone_directive(std::string_view pragma_text);

}  // namespace ompadvisor
