#include "ompadvisor/syntax.hpp"

#include <unordered_map>
#include <unordered_set>

namespace ompadvisor {

namespace {

bool is_type_word(std::string_view s) {
    static const std::unordered_set<std::string_view> set = {
        "void",    "char",    "short",   "int",      "long",     "float",   "double",
        "signed",  "unsigned", "const",  "static",   "extern",   "inline",  "register",
        "volatile", "restrict", "size_t", "int64_t", "int32_t",  "uint64_t", "uint32_t",
        "uint8_t", "int8_t",  "int16_t", "uint16_t", "ssize_t",  "bool",
    };
    return set.count(s) > 0;
}

int binary_precedence(std::string_view op) {
    static const std::unordered_map<std::string_view, int> table = {
        {"||", 4}, {"&&", 5}, {"|", 6},  {"^", 7},  {"&", 8},  {"==", 9}, {"!=", 9},
        {"<", 10}, {">", 10}, {"<=", 10}, {">=", 10}, {"<<", 11}, {">>", 11}, {"+", 12},
        {"-", 12}, {"*", 13}, {"/", 13}, {"%", 13},
    };
    const auto it = table.find(op);
    return it == table.end() ? -1 : it->second;
}

bool is_assign_op(std::string_view op) {
    return op == "=" || op == "+=" || op == "-=" || op == "*=" || op == "/=" || op == "%=" ||
           op == "&=" || op == "|=" || op == "^=" || op == "<<=" || op == ">>=";
}

class Parser {
public:
    explicit Parser(const std::vector<Token>& tokens) : toks_(tokens) {}

    AstNode translation_unit() {
        AstNode unit = make(AstKind::TranslationUnit, 0);
        while (!at_end()) {
            if (check(";")) {
                ++pos_;
                continue;
            }
            if (cur().kind == TokenKind::pragma_line) {
                unit.children.push_back(pragma());
                if (!unit.children.back().standalone &&
                    (at_end() || cur().kind == TokenKind::pragma_line)) {
                    throw error("declaration after pragma");
                }
                continue;
            }
            unit.children.push_back(external_declaration());
        }
        return finish(std::move(unit), 0);
    }

    AstNode snippet() {
        AstNode unit = make(AstKind::TranslationUnit, 0);
        block_items(unit, /*braced=*/false);
        return finish(std::move(unit), 0);
    }

private:
    // -- token helpers --------------------------------------------------

    bool at_end() const { return pos_ >= toks_.size(); }

    const Token& cur() const { return toks_[pos_]; }

    bool check(std::string_view lexeme) const {
        return !at_end() && cur().kind != TokenKind::pragma_line && cur().kind != TokenKind::string_literal &&
               cur().lexeme == lexeme;
    }

    bool check_at(std::size_t k, std::string_view lexeme) const {
        return pos_ + k < toks_.size() && toks_[pos_ + k].lexeme == lexeme &&
               toks_[pos_ + k].kind != TokenKind::string_literal;
    }

    bool match(std::string_view lexeme) {
        if (check(lexeme)) {
            ++pos_;
            return true;
        }
        return false;
    }

    SyntaxError error(const std::string& expected) const {
        if (at_end()) {
            const int line = toks_.empty() ? 1 : toks_.back().line;
            const int col = toks_.empty() ? 1 : toks_.back().col + static_cast<int>(toks_.back().lexeme.size());
            return SyntaxError(line, col, expected + " before end of input");
        }
        return SyntaxError(cur().line, cur().col, expected + " (found '" + cur().lexeme + "')");
    }

    void expect(std::string_view lexeme) {
        if (!match(lexeme)) {
            throw error("'" + std::string(lexeme) + "'");
        }
    }

    std::string expect_identifier() {
        if (at_end() || cur().kind != TokenKind::identifier) {
            throw error("identifier");
        }
        return toks_[pos_++].lexeme;
    }

    bool type_start() const {
        return !at_end() && cur().kind == TokenKind::keyword && is_type_word(cur().lexeme);
    }

    bool type_start_at(std::size_t k) const {
        return pos_ + k < toks_.size() && toks_[pos_ + k].kind == TokenKind::keyword &&
               is_type_word(toks_[pos_ + k].lexeme);
    }

    AstNode make(AstKind kind, std::size_t first) const {
        AstNode node;
        node.kind = kind;
        node.span.first = first;
        return node;
    }

    AstNode finish(AstNode node, std::size_t first) const {
        node.span.first = first;
        node.span.last = pos_ == 0 ? 0 : pos_ - 1;
        if (pos_ == first) {
            node.span = TokenSpan{};  // owns no token
        }
        return node;
    }

    // -- declarations ---------------------------------------------------

    std::string type_specifier() {
        std::string type;
        while (type_start()) {
            if (!type.empty()) {
                type.push_back(' ');
            }
            type += toks_[pos_++].lexeme;
        }
        if (type.empty()) {
            throw error("type specifier");
        }
        return type;
    }

    int pointer_stars() {
        int depth = 0;
        while (match("*")) {
            ++depth;
        }
        return depth;
    }

    AstNode external_declaration() {
        const std::size_t first = pos_;
        if (check("struct") || check("typedef") || check("union") || check("enum")) {
            throw error("supported declaration (struct/typedef/union/enum are outside the C subset)");
        }
        std::string type = type_specifier();
        const std::size_t after_type = pos_;
        const int depth = pointer_stars();
        if (!at_end() && cur().kind == TokenKind::identifier && check_at(1, "(")) {
            AstNode fn = make(AstKind::FunctionDef, first);
            fn.type_name = std::move(type);
            fn.pointer_depth = depth;
            fn.value = expect_identifier();
            parameters(fn);
            if (check("{")) {
                fn.children.push_back(compound());
            } else {
                const std::size_t semi = pos_;
                expect(";");
                fn.children.push_back(finish(make(AstKind::Empty, semi), semi));
            }
            return finish(std::move(fn), first);
        }
        pos_ = after_type;
        AstNode decl = declaration_rest(std::move(type), first);
        expect(";");
        return finish(std::move(decl), first);
    }

    void parameters(AstNode& fn) {
        expect("(");
        if (match(")")) {
            return;
        }
        if (check("void") && check_at(1, ")")) {
            pos_ += 2;
            return;
        }
        do {
            const std::size_t first = pos_;
            AstNode param = make(AstKind::Declaration, first);
            param.type_name = type_specifier();
            const std::size_t dfirst = pos_;
            AstNode d = make(AstKind::Declarator, dfirst);
            d.pointer_depth = pointer_stars();
            if (!at_end() && cur().kind == TokenKind::identifier) {
                d.value = toks_[pos_++].lexeme;
            }
            array_dims(d);
            param.children.push_back(finish(std::move(d), dfirst));
            fn.children.push_back(finish(std::move(param), first));
        } while (match(","));
        expect(")");
    }

    void array_dims(AstNode& d) {
        while (check("[")) {
            const std::size_t open = pos_;
            ++pos_;
            if (check("]")) {
                d.children.push_back(make(AstKind::Empty, open));
                d.children.back().span = TokenSpan{};
            } else {
                d.children.push_back(assignment());
            }
            expect("]");
            ++d.dims;
        }
    }

    AstNode declaration_rest(std::string type, std::size_t first) {
        AstNode decl = make(AstKind::Declaration, first);
        decl.type_name = std::move(type);
        do {
            const std::size_t dfirst = pos_;
            AstNode d = make(AstKind::Declarator, dfirst);
            d.pointer_depth = pointer_stars();
            d.value = expect_identifier();
            array_dims(d);
            if (match("=")) {
                d.children.push_back(initializer());
            }
            decl.children.push_back(finish(std::move(d), dfirst));
        } while (match(","));
        return finish(std::move(decl), first);
    }

    AstNode initializer() {
        if (!check("{")) {
            return assignment();
        }
        const std::size_t first = pos_;
        AstNode list = make(AstKind::InitList, first);
        expect("{");
        while (!check("}")) {
            list.children.push_back(initializer());
            if (!match(",")) {
                break;
            }
        }
        expect("}");
        return finish(std::move(list), first);
    }

    AstNode declaration_statement() {
        const std::size_t first = pos_;
        std::string type = type_specifier();
        AstNode decl = declaration_rest(std::move(type), first);
        expect(";");
        return finish(std::move(decl), first);
    }

    // -- statements -----------------------------------------------------

    AstNode pragma() {
        const std::size_t first = pos_;
        AstNode node = make(AstKind::PragmaDirective, first);
        node.value = toks_[pos_++].lexeme;
        node.standalone = is_standalone_directive(node.value);
        return finish(std::move(node), first);
    }

    // Items of a block or snippet. A non-standalone pragma must be followed by a statement.
    void block_items(AstNode& parent, bool braced) {
        auto done = [&] { return at_end() || (braced && check("}")); };
        while (!done()) {
            if (cur().kind == TokenKind::pragma_line) {
                parent.children.push_back(pragma());
                if (!parent.children.back().standalone) {
                    if (done()) {
                        throw error("statement after pragma");
                    }
                    if (cur().kind == TokenKind::pragma_line) {
                        parent.children.push_back(body_statement());
                    }
                }
                continue;
            }
            if (type_start()) {
                parent.children.push_back(declaration_statement());
                continue;
            }
            parent.children.push_back(statement());
        }
    }

    AstNode compound() {
        const std::size_t first = pos_;
        AstNode block = make(AstKind::CompoundStmt, first);
        expect("{");
        block_items(block, /*braced=*/true);
        expect("}");
        return finish(std::move(block), first);
    }

    // Statement in a body position (for/while/if). A pragma here annotates the
    // statement that follows it, so both are wrapped in a synthetic block.
    AstNode body_statement() {
        if (!at_end() && cur().kind == TokenKind::pragma_line) {
            const std::size_t first = pos_;
            AstNode block = make(AstKind::CompoundStmt, first);
            block.children.push_back(pragma());
            if (!block.children.back().standalone) {
                if (at_end() || check("}")) {
                    throw error("statement after pragma");
                }
                block.children.push_back(type_start() ? declaration_statement() : body_statement());
            }
            return finish(std::move(block), first);
        }
        if (type_start()) {
            throw error("statement (declaration not allowed as a body)");
        }
        return statement();
    }

    AstNode statement() {
        if (at_end()) {
            throw error("statement");
        }
        const std::size_t first = pos_;
        if (check("{")) {
            return compound();
        }
        if (match(";")) {
            return finish(make(AstKind::Empty, first), first);
        }
        if (match("for")) {
            AstNode loop = make(AstKind::ForStmt, first);
            expect("(");
            if (type_start()) {
                const std::size_t dfirst = pos_;
                std::string type = type_specifier();
                loop.children.push_back(declaration_rest(std::move(type), dfirst));
                expect(";");
            } else {
                loop.children.push_back(optional_expression(";"));
                expect(";");
            }
            loop.children.push_back(optional_expression(";"));
            expect(";");
            loop.children.push_back(optional_expression(")"));
            expect(")");
            loop.children.push_back(body_statement());
            return finish(std::move(loop), first);
        }
        if (match("while")) {
            AstNode loop = make(AstKind::WhileStmt, first);
            expect("(");
            loop.children.push_back(expression());
            expect(")");
            loop.children.push_back(body_statement());
            return finish(std::move(loop), first);
        }
        if (match("if")) {
            AstNode branch = make(AstKind::IfStmt, first);
            expect("(");
            branch.children.push_back(expression());
            expect(")");
            branch.children.push_back(body_statement());
            if (match("else")) {
                branch.children.push_back(body_statement());
            }
            return finish(std::move(branch), first);
        }
        if (match("return")) {
            AstNode ret = make(AstKind::ReturnStmt, first);
            if (!check(";")) {
                ret.children.push_back(expression());
            }
            expect(";");
            return finish(std::move(ret), first);
        }
        if (match("break")) {
            expect(";");
            return finish(make(AstKind::BreakStmt, first), first);
        }
        if (match("continue")) {
            expect(";");
            return finish(make(AstKind::ContinueStmt, first), first);
        }
        if (cur().kind == TokenKind::keyword && !is_type_word(cur().lexeme) && cur().lexeme != "sizeof") {
            throw error("statement ('" + cur().lexeme + "' is outside the C subset)");
        }
        AstNode stmt = make(AstKind::ExprStmt, first);
        stmt.children.push_back(expression());
        expect(";");
        return finish(std::move(stmt), first);
    }

    AstNode optional_expression(std::string_view terminator) {
        if (check(terminator)) {
            AstNode empty = make(AstKind::Empty, pos_);
            empty.span = TokenSpan{};
            return empty;
        }
        return expression();
    }

    // -- expressions ----------------------------------------------------

    AstNode expression() {
        const std::size_t first = pos_;
        AstNode left = assignment();
        while (check(",")) {
            ++pos_;
            AstNode node = make(AstKind::BinaryOp, first);
            node.value = ",";
            node.children.push_back(std::move(left));
            node.children.push_back(assignment());
            left = finish(std::move(node), first);
        }
        return left;
    }

    AstNode assignment() {
        const std::size_t first = pos_;
        AstNode lhs = conditional();
        if (!at_end() && cur().kind == TokenKind::op && is_assign_op(cur().lexeme)) {
            AstNode node = make(AstKind::Assign, first);
            node.value = toks_[pos_++].lexeme;
            node.children.push_back(std::move(lhs));
            node.children.push_back(assignment());
            return finish(std::move(node), first);
        }
        return lhs;
    }

    AstNode conditional() {
        const std::size_t first = pos_;
        AstNode cond = binary(4);
        if (match("?")) {
            AstNode node = make(AstKind::Conditional, first);
            node.children.push_back(std::move(cond));
            node.children.push_back(expression());
            expect(":");
            node.children.push_back(conditional());
            return finish(std::move(node), first);
        }
        return cond;
    }

    AstNode binary(int min_prec) {
        const std::size_t first = pos_;
        AstNode left = unary();
        while (!at_end() && cur().kind == TokenKind::op) {
            const int prec = binary_precedence(cur().lexeme);
            if (prec < min_prec) {
                break;
            }
            AstNode node = make(AstKind::BinaryOp, first);
            node.value = toks_[pos_++].lexeme;
            node.children.push_back(std::move(left));
            node.children.push_back(binary(prec + 1));
            left = finish(std::move(node), first);
        }
        return left;
    }

    AstNode unary() {
        if (at_end()) {
            throw error("expression");
        }
        const std::size_t first = pos_;
        static const std::unordered_set<std::string_view> prefix = {"++", "--", "-", "+", "!", "~", "*", "&"};
        if (cur().kind == TokenKind::op && prefix.count(cur().lexeme)) {
            AstNode node = make(AstKind::UnaryOp, first);
            node.value = toks_[pos_++].lexeme;
            node.children.push_back(unary());
            return finish(std::move(node), first);
        }
        if (match("sizeof")) {
            AstNode node = make(AstKind::UnaryOp, first);
            node.value = "sizeof";
            if (check("(") && type_start_at(1)) {
                ++pos_;
                node.type_name = type_specifier();
                node.pointer_depth = pointer_stars();
                expect(")");
            } else {
                node.children.push_back(unary());
            }
            return finish(std::move(node), first);
        }
        if (check("(") && type_start_at(1)) {
            ++pos_;
            AstNode node = make(AstKind::Cast, first);
            node.type_name = type_specifier();
            node.pointer_depth = pointer_stars();
            expect(")");
            node.children.push_back(unary());
            return finish(std::move(node), first);
        }
        return postfix();
    }

    AstNode postfix() {
        const std::size_t first = pos_;
        AstNode base = primary();
        while (!at_end()) {
            if (match("[")) {
                AstNode node = make(AstKind::ArrayIndex, first);
                node.children.push_back(std::move(base));
                node.children.push_back(expression());
                expect("]");
                base = finish(std::move(node), first);
            } else if (check("(")) {
                if (base.kind != AstKind::Identifier) {
                    throw error("function name before call");
                }
                ++pos_;
                AstNode node = make(AstKind::Call, first);
                node.children.push_back(std::move(base));
                if (!check(")")) {
                    do {
                        node.children.push_back(assignment());
                    } while (match(","));
                }
                expect(")");
                base = finish(std::move(node), first);
            } else if (check("++") || check("--")) {
                AstNode node = make(AstKind::UnaryOp, first);
                node.value = toks_[pos_++].lexeme;
                node.postfix = true;
                node.children.push_back(std::move(base));
                base = finish(std::move(node), first);
            } else {
                break;
            }
        }
        return base;
    }

    AstNode primary() {
        if (at_end()) {
            throw error("expression");
        }
        const std::size_t first = pos_;
        const Token& t = cur();
        switch (t.kind) {
            case TokenKind::identifier: {
                AstNode node = make(AstKind::Identifier, first);
                node.value = t.lexeme;
                ++pos_;
                return finish(std::move(node), first);
            }
            case TokenKind::number:
            case TokenKind::char_literal: {
                AstNode node = make(AstKind::Constant, first);
                node.value = t.lexeme;
                ++pos_;
                return finish(std::move(node), first);
            }
            case TokenKind::string_literal: {
                AstNode node = make(AstKind::Constant, first);
                node.value = t.lexeme;
                ++pos_;
                while (!at_end() && cur().kind == TokenKind::string_literal) {
                    node.value += " " + cur().lexeme;
                    ++pos_;
                }
                return finish(std::move(node), first);
            }
            default:
                break;
        }
        if (match("(")) {
            AstNode inner = expression();
            expect(")");
            return inner;
        }
        throw error("expression");
    }

    const std::vector<Token>& toks_;
    std::size_t pos_ = 0;
};

}  // namespace

const char* to_string(AstKind kind) {
    switch (kind) {
        case AstKind::TranslationUnit: return "TranslationUnit";
        case AstKind::FunctionDef: return "FunctionDef";
        case AstKind::Declaration: return "Declaration";
        case AstKind::Declarator: return "Declarator";
        case AstKind::CompoundStmt: return "CompoundStmt";
        case AstKind::ForStmt: return "ForStmt";
        case AstKind::WhileStmt: return "WhileStmt";
        case AstKind::IfStmt: return "IfStmt";
        case AstKind::ExprStmt: return "ExprStmt";
        case AstKind::ReturnStmt: return "ReturnStmt";
        case AstKind::BreakStmt: return "BreakStmt";
        case AstKind::ContinueStmt: return "ContinueStmt";
        case AstKind::Empty: return "Empty";
        case AstKind::Assign: return "Assign";
        case AstKind::BinaryOp: return "BinaryOp";
        case AstKind::UnaryOp: return "UnaryOp";
        case AstKind::Conditional: return "Conditional";
        case AstKind::Cast: return "Cast";
        case AstKind::Call: return "Call";
        case AstKind::ArrayIndex: return "ArrayIndex";
        case AstKind::Identifier: return "Identifier";
        case AstKind::Constant: return "Constant";
        case AstKind::InitList: return "InitList";
        case AstKind::PragmaDirective: return "PragmaDirective";
    }
    return "?";
}

ParsedSource parse_source(std::string_view source) {
    ParsedSource out;
    out.tokens = lex(source);
    out.unit = Parser(out.tokens).translation_unit();
    return out;
}

ParsedSource parse_snippet(std::string_view source) {
    ParsedSource out;
    out.tokens = lex(source);
    out.unit = Parser(out.tokens).snippet();
    return out;
}

}  // namespace ompadvisor
