#include "ompadvisor/syntax.hpp"

#include <array>
#include <cctype>
#include <unordered_set>

namespace ompadvisor {

namespace {

const std::unordered_set<std::string_view>& keywords() {
    static const std::unordered_set<std::string_view> set = {
        "void",   "char",   "short",    "int",      "long",   "float",  "double",   "signed",
        "unsigned", "const", "static",  "extern",   "inline", "register", "volatile", "restrict",
        "if",     "else",   "for",      "while",    "do",     "return", "break",    "continue",
        "sizeof", "struct", "typedef",  "switch",   "case",   "default", "goto",    "union",
        "enum",   "size_t", "int64_t",  "int32_t",  "uint64_t", "uint32_t", "uint8_t", "int8_t",
        "int16_t", "uint16_t", "ssize_t", "bool",
    };
    return set;
}

// Longest match first.
constexpr std::array<std::string_view, 45> kOperators = {
    "<<=", ">>=", "...", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||",
    "+=",  "-=",  "*=",  "/=", "%=", "&=", "^=", "|=", "+",  "-",  "*",  "/",  "%",  "<",
    ">",   "=",   "!",   "~",  "&",  "|",  "^",  "?",  ":",  ".",  "(",  ")",  "[",  "]",
    "{",   "}",   ";",
};

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    std::vector<Token> run() {
        while (pos_ < src_.size()) {
            const char c = src_[pos_];
            if (c == '\n') {
                advance();
                at_line_start_ = true;
                continue;
            }
            if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
                continue;
            }
            if (c == '\\' && peek(1) == '\n') {
                advance();
                advance();
                continue;
            }
            if (c == '/' && peek(1) == '/') {
                while (pos_ < src_.size() && src_[pos_] != '\n') {
                    advance();
                }
                continue;
            }
            if (c == '/' && peek(1) == '*') {
                skip_block_comment();
                continue;
            }
            if (c == '#' && at_line_start_) {
                directive_line();
                continue;
            }
            at_line_start_ = false;
            if (is_ident_start(c)) {
                word();
            } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                       (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
                number();
            } else if (c == '"') {
                quoted('"', TokenKind::string_literal);
            } else if (c == '\'') {
                quoted('\'', TokenKind::char_literal);
            } else {
                symbol();
            }
        }
        return std::move(tokens_);
    }

private:
    char peek(std::size_t ahead) const {
        return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
    }

    void advance() {
        if (src_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    void emit(TokenKind kind, std::size_t start, int line, int col) {
        tokens_.push_back(Token{kind, std::string(src_.substr(start, pos_ - start)), line, col, start});
    }

    void skip_block_comment() {
        const int line = line_;
        const int col = col_;
        advance();
        advance();
        while (pos_ < src_.size() && !(src_[pos_] == '*' && peek(1) == '/')) {
            advance();
        }
        if (pos_ >= src_.size()) {
            throw SyntaxError(line, col, "end of block comment");
        }
        advance();
        advance();
    }

    // Reads one logical (backslash-continued) preprocessor line. Only
    // "#pragma omp" survives as a token.
    void directive_line() {
        const std::size_t start = pos_;
        const int line = line_;
        const int col = col_;
        std::string text;
        while (pos_ < src_.size() && src_[pos_] != '\n') {
            if (src_[pos_] == '\\' && (peek(1) == '\n' || (peek(1) == '\r' && peek(2) == '\n'))) {
                advance();
                if (src_[pos_] == '\r') {
                    advance();
                }
                advance();
                text.push_back(' ');
                continue;
            }
            if (src_[pos_] == '/' && peek(1) == '/') {
                while (pos_ < src_.size() && src_[pos_] != '\n') {
                    advance();
                }
                break;
            }
            if (src_[pos_] == '/' && peek(1) == '*') {
                skip_block_comment();
                text.push_back(' ');
                continue;
            }
            text.push_back(src_[pos_]);
            advance();
        }
        std::size_t i = 1;
        auto skip_ws = [&] {
            while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) {
                ++i;
            }
        };
        auto take_word = [&] {
            const std::size_t b = i;
            while (i < text.size() && is_ident_char(text[i])) {
                ++i;
            }
            return text.substr(b, i - b);
        };
        skip_ws();
        if (take_word() != "pragma") {
            return;
        }
        skip_ws();
        if (take_word() != "omp") {
            return;
        }
        tokens_.push_back(Token{TokenKind::pragma_line, normalize_pragma_text(text), line, col, start});
        at_line_start_ = false;
    }

    void word() {
        const std::size_t start = pos_;
        const int line = line_;
        const int col = col_;
        while (pos_ < src_.size() && is_ident_char(src_[pos_])) {
            advance();
        }
        const auto text = src_.substr(start, pos_ - start);
        emit(keywords().count(text) ? TokenKind::keyword : TokenKind::identifier, start, line, col);
    }

    void number() {
        const std::size_t start = pos_;
        const int line = line_;
        const int col = col_;
        const bool hex = src_[pos_] == '0' && (peek(1) == 'x' || peek(1) == 'X');
        while (pos_ < src_.size()) {
            const char c = src_[pos_];
            if (is_ident_char(c) || c == '.') {
                const bool exponent = hex ? (c == 'p' || c == 'P') : (c == 'e' || c == 'E');
                advance();
                if (exponent && (peek(0) == '+' || peek(0) == '-')) {
                    advance();
                }
                continue;
            }
            break;
        }
        emit(TokenKind::number, start, line, col);
    }

    void quoted(char quote, TokenKind kind) {
        const std::size_t start = pos_;
        const int line = line_;
        const int col = col_;
        advance();
        while (pos_ < src_.size() && src_[pos_] != quote) {
            if (src_[pos_] == '\n') {
                throw SyntaxError(line, col, std::string("closing ") + quote);
            }
            if (src_[pos_] == '\\' && pos_ + 1 < src_.size()) {
                advance();
            }
            advance();
        }
        if (pos_ >= src_.size()) {
            throw SyntaxError(line, col, std::string("closing ") + quote);
        }
        advance();
        emit(kind, start, line, col);
    }

    void symbol() {
        const std::size_t start = pos_;
        const int line = line_;
        const int col = col_;
        for (const auto op : kOperators) {
            if (src_.substr(pos_, op.size()) == op) {
                for (std::size_t k = 0; k < op.size(); ++k) {
                    advance();
                }
                const bool punct = op.size() == 1 && std::string_view("()[]{};,").find(op[0]) != std::string_view::npos;
                emit(punct ? TokenKind::punctuation : TokenKind::op, start, line, col);
                return;
            }
        }
        if (src_[pos_] == ',') {
            advance();
            emit(TokenKind::punctuation, start, line, col);
            return;
        }
        throw SyntaxError(line, col, "a token (unexpected character '" + std::string(1, src_[pos_]) + "')");
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
    bool at_line_start_ = true;
    std::vector<Token> tokens_;
};

}  // namespace

const char* to_string(TokenKind kind) {
    switch (kind) {
        case TokenKind::identifier: return "identifier";
        case TokenKind::keyword: return "keyword";
        case TokenKind::number: return "number";
        case TokenKind::string_literal: return "string-literal";
        case TokenKind::char_literal: return "char-literal";
        case TokenKind::op: return "operator";
        case TokenKind::punctuation: return "punctuation";
        case TokenKind::pragma_line: return "pragma-line";
    }
    return "?";
}

SyntaxError::SyntaxError(int line, int col, std::string expected)
    : std::runtime_error("syntax error at " + std::to_string(line) + ":" + std::to_string(col) +
                         ": expected " + expected),
      line_(line),
      col_(col),
      expected_(std::move(expected)) {}

std::vector<Token> lex(std::string_view source) { return Lexer(source).run(); }

}  // namespace ompadvisor
