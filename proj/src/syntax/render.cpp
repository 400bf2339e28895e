#include "ompadvisor/syntax.hpp"

#include <sstream>

namespace ompadvisor {

namespace {

constexpr int kCommaPrec = 1;
constexpr int kAssignPrec = 2;
constexpr int kCondPrec = 3;
constexpr int kUnaryPrec = 14;
constexpr int kPostfixPrec = 15;
constexpr int kPrimaryPrec = 16;

int binary_prec(const std::string& op) {
    if (op == ",") return kCommaPrec;
    if (op == "||") return 4;
    if (op == "&&") return 5;
    if (op == "|") return 6;
    if (op == "^") return 7;
    if (op == "&") return 8;
    if (op == "==" || op == "!=") return 9;
    if (op == "<" || op == ">" || op == "<=" || op == ">=") return 10;
    if (op == "<<" || op == ">>") return 11;
    if (op == "+" || op == "-") return 12;
    return 13;
}

int precedence(const AstNode& e) {
    switch (e.kind) {
        case AstKind::BinaryOp: return binary_prec(e.value);
        case AstKind::Assign: return kAssignPrec;
        case AstKind::Conditional: return kCondPrec;
        case AstKind::UnaryOp: return e.postfix ? kPostfixPrec : kUnaryPrec;
        case AstKind::Cast: return kUnaryPrec;
        case AstKind::Call:
        case AstKind::ArrayIndex: return kPostfixPrec;
        default: return kPrimaryPrec;
    }
}

std::string type_with_stars(const std::string& type, int depth) {
    std::string out = type;
    if (depth > 0) {
        out += ' ';
        out.append(static_cast<std::size_t>(depth), '*');
    }
    return out;
}

class Renderer {
public:
    std::string expr(const AstNode& e, int min_prec) {
        std::string text = expr_inner(e);
        if (precedence(e) < min_prec) {
            return "(" + text + ")";
        }
        return text;
    }

    std::string expr_inner(const AstNode& e) {
        switch (e.kind) {
            case AstKind::Identifier:
            case AstKind::Constant:
                return e.value;
            case AstKind::BinaryOp: {
                const int p = binary_prec(e.value);
                const std::string sep = e.value == "," ? ", " : " " + e.value + " ";
                return expr(e.children[0], p) + sep + expr(e.children[1], p + 1);
            }
            case AstKind::Assign:
                return expr(e.children[0], kUnaryPrec) + " " + e.value + " " + expr(e.children[1], kAssignPrec);
            case AstKind::Conditional:
                return expr(e.children[0], 4) + " ? " + expr(e.children[1], kCommaPrec) + " : " +
                       expr(e.children[2], kCondPrec);
            case AstKind::UnaryOp: {
                if (e.postfix) {
                    return expr(e.children[0], kPostfixPrec) + e.value;
                }
                if (e.value == "sizeof") {
                    if (e.children.empty()) {
                        return "sizeof(" + type_with_stars(e.type_name, e.pointer_depth) + ")";
                    }
                    return "sizeof " + expr(e.children[0], kUnaryPrec);
                }
                std::string operand = expr(e.children[0], kUnaryPrec);
                // Keep "- -x" and "& &x" from fusing into "--x" / "&&x".
                if (!operand.empty() && (operand[0] == e.value.back() ||
                                         ((e.value == "-" || e.value == "+") && (operand[0] == '-' || operand[0] == '+')))) {
                    operand = "(" + operand + ")";
                }
                return e.value + operand;
            }
            case AstKind::Cast:
                return "(" + type_with_stars(e.type_name, e.pointer_depth) + ")" + expr(e.children[0], kUnaryPrec);
            case AstKind::Call: {
                std::string out = e.children[0].value + "(";
                for (std::size_t i = 1; i < e.children.size(); ++i) {
                    if (i > 1) {
                        out += ", ";
                    }
                    out += expr(e.children[i], kAssignPrec);
                }
                return out + ")";
            }
            case AstKind::ArrayIndex:
                return expr(e.children[0], kPostfixPrec) + "[" + expr(e.children[1], kCommaPrec) + "]";
            case AstKind::InitList: {
                std::string out = "{";
                for (std::size_t i = 0; i < e.children.size(); ++i) {
                    if (i > 0) {
                        out += ", ";
                    }
                    out += expr(e.children[i], kAssignPrec);
                }
                return out + "}";
            }
            case AstKind::Empty:
                return "";
            default:
                return statement(e);
        }
    }

    std::string declarator(const AstNode& d) {
        std::string out(static_cast<std::size_t>(d.pointer_depth), '*');
        out += d.value;
        for (int i = 0; i < d.dims; ++i) {
            out += "[" + expr(d.children[static_cast<std::size_t>(i)], kAssignPrec) + "]";
        }
        if (d.children.size() > static_cast<std::size_t>(d.dims)) {
            out += " = " + expr(d.children.back(), kAssignPrec);
        }
        return out;
    }

    std::string declaration(const AstNode& decl) {
        std::string out = decl.type_name + " ";
        for (std::size_t i = 0; i < decl.children.size(); ++i) {
            if (i > 0) {
                out += ", ";
            }
            out += declarator(decl.children[i]);
        }
        return out;
    }

    std::string parameter(const AstNode& param) {
        const AstNode& d = param.children.front();
        std::string out = param.type_name;
        if (d.pointer_depth > 0 || !d.value.empty() || d.dims > 0) {
            out += " " + declarator(d);
        }
        return out;
    }

    // Body of a control statement: always braced.
    std::string body(const AstNode& s) {
        if (s.kind == AstKind::CompoundStmt) {
            return statement(s);
        }
        if (s.kind == AstKind::Empty) {
            return "{\n}";
        }
        return "{\n" + statement(s) + "\n}";
    }

    std::string statement(const AstNode& s) {
        switch (s.kind) {
            case AstKind::TranslationUnit: {
                std::string out;
                for (std::size_t i = 0; i < s.children.size(); ++i) {
                    if (i > 0) {
                        out += "\n";
                    }
                    out += statement(s.children[i]);
                }
                return out;
            }
            case AstKind::FunctionDef: {
                std::string out = type_with_stars(s.type_name, s.pointer_depth) + " " + s.value + "(";
                const std::size_t nparams = s.children.size() - 1;
                for (std::size_t i = 0; i < nparams; ++i) {
                    if (i > 0) {
                        out += ", ";
                    }
                    out += parameter(s.children[i]);
                }
                out += ")";
                const AstNode& fbody = s.children.back();
                return fbody.kind == AstKind::Empty ? out + ";" : out + " " + statement(fbody);
            }
            case AstKind::Declaration:
                return declaration(s) + ";";
            case AstKind::CompoundStmt: {
                std::string out = "{\n";
                for (const auto& child : s.children) {
                    out += statement(child) + "\n";
                }
                return out + "}";
            }
            case AstKind::ForStmt: {
                const AstNode& init = s.children[0];
                std::string head = "for (";
                head += init.kind == AstKind::Declaration ? declaration(init) : expr(init, kCommaPrec);
                head += "; " + expr(s.children[1], kCommaPrec) + "; " + expr(s.children[2], kCommaPrec) + ") ";
                // "for (;;)" keeps the canonical single spaces
                if (head == "for (; ; ) ") {
                    head = "for (;;) ";
                }
                return head + body(s.children[3]);
            }
            case AstKind::WhileStmt:
                return "while (" + expr(s.children[0], kCommaPrec) + ") " + body(s.children[1]);
            case AstKind::IfStmt: {
                std::string out = "if (" + expr(s.children[0], kCommaPrec) + ") " + body(s.children[1]);
                if (s.children.size() > 2) {
                    const AstNode& other = s.children[2];
                    out += " else " + (other.kind == AstKind::IfStmt ? statement(other) : body(other));
                }
                return out;
            }
            case AstKind::ExprStmt:
                return expr(s.children[0], kCommaPrec) + ";";
            case AstKind::ReturnStmt:
                return s.children.empty() ? "return;" : "return " + expr(s.children[0], kCommaPrec) + ";";
            case AstKind::BreakStmt:
                return "break;";
            case AstKind::ContinueStmt:
                return "continue;";
            case AstKind::Empty:
                return ";";
            case AstKind::PragmaDirective:
                return s.value;
            case AstKind::Declarator:
                return declarator(s);
            default:
                return expr(s, kCommaPrec);
        }
    }
};

bool is_body_position(const AstNode& parent, std::size_t index) {
    switch (parent.kind) {
        case AstKind::ForStmt: return index == 3;
        case AstKind::WhileStmt: return index == 1;
        case AstKind::IfStmt: return index >= 1;
        default: return false;
    }
}

// Unwraps a braced single statement so that braced and unbraced bodies compare equal.
const AstNode& canonical_body(const AstNode& node) {
    if (node.kind == AstKind::CompoundStmt && node.children.size() == 1 &&
        node.children[0].kind != AstKind::PragmaDirective && node.children[0].kind != AstKind::Declaration) {
        return canonical_body(node.children[0]);
    }
    return node;
}

bool is_empty_body(const AstNode& node) {
    return node.kind == AstKind::Empty || (node.kind == AstKind::CompoundStmt && node.children.empty());
}

bool equal_impl(const AstNode& a, const AstNode& b, bool body) {
    if (body) {
        if (is_empty_body(a) && is_empty_body(b)) {
            return true;
        }
        const AstNode& ca = canonical_body(a);
        const AstNode& cb = canonical_body(b);
        if (&ca != &a || &cb != &b) {
            return equal_impl(ca, cb, false);
        }
    }
    if (a.kind != b.kind || a.value != b.value || a.type_name != b.type_name ||
        a.pointer_depth != b.pointer_depth || a.dims != b.dims || a.postfix != b.postfix ||
        a.standalone != b.standalone || a.children.size() != b.children.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.children.size(); ++i) {
        if (!equal_impl(a.children[i], b.children[i], is_body_position(a, i))) {
            return false;
        }
    }
    return true;
}

void dump(const AstNode& node, int depth, std::ostringstream& out) {
    out << std::string(static_cast<std::size_t>(depth) * 2, ' ') << to_string(node.kind);
    if (!node.value.empty()) {
        out << " '" << node.value << "'";
    }
    if (!node.type_name.empty()) {
        out << " type='" << node.type_name << "'";
    }
    if (node.pointer_depth) {
        out << " ptr=" << node.pointer_depth;
    }
    if (node.dims) {
        out << " dims=" << node.dims;
    }
    if (node.postfix) {
        out << " postfix";
    }
    if (!node.span.empty()) {
        out << " [" << node.span.first << "," << node.span.last << "]";
    }
    out << "\n";
    for (const auto& child : node.children) {
        dump(child, depth + 1, out);
    }
}

}  // namespace

std::string render(const AstNode& node) { return Renderer().statement(node); }

bool structurally_equal(const AstNode& a, const AstNode& b) { return equal_impl(a, b, false); }

std::string ast_dump(const AstNode& node) {
    std::ostringstream out;
    dump(node, 0, out);
    return out.str();
}

}  // namespace ompadvisor
