#include "sdde/expr.hpp"

#include <array>
#include <cassert>
#include <charconv>
#include <cmath>
#include <cstring>
#include <limits>

namespace sdde::expr {

namespace {

constexpr int kMaxNesting = 200;

double nan_min(double a, double b) {
    if (std::isnan(a) || std::isnan(b)) return std::numeric_limits<double>::quiet_NaN();
    return a < b ? a : b;
}

double nan_max(double a, double b) {
    if (std::isnan(a) || std::isnan(b)) return std::numeric_limits<double>::quiet_NaN();
    return a > b ? a : b;
}

int func_arity(Func f) { return (f == Func::Min || f == Func::Max) ? 2 : 1; }

const char* func_name(Func f) {
    switch (f) {
        case Func::Sin: return "sin";
        case Func::Cos: return "cos";
        case Func::Exp: return "exp";
        case Func::Abs: return "abs";
        case Func::Sqrt: return "sqrt";
        case Func::Min: return "min";
        case Func::Max: return "max";
    }
    return "?";
}

bool lookup_func(std::string_view name, Func& out) {
    if (name == "sin") { out = Func::Sin; return true; }
    if (name == "cos") { out = Func::Cos; return true; }
    if (name == "exp") { out = Func::Exp; return true; }
    if (name == "abs") { out = Func::Abs; return true; }
    if (name == "sqrt") { out = Func::Sqrt; return true; }
    if (name == "min") { out = Func::Min; return true; }
    if (name == "max") { out = Func::Max; return true; }
    return false;
}

class Parser {
public:
    Parser(std::string_view text, int m) : text_(text), m_(m) {}

    NodePtr run() {
        if (text_.empty())
            fail("empty expression", 0);
        skip_ws();
        NodePtr e = parse_expr();
        skip_ws();
        if (pos_ != text_.size())
            fail("unexpected trailing input", pos_);
        return e;
    }

private:
    std::string_view text_;
    int m_;
    std::size_t pos_ = 0;
    int depth_ = 0;

    [[noreturn]] void fail(const std::string& expected, std::size_t off) const {
        throw ExprError(ExprError::Kind::Syntax, off, "",
                        "syntax error at offset " + std::to_string(off) + ": " + expected);
    }

    struct DepthGuard {
        Parser& p;
        explicit DepthGuard(Parser& parser) : p(parser) {
            if (++p.depth_ > kMaxNesting) p.fail("nesting too deep", p.pos_);
        }
        ~DepthGuard() { --p.depth_; }
    };

    bool eof() const { return pos_ >= text_.size(); }
    char peek() const { return eof() ? '\0' : text_[pos_]; }

    void skip_ws() {
        while (!eof() && (text_[pos_] == ' ' || text_[pos_] == '\t' ||
                          text_[pos_] == '\n' || text_[pos_] == '\r'))
            ++pos_;
    }

    bool consume(char c) {
        skip_ws();
        if (!eof() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        skip_ws();
        if (eof() || text_[pos_] != c)
            fail(std::string("expected '") + c + "'", pos_);
        ++pos_;
    }

    static NodePtr make_binary(BinOp op, NodePtr a, NodePtr b) {
        auto n = std::make_unique<Node>();
        n->kind = Node::Kind::Binary;
        n->op = op;
        n->a = std::move(a);
        n->b = std::move(b);
        return n;
    }

    // expr := term (('+'|'-') term)*
    NodePtr parse_expr() {
        DepthGuard guard(*this);
        NodePtr lhs = parse_term();
        for (;;) {
            skip_ws();
            if (consume('+'))
                lhs = make_binary(BinOp::Add, std::move(lhs), parse_term());
            else if (consume('-'))
                lhs = make_binary(BinOp::Sub, std::move(lhs), parse_term());
            else
                return lhs;
        }
    }

    // term := unary (('*'|'/') unary)*
    NodePtr parse_term() {
        DepthGuard guard(*this);
        NodePtr lhs = parse_unary();
        for (;;) {
            skip_ws();
            if (consume('*'))
                lhs = make_binary(BinOp::Mul, std::move(lhs), parse_unary());
            else if (consume('/'))
                lhs = make_binary(BinOp::Div, std::move(lhs), parse_unary());
            else
                return lhs;
        }
    }

    // unary := '-' unary | power   (so -2^2 is -(2^2) but -2*x is (-2)*x)
    NodePtr parse_unary() {
        DepthGuard guard(*this);
        skip_ws();
        if (consume('-')) {
            auto n = std::make_unique<Node>();
            n->kind = Node::Kind::Neg;
            n->a = parse_unary();
            return n;
        }
        return parse_power();
    }

    // power := primary ('^' unary)?   right-associative via the recursion
    NodePtr parse_power() {
        DepthGuard guard(*this);
        NodePtr base = parse_primary();
        skip_ws();
        if (consume('^'))
            return make_binary(BinOp::Pow, std::move(base), parse_unary());
        return base;
    }

    NodePtr parse_primary() {
        DepthGuard guard(*this);
        skip_ws();
        if (eof())
            fail("expected operand", pos_);
        const char c = peek();
        if (c == '(') {
            ++pos_;
            NodePtr inner = parse_expr();
            expect(')');
            return inner;
        }
        if ((c >= '0' && c <= '9') || c == '.')
            return parse_number();
        if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_')
            return parse_identifier();
        fail("expected operand", pos_);
    }

    NodePtr parse_number() {
        const std::size_t start = pos_;
        while (!eof() && ((peek() >= '0' && peek() <= '9') || peek() == '.'))
            ++pos_;
        if (!eof() && (peek() == 'e' || peek() == 'E')) {
            std::size_t mark = pos_;
            ++pos_;
            if (!eof() && (peek() == '+' || peek() == '-')) ++pos_;
            if (eof() || peek() < '0' || peek() > '9')
                pos_ = mark; // not an exponent after all
            else
                while (!eof() && peek() >= '0' && peek() <= '9') ++pos_;
        }
        double value = 0.0;
        const char* first = text_.data() + start;
        const char* last = text_.data() + pos_;
        auto [ptr, ec] = std::from_chars(first, last, value);
        if (ec != std::errc{} || ptr != last)
            fail("malformed number", start);
        auto n = std::make_unique<Node>();
        n->kind = Node::Kind::Literal;
        n->literal = value;
        return n;
    }

    NodePtr parse_identifier() {
        const std::size_t start = pos_;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_'))
            ++pos_;
        const std::string_view name = text_.substr(start, pos_ - start);

        // x<k> / y<k> variables, 1-based indices
        if (name.size() >= 2 && (name[0] == 'x' || name[0] == 'y')) {
            bool digits = true;
            for (std::size_t i = 1; i < name.size(); ++i)
                if (name[i] < '0' || name[i] > '9') { digits = false; break; }
            if (digits) {
                int idx = 0;
                auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), idx);
                if (ec != std::errc{} || ptr != name.data() + name.size() || idx < 1 || idx > m_)
                    throw ExprError(ExprError::Kind::IndexOutOfRange, start, std::string(name),
                                    "variable index out of range at offset " +
                                        std::to_string(start) + ": " + std::string(name));
                auto n = std::make_unique<Node>();
                n->kind = (name[0] == 'x') ? Node::Kind::VarX : Node::Kind::VarY;
                n->index = idx - 1;
                return n;
            }
        }

        Func fn;
        if (!lookup_func(name, fn))
            throw ExprError(ExprError::Kind::UnknownIdentifier, start, std::string(name),
                            "unknown identifier at offset " + std::to_string(start) + ": " +
                                std::string(name));

        expect('(');
        auto n = std::make_unique<Node>();
        n->kind = Node::Kind::Call;
        n->fn = fn;
        n->a = parse_expr();
        if (func_arity(fn) == 2) {
            skip_ws();
            if (!consume(','))
                fail("expected ',' (two-argument function)", pos_);
            n->b = parse_expr();
        } else {
            skip_ws();
            if (peek() == ',')
                fail("too many arguments (one-argument function)", pos_);
        }
        expect(')');
        return n;
    }
};

double eval_node(const Node& n, std::span<const double> x, std::span<const double> y) {
    switch (n.kind) {
        case Node::Kind::Literal: return n.literal;
        case Node::Kind::VarX: return x[static_cast<std::size_t>(n.index)];
        case Node::Kind::VarY: return y[static_cast<std::size_t>(n.index)];
        case Node::Kind::Neg: return -eval_node(*n.a, x, y);
        case Node::Kind::Binary: {
            const double a = eval_node(*n.a, x, y);
            const double b = eval_node(*n.b, x, y);
            switch (n.op) {
                case BinOp::Add: return a + b;
                case BinOp::Sub: return a - b;
                case BinOp::Mul: return a * b;
                case BinOp::Div: return a / b;
                case BinOp::Pow: return std::pow(a, b);
            }
            return 0.0;
        }
        case Node::Kind::Call: {
            const double a = eval_node(*n.a, x, y);
            switch (n.fn) {
                case Func::Sin: return std::sin(a);
                case Func::Cos: return std::cos(a);
                case Func::Exp: return std::exp(a);
                case Func::Abs: return std::fabs(a);
                case Func::Sqrt: return std::sqrt(a);
                case Func::Min: return nan_min(a, eval_node(*n.b, x, y));
                case Func::Max: return nan_max(a, eval_node(*n.b, x, y));
            }
            return 0.0;
        }
    }
    return 0.0;
}

int precedence(const Node& n) {
    switch (n.kind) {
        case Node::Kind::Binary:
            switch (n.op) {
                case BinOp::Add:
                case BinOp::Sub: return 1;
                case BinOp::Mul:
                case BinOp::Div: return 2;
                case BinOp::Pow: return 4;
            }
            return 1;
        case Node::Kind::Neg: return 3;
        default: return 5;
    }
}

void format_double(double v, std::string& out) {
    std::array<char, 32> buf;
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    (void)ec;
    out.append(buf.data(), ptr);
}

void print_node(const Node& n, std::string& out) {
    auto child = [&out](const Node& c, bool parens) {
        if (parens) out.push_back('(');
        print_node(c, out);
        if (parens) out.push_back(')');
    };
    switch (n.kind) {
        case Node::Kind::Literal:
            format_double(n.literal, out);
            return;
        case Node::Kind::VarX:
            out.push_back('x');
            out.append(std::to_string(n.index + 1));
            return;
        case Node::Kind::VarY:
            out.push_back('y');
            out.append(std::to_string(n.index + 1));
            return;
        case Node::Kind::Neg:
            out.push_back('-');
            child(*n.a, precedence(*n.a) < 3);
            return;
        case Node::Kind::Binary: {
            const int p = precedence(n);
            const char* sym = "?";
            switch (n.op) {
                case BinOp::Add: sym = " + "; break;
                case BinOp::Sub: sym = " - "; break;
                case BinOp::Mul: sym = "*"; break;
                case BinOp::Div: sym = "/"; break;
                case BinOp::Pow: sym = "^"; break;
            }
            if (n.op == BinOp::Pow) {
                // right-associative; the exponent may be a unary chain
                child(*n.a, precedence(*n.a) <= 4);
                out.append(sym);
                child(*n.b, precedence(*n.b) < 3);
            } else {
                child(*n.a, precedence(*n.a) < p);
                out.append(sym);
                child(*n.b, precedence(*n.b) <= p);
            }
            return;
        }
        case Node::Kind::Call:
            out.append(func_name(n.fn));
            out.push_back('(');
            print_node(*n.a, out);
            if (n.b) {
                out.append(", ");
                print_node(*n.b, out);
            }
            out.push_back(')');
            return;
    }
}

void compile_node(const Node& n, CompiledExpr& out, int depth, int& max_depth) {
    using Code = CompiledExpr::Code;
    if (depth + 2 > max_depth) max_depth = depth + 2;
    switch (n.kind) {
        case Node::Kind::Literal:
            out.ops.push_back({Code::PushLit, 0, n.literal});
            return;
        case Node::Kind::VarX:
            out.ops.push_back({Code::PushX, n.index, 0.0});
            return;
        case Node::Kind::VarY:
            out.ops.push_back({Code::PushY, n.index, 0.0});
            return;
        case Node::Kind::Neg:
            compile_node(*n.a, out, depth, max_depth);
            out.ops.push_back({Code::Neg, 0, 0.0});
            return;
        case Node::Kind::Binary: {
            compile_node(*n.a, out, depth, max_depth);
            compile_node(*n.b, out, depth + 1, max_depth);
            Code c = Code::Add;
            switch (n.op) {
                case BinOp::Add: c = Code::Add; break;
                case BinOp::Sub: c = Code::Sub; break;
                case BinOp::Mul: c = Code::Mul; break;
                case BinOp::Div: c = Code::Div; break;
                case BinOp::Pow: c = Code::Pow; break;
            }
            out.ops.push_back({c, 0, 0.0});
            return;
        }
        case Node::Kind::Call: {
            compile_node(*n.a, out, depth, max_depth);
            if (n.b) compile_node(*n.b, out, depth + 1, max_depth);
            Code c = Code::Sin;
            switch (n.fn) {
                case Func::Sin: c = Code::Sin; break;
                case Func::Cos: c = Code::Cos; break;
                case Func::Exp: c = Code::Exp; break;
                case Func::Abs: c = Code::Abs; break;
                case Func::Sqrt: c = Code::Sqrt; break;
                case Func::Min: c = Code::Min; break;
                case Func::Max: c = Code::Max; break;
            }
            out.ops.push_back({c, 0, 0.0});
            return;
        }
    }
}

bool nodes_equal(const Node& a, const Node& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case Node::Kind::Literal: return a.literal == b.literal;
        case Node::Kind::VarX:
        case Node::Kind::VarY: return a.index == b.index;
        case Node::Kind::Neg: return nodes_equal(*a.a, *b.a);
        case Node::Kind::Binary:
            return a.op == b.op && nodes_equal(*a.a, *b.a) && nodes_equal(*a.b, *b.b);
        case Node::Kind::Call:
            if (a.fn != b.fn) return false;
            if (!nodes_equal(*a.a, *b.a)) return false;
            if (static_cast<bool>(a.b) != static_cast<bool>(b.b)) return false;
            return !a.b || nodes_equal(*a.b, *b.b);
    }
    return false;
}

NodePtr clone_node(const Node& n) {
    auto c = std::make_unique<Node>();
    c->kind = n.kind;
    c->literal = n.literal;
    c->index = n.index;
    c->op = n.op;
    c->fn = n.fn;
    if (n.a) c->a = clone_node(*n.a);
    if (n.b) c->b = clone_node(*n.b);
    return c;
}

} // namespace

Expr Expr::parse(std::string_view text, int state_dim) {
    if (state_dim < 1)
        throw ExprError(ExprError::Kind::Syntax, 0, "", "state dimension must be >= 1");
    Parser p(text, state_dim);
    return Expr(p.run(), state_dim);
}

double Expr::eval(std::span<const double> x, std::span<const double> y) const {
    return eval_node(*root_, x, y);
}

std::string Expr::print() const {
    std::string out;
    print_node(*root_, out);
    return out;
}

CompiledExpr Expr::compile() const {
    CompiledExpr c;
    int max_depth = 0;
    compile_node(*root_, c, 0, max_depth);
    c.max_depth = max_depth;
    assert(max_depth < 256);
    return c;
}

bool Expr::equals(const Expr& other) const {
    return state_dim_ == other.state_dim_ && nodes_equal(*root_, *other.root_);
}

Expr Expr::clone() const { return Expr(clone_node(*root_), state_dim_); }

double CompiledExpr::eval(std::span<const double> x, std::span<const double> y) const {
    std::array<double, 256> stack;
    std::size_t top = 0;
    for (const Op& op : ops) {
        switch (op.code) {
            case Code::PushLit: stack[top++] = op.literal; break;
            case Code::PushX: stack[top++] = x[static_cast<std::size_t>(op.index)]; break;
            case Code::PushY: stack[top++] = y[static_cast<std::size_t>(op.index)]; break;
            case Code::Neg: stack[top - 1] = -stack[top - 1]; break;
            case Code::Add: --top; stack[top - 1] += stack[top]; break;
            case Code::Sub: --top; stack[top - 1] -= stack[top]; break;
            case Code::Mul: --top; stack[top - 1] *= stack[top]; break;
            case Code::Div: --top; stack[top - 1] /= stack[top]; break;
            case Code::Pow: --top; stack[top - 1] = std::pow(stack[top - 1], stack[top]); break;
            case Code::Sin: stack[top - 1] = std::sin(stack[top - 1]); break;
            case Code::Cos: stack[top - 1] = std::cos(stack[top - 1]); break;
            case Code::Exp: stack[top - 1] = std::exp(stack[top - 1]); break;
            case Code::Abs: stack[top - 1] = std::fabs(stack[top - 1]); break;
            case Code::Sqrt: stack[top - 1] = std::sqrt(stack[top - 1]); break;
            case Code::Min: --top; stack[top - 1] = nan_min(stack[top - 1], stack[top]); break;
            case Code::Max: --top; stack[top - 1] = nan_max(stack[top - 1], stack[top]); break;
        }
    }
    return stack[0];
}

} // namespace sdde::expr
