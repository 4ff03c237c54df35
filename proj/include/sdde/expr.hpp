#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sdde::expr {

/// Parse failure with the byte offset of the offending token.
struct ExprError : std::runtime_error {
    enum class Kind { Syntax, UnknownIdentifier, IndexOutOfRange };

    ExprError(Kind k, std::size_t off, std::string tok, const std::string& msg)
        : std::runtime_error(msg), kind(k), offset(off), token(std::move(tok)) {}

    Kind kind;
    std::size_t offset;
    std::string token;
};

enum class BinOp : std::uint8_t { Add, Sub, Mul, Div, Pow };
enum class Func : std::uint8_t { Sin, Cos, Exp, Abs, Sqrt, Min, Max };

struct Node;
using NodePtr = std::unique_ptr<Node>;

struct Node {
    enum class Kind : std::uint8_t { Literal, VarX, VarY, Neg, Binary, Call };
    Kind kind = Kind::Literal;
    double literal = 0.0;
    int index = 0; // 0-based variable index for VarX / VarY
    BinOp op = BinOp::Add;
    Func fn = Func::Sin;
    NodePtr a;
    NodePtr b;
};

/// Flattened postfix form of an expression, for hot evaluation loops.
struct CompiledExpr {
    enum class Code : std::uint8_t {
        PushLit, PushX, PushY, Neg,
        Add, Sub, Mul, Div, Pow,
        Sin, Cos, Exp, Abs, Sqrt, Min, Max
    };
    struct Op {
        Code code;
        int index = 0;
        double literal = 0.0;
    };
    std::vector<Op> ops;
    int max_depth = 0;

    double eval(std::span<const double> x, std::span<const double> y) const;
};

/// Arithmetic expression over variables x1..xm, y1..ym.
///
/// Grammar (documented in docs/expression-grammar.md): + - * / ^ with the
/// usual precedence, ^ right-associative and binding tighter than unary
/// minus; functions sin, cos, exp, abs, sqrt (unary) and min, max (binary).
/// Arity is checked at parse time. Evaluation is IEEE double precision;
/// division by zero and domain errors surface as non-finite values.
class Expr {
public:
    static Expr parse(std::string_view text, int state_dim);

    double eval(std::span<const double> x, std::span<const double> y) const;
    std::string print() const;
    CompiledExpr compile() const;

    bool equals(const Expr& other) const;
    Expr clone() const;

    int state_dim() const { return state_dim_; }
    const Node& root() const { return *root_; }

private:
    Expr(NodePtr root, int m) : root_(std::move(root)), state_dim_(m) {}
    NodePtr root_;
    int state_dim_ = 1;
};

} // namespace sdde::expr
