#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include "dimred/expr.hpp"

namespace dimred {

namespace {

// Grammar:
//   expr   := term (('+' | '-') term)*
//   term   := rchain ('/' unary ('*' rchain)?)*
//   rchain := unary ('*' rchain)?          runs of '*' associate to the right
//   unary  := '-' unary | postfix
//   postfix:= primary ('^' number)?
//   primary:= number | x<k> | y | pi | func '(' expr ')' | '(' expr ')'
class Parser {
public:
    Parser(std::string_view text, const ParseOptions& opts) : text_(text), opts_(opts) {}

    ExprDag run()
    {
        NodeId root = expr();
        skip_ws();
        if (pos_ != text_.size()) fail("unexpected trailing input");
        return b_.finish(root);
    }

private:
    [[noreturn]] void fail(const std::string& what) const
    {
        throw ParseError("parse error at offset " + std::to_string(pos_) + ": " + what + " in '" +
                         std::string(text_) + "'");
    }

    void skip_ws()
    {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    char peek()
    {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    bool accept(char ch)
    {
        if (peek() == ch) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char ch)
    {
        if (!accept(ch)) fail(std::string("expected '") + ch + "'");
    }

    NodeId expr()
    {
        NodeId acc = term();
        for (;;) {
            if (accept('+')) acc = b_.binary(BinaryOp::Add, acc, term());
            else if (accept('-')) acc = b_.binary(BinaryOp::Sub, acc, term());
            else return acc;
        }
    }

    NodeId term()
    {
        NodeId acc = rchain();
        while (accept('/')) {
            acc = b_.binary(BinaryOp::Div, acc, unary());
            if (accept('*')) acc = b_.binary(BinaryOp::Mul, acc, rchain());
        }
        return acc;
    }

    NodeId rchain()
    {
        NodeId head = unary();
        if (accept('*')) return b_.binary(BinaryOp::Mul, head, rchain());
        return head;
    }

    std::optional<double> number()
    {
        skip_ws();
        if (pos_ >= text_.size()) return std::nullopt;
        char ch = text_[pos_];
        if (!(std::isdigit(static_cast<unsigned char>(ch)) || ch == '.')) return std::nullopt;
        double v = 0;
        auto res = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), v);
        if (res.ec != std::errc()) fail("bad number");
        pos_ = static_cast<std::size_t>(res.ptr - text_.data());
        return v;
    }

    NodeId unary()
    {
        if (accept('-')) {
            if (auto v = number()) return postfix(b_.constant(-*v));
            return b_.unary(UnaryOp::Neg, unary());
        }
        return postfix(primary());
    }

    NodeId power(NodeId base, double e)
    {
        if (e == 1) return base;
        if (e < 0) return b_.unary(UnaryOp::Inv, power(base, -e));
        if (e == 0.5) return b_.unary(UnaryOp::Sqrt, base);
        if (e == 2) return b_.unary(UnaryOp::Square, base);
        if (e == std::floor(e) && e > 2) return b_.binary(BinaryOp::Mul, base, power(base, e - 1));
        if (2 * e == std::floor(2 * e)) return b_.binary(BinaryOp::Mul, power(base, e - 0.5), power(base, 0.5));
        fail("only integer and half-integer exponents are supported");
    }

    NodeId postfix(NodeId base)
    {
        if (!accept('^')) return base;
        bool negative = accept('-');
        auto e = number();
        if (!e) fail("expected numeric exponent");
        return power(base, negative ? -*e : *e);
    }

    NodeId primary()
    {
        if (auto v = number()) return b_.constant(*v);
        if (accept('(')) {
            NodeId inner = expr();
            expect(')');
            return inner;
        }
        skip_ws();
        std::size_t start = pos_;
        while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        std::string_view ident = text_.substr(start, pos_ - start);
        if (ident.empty()) fail("expected operand");
        if (ident == "y") {
            if (opts_.y_index < 0) fail("output symbol 'y' not allowed here");
            return b_.var(opts_.y_index);
        }
        if (ident == "pi") return b_.constant(std::numbers::pi);
        if (ident == "nan") return b_.constant(std::numeric_limits<double>::quiet_NaN());
        if (ident.size() > 1 && ident[0] == 'x') {
            int k = 0;
            auto res = std::from_chars(ident.data() + 1, ident.data() + ident.size(), k);
            if (res.ec != std::errc() || res.ptr != ident.data() + ident.size() || k < 1)
                fail("bad variable name");
            return b_.var(k - 1);
        }
        static constexpr std::pair<std::string_view, UnaryOp> funcs[] = {
            {"sqrt", UnaryOp::Sqrt}, {"log", UnaryOp::Log}, {"exp", UnaryOp::Exp},
            {"sin", UnaryOp::Sin},   {"cos", UnaryOp::Cos}, {"inv", UnaryOp::Inv},
            {"square", UnaryOp::Square}, {"neg", UnaryOp::Neg},
            {"asin", UnaryOp::Asin}, {"acos", UnaryOp::Acos},
        };
        for (auto [fname, op] : funcs) {
            if (ident == fname) {
                expect('(');
                NodeId arg = expr();
                expect(')');
                return b_.unary(op, arg);
            }
        }
        fail("unknown identifier '" + std::string(ident) + "'");
    }

    std::string_view text_;
    ParseOptions opts_;
    std::size_t pos_{0};
    DagBuilder b_;
};

}  // namespace

ExprDag parse(std::string_view text, const ParseOptions& opts) { return Parser(text, opts).run(); }

}  // namespace dimred
