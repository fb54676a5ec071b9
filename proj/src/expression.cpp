#include "evo/expression.hpp"

#include "evo/core.hpp"

#include <cctype>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace evo {

struct Expression::Node {
    enum class Op { Constant, Variable, Neg, Add, Sub, Mul, Div, Pow, Abs, Sqrt, Exp, Log, Sin, Cos };
    Op op = Op::Constant;
    double value = 0.0;
    int index = 0;
    std::shared_ptr<const Node> lhs;
    std::shared_ptr<const Node> rhs;
};

namespace {

using Node = Expression::Node;
using NodePtr = std::shared_ptr<const Node>;

NodePtr make(Node::Op op, NodePtr lhs = nullptr, NodePtr rhs = nullptr) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->lhs = std::move(lhs);
    n->rhs = std::move(rhs);
    return n;
}

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    NodePtr parse_all() {
        auto root = expression();
        skip_space();
        if (pos_ != text_.size()) fail("unexpected character");
        return root;
    }

    int max_variable() const { return max_variable_; }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
    int max_variable_ = -1;

    [[noreturn]] void fail(const std::string& what) const {
        throw ConfigError("reward expression: " + what + " at column " + std::to_string(pos_ + 1) + " in '" +
                          std::string(text_) + "'");
    }

    void skip_space() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(std::string_view token) {
        skip_space();
        if (text_.substr(pos_, token.size()) == token) {
            pos_ += token.size();
            return true;
        }
        return false;
    }

    NodePtr expression() {
        auto lhs = term();
        for (;;) {
            if (accept("+")) {
                lhs = make(Node::Op::Add, lhs, term());
            } else if (accept("-")) {
                lhs = make(Node::Op::Sub, lhs, term());
            } else {
                return lhs;
            }
        }
    }

    NodePtr term() {
        auto lhs = unary();
        for (;;) {
            skip_space();
            if (text_.substr(pos_, 2) == "**") return lhs;
            if (accept("*")) {
                lhs = make(Node::Op::Mul, lhs, unary());
            } else if (accept("/")) {
                lhs = make(Node::Op::Div, lhs, unary());
            } else {
                return lhs;
            }
        }
    }

    NodePtr unary() {
        if (accept("-")) return make(Node::Op::Neg, unary());
        if (accept("+")) return unary();
        return power();
    }

    // Right-associative; binds tighter than unary minus on its left: -x^2 = -(x^2).
    NodePtr power() {
        auto base = primary();
        if (accept("^") || accept("**")) return make(Node::Op::Pow, base, unary());
        return base;
    }

    NodePtr primary() {
        skip_space();
        if (pos_ >= text_.size()) fail("unexpected end of expression");
        const char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            auto inner = expression();
            if (!accept(")")) fail("expected ')'");
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
        fail("unexpected character");
    }

    NodePtr number() {
        const std::string rest(text_.substr(pos_));
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(rest, &used);
        } catch (const std::exception&) {
            fail("malformed number");
        }
        pos_ += used;
        auto n = std::make_shared<Node>();
        n->value = v;
        return n;
    }

    NodePtr identifier() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
        const std::string name(text_.substr(start, pos_ - start));

        static const std::vector<std::pair<std::string, Node::Op>> functions = {
            {"abs", Node::Op::Abs}, {"sqrt", Node::Op::Sqrt}, {"exp", Node::Op::Exp},
            {"log", Node::Op::Log}, {"sin", Node::Op::Sin},   {"cos", Node::Op::Cos},
        };
        for (const auto& [fname, op] : functions) {
            if (name == fname) {
                if (!accept("(")) fail("expected '(' after " + name);
                auto arg = expression();
                if (!accept(")")) fail("expected ')'");
                return make(op, arg);
            }
        }
        if (name == "pi" || name == "e") {
            auto n = std::make_shared<Node>();
            n->value = name == "pi" ? std::numbers::pi : std::numbers::e;
            return n;
        }
        int index = -1;
        if (name == "x") index = 0;
        if (name == "y") index = 1;
        if (name == "z") index = 2;
        if (name.size() == 2 && name[0] == 'x' && std::isdigit(static_cast<unsigned char>(name[1]))) index = name[1] - '0';
        if (index < 0) {
            pos_ = start;
            fail("unknown identifier '" + name + "'");
        }
        max_variable_ = std::max(max_variable_, index);
        auto n = std::make_shared<Node>();
        n->op = Node::Op::Variable;
        n->index = index;
        return n;
    }
};

double eval(const Node& n, std::span<const double> x) {
    switch (n.op) {
        case Node::Op::Constant: return n.value;
        case Node::Op::Variable: return x[static_cast<std::size_t>(n.index)];
        case Node::Op::Neg: return -eval(*n.lhs, x);
        case Node::Op::Add: return eval(*n.lhs, x) + eval(*n.rhs, x);
        case Node::Op::Sub: return eval(*n.lhs, x) - eval(*n.rhs, x);
        case Node::Op::Mul: return eval(*n.lhs, x) * eval(*n.rhs, x);
        case Node::Op::Div: return eval(*n.lhs, x) / eval(*n.rhs, x);
        case Node::Op::Pow: return std::pow(eval(*n.lhs, x), eval(*n.rhs, x));
        case Node::Op::Abs: return std::abs(eval(*n.lhs, x));
        case Node::Op::Sqrt: return std::sqrt(eval(*n.lhs, x));
        case Node::Op::Exp: return std::exp(eval(*n.lhs, x));
        case Node::Op::Log: return std::log(eval(*n.lhs, x));
        case Node::Op::Sin: return std::sin(eval(*n.lhs, x));
        case Node::Op::Cos: return std::cos(eval(*n.lhs, x));
    }
    return 0.0;
}

}  // namespace

Expression Expression::parse(std::string_view text) {
    Parser parser(text);
    Expression out;
    out.root_ = parser.parse_all();
    out.max_variable_ = parser.max_variable();
    out.source_ = std::string(text);
    return out;
}

double Expression::evaluate(std::span<const double> x) const {
    if (static_cast<int>(x.size()) <= max_variable_) {
        throw std::invalid_argument("reward expression references a coordinate beyond the sample dimension");
    }
    return eval(*root_, x);
}

}  // namespace evo
