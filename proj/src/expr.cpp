#include "landau/expr.hpp"

#include "landau/errors.hpp"

#include <array>
#include <cctype>
#include <cmath>
#include <memory>
#include <numbers>
#include <optional>

namespace landau {

namespace {

using Op = Expression::Op;

struct Node {
    Op op;
    int index = 0;
    double value = 0.0;
    std::vector<std::unique_ptr<Node>> args;
};
using NodePtr = std::unique_ptr<Node>;

NodePtr make_leaf(Op op, double value = 0.0, int index = 0) {
    auto n = std::make_unique<Node>();
    n->op = op;
    n->value = value;
    n->index = index;
    return n;
}

int arity(Op op) {
    switch (op) {
    case Op::Push: case Op::Coord: case Op::R2: case Op::R:
        return 0;
    case Op::Add: case Op::Sub: case Op::Mul: case Op::Div: case Op::Pow:
    case Op::Atan2: case Op::Min: case Op::Max:
        return 2;
    default:
        return 1;
    }
}

double apply(Op op, double a, double b) {
    switch (op) {
    case Op::Add: return a + b;
    case Op::Sub: return a - b;
    case Op::Mul: return a * b;
    case Op::Div: return a / b;
    case Op::Pow: return std::pow(a, b);
    case Op::Atan2: return std::atan2(a, b);
    case Op::Min: return std::fmin(a, b);
    case Op::Max: return std::fmax(a, b);
    case Op::Neg: return -a;
    case Op::Sin: return std::sin(a);
    case Op::Cos: return std::cos(a);
    case Op::Tan: return std::tan(a);
    case Op::Exp: return std::exp(a);
    case Op::Log: return std::log(a);
    case Op::Sqrt: return std::sqrt(a);
    case Op::Abs: return std::fabs(a);
    case Op::Tanh: return std::tanh(a);
    case Op::Sinh: return std::sinh(a);
    case Op::Cosh: return std::cosh(a);
    case Op::Atan: return std::atan(a);
    case Op::Floor: return std::floor(a);
    default: return 0.0;
    }
}

std::optional<Op> function_op(std::string_view name) {
    static constexpr std::array<std::pair<std::string_view, Op>, 15> table{{
        {"sin", Op::Sin}, {"cos", Op::Cos}, {"tan", Op::Tan}, {"exp", Op::Exp},
        {"log", Op::Log}, {"sqrt", Op::Sqrt}, {"abs", Op::Abs}, {"tanh", Op::Tanh},
        {"sinh", Op::Sinh}, {"cosh", Op::Cosh}, {"atan", Op::Atan}, {"floor", Op::Floor},
        {"atan2", Op::Atan2}, {"min", Op::Min}, {"max", Op::Max},
    }};
    for (const auto& [n, op] : table)
        if (n == name) return op;
    if (name == "pow") return Op::Pow;
    return std::nullopt;
}

class Parser {
public:
    Parser(std::string_view text, const SymbolTable& symbols) : text_(text), symbols_(symbols) {}

    NodePtr parse() {
        auto root = expr();
        skip_ws();
        if (pos_ != text_.size()) fail("unexpected trailing input");
        return root;
    }

private:
    std::string_view text_;
    const SymbolTable& symbols_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError("expression '" + std::string(text_) + "': " + msg, pos_);
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) fail(std::string("expected '") + c + "'");
    }

    static NodePtr binary(Op op, NodePtr a, NodePtr b) {
        auto n = make_leaf(op);
        n->args.push_back(std::move(a));
        n->args.push_back(std::move(b));
        return n;
    }

    NodePtr expr() {
        auto lhs = term();
        for (;;) {
            if (accept('+')) lhs = binary(Op::Add, std::move(lhs), term());
            else if (accept('-')) lhs = binary(Op::Sub, std::move(lhs), term());
            else return lhs;
        }
    }

    NodePtr term() {
        auto lhs = unary();
        for (;;) {
            if (accept('*')) lhs = binary(Op::Mul, std::move(lhs), unary());
            else if (accept('/')) lhs = binary(Op::Div, std::move(lhs), unary());
            else return lhs;
        }
    }

    NodePtr unary() {
        if (accept('-')) {
            auto n = make_leaf(Op::Neg);
            n->args.push_back(unary());
            return n;
        }
        if (accept('+')) return unary();
        return power();
    }

    NodePtr power() {
        auto base = primary();
        if (accept('^')) return binary(Op::Pow, std::move(base), unary());
        return base;
    }

    NodePtr primary() {
        skip_ws();
        if (pos_ >= text_.size()) fail("unexpected end of input");
        const char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            auto inner = expr();
            expect(')');
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return name();
        fail(std::string("unexpected character '") + c + "'");
    }

    NodePtr number() {
        const char* begin = text_.data() + pos_;
        // strtod stops at the first character it cannot use; the input view is
        // not NUL-terminated, so copy the candidate span.
        std::size_t end = pos_;
        while (end < text_.size() &&
               (std::isdigit(static_cast<unsigned char>(text_[end])) || text_[end] == '.' ||
                text_[end] == 'e' || text_[end] == 'E' ||
                ((text_[end] == '+' || text_[end] == '-') && end > pos_ &&
                 (text_[end - 1] == 'e' || text_[end - 1] == 'E'))))
            ++end;
        std::string literal(begin, end - pos_);
        char* stop = nullptr;
        const double v = std::strtod(literal.c_str(), &stop);
        if (stop == literal.c_str()) fail("malformed number");
        pos_ += static_cast<std::size_t>(stop - literal.c_str());
        return make_leaf(Op::Push, v);
    }

    NodePtr name() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        const std::string_view id = text_.substr(start, pos_ - start);

        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == '(') {
            const auto op = function_op(id);
            if (!op) {
                pos_ = start;
                fail("unknown function '" + std::string(id) + "'");
            }
            ++pos_;
            auto n = make_leaf(*op);
            n->args.push_back(expr());
            while (accept(',')) n->args.push_back(expr());
            expect(')');
            if (static_cast<int>(n->args.size()) != arity(*op)) {
                pos_ = start;
                fail("function '" + std::string(id) + "' takes " + std::to_string(arity(*op)) +
                     " argument(s)");
            }
            return n;
        }

        if (id == "pi") return make_leaf(Op::Push, std::numbers::pi);
        if (id == "e") return make_leaf(Op::Push, std::numbers::e);
        if (id == "r2") return make_leaf(Op::R2);
        if (id == "r") return make_leaf(Op::R);
        if (id == "x") return coord(0, start);
        if (id == "y") return coord(1, start);
        if (id.size() > 1 && id[0] == 'x' &&
            id.find_first_not_of("0123456789", 1) == std::string_view::npos) {
            const int k = std::stoi(std::string(id.substr(1)));
            return coord(k - 1, start);
        }
        if (auto it = symbols_.constants.find(id); it != symbols_.constants.end())
            return make_leaf(Op::Push, it->second);
        pos_ = start;
        fail("unknown name '" + std::string(id) + "'");
    }

    NodePtr coord(int k, std::size_t start) {
        if (k < 0 || k >= symbols_.dimension) {
            pos_ = start;
            fail("coordinate index out of range for dimension " + std::to_string(symbols_.dimension));
        }
        return make_leaf(Op::Coord, 0.0, k);
    }
};

bool fold_constants(Node& n) {
    bool all_const = true;
    for (auto& a : n.args) all_const = fold_constants(*a) && all_const;
    if (n.op == Op::Push) return true;
    if (arity(n.op) == 0) return false;
    if (!all_const) return false;
    const double a = n.args[0]->value;
    const double b = n.args.size() > 1 ? n.args[1]->value : 0.0;
    n.value = apply(n.op, a, b);
    n.op = Op::Push;
    n.args.clear();
    return true;
}

} // namespace

class ExpressionCompiler {
public:
    static void emit(const Node& n, Expression& e, int depth) {
        int d = depth;
        for (const auto& a : n.args) emit(*a, e, d++);
        e.code_.push_back({n.op, n.index, n.value});
        e.max_depth_ = std::max(e.max_depth_, depth + 1 + static_cast<int>(n.args.size()));
    }
};

Expression Expression::parse(std::string_view text, const SymbolTable& symbols) {
    Parser parser(text, symbols);
    auto root = parser.parse();
    fold_constants(*root);
    Expression e;
    e.source_ = std::string(text);
    ExpressionCompiler::emit(*root, e, 0);
    return e;
}

Expression Expression::constant(double value) {
    Expression e;
    e.source_ = std::to_string(value);
    e.code_.push_back({Op::Push, 0, value});
    e.max_depth_ = 1;
    return e;
}

bool Expression::is_constant() const noexcept {
    return code_.size() == 1 && code_.front().op == Op::Push;
}

double Expression::operator()(std::span<const double> coords) const {
    constexpr int kInline = 64;
    std::array<double, kInline> small{};
    std::vector<double> big;
    double* stack = small.data();
    if (max_depth_ > kInline) {
        big.resize(static_cast<std::size_t>(max_depth_));
        stack = big.data();
    }
    int top = 0;
    for (const Instr& in : code_) {
        switch (in.op) {
        case Op::Push:
            stack[top++] = in.value;
            break;
        case Op::Coord:
            stack[top++] = coords[static_cast<std::size_t>(in.index)];
            break;
        case Op::R2:
        case Op::R: {
            double s = 0.0;
            for (double c : coords) s += c * c;
            stack[top++] = in.op == Op::R ? std::sqrt(s) : s;
            break;
        }
        default:
            if (arity(in.op) == 2) {
                --top;
                stack[top - 1] = apply(in.op, stack[top - 1], stack[top]);
            } else {
                stack[top - 1] = apply(in.op, stack[top - 1], 0.0);
            }
        }
    }
    return code_.empty() ? 0.0 : stack[0];
}

} // namespace landau
