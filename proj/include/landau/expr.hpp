#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace landau {

/// Names visible to a field expression besides the coordinates.
struct SymbolTable {
    /// Spatial dimension; coordinates are x1..x<dimension> (x, y alias x1, x2).
    int dimension = 2;
    std::map<std::string, double, std::less<>> constants;
};

/// A closed-form scalar field compiled from text.
///
/// Grammar (usual precedence, `^` right-associative and binding tighter than
/// unary minus):
///
///     expr    := term (('+' | '-') term)*
///     term    := unary (('*' | '/') unary)*
///     unary   := ('-' | '+') unary | power
///     power   := primary ('^' unary)?
///     primary := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
///
/// Names: coordinates `x1`..`xd`, `x`, `y`, `r2` (= |x|^2), `r` (= |x|),
/// `pi`, `e`, and any constant from the symbol table. Functions: sin cos tan
/// exp log sqrt abs tanh sinh cosh atan floor (one argument), atan2 min max pow
/// (two arguments).
///
/// Parsing happens once; evaluation runs a flat stack program and is
/// deterministic and thread-safe.
class Expression {
public:
    Expression() = default;

    static Expression parse(std::string_view text, const SymbolTable& symbols);
    static Expression constant(double value);

    double operator()(std::span<const double> coords) const;

    const std::string& source() const noexcept { return source_; }
    bool is_constant() const noexcept;

    enum class Op : unsigned char {
        Push, Coord, R2, R,
        Add, Sub, Mul, Div, Pow, Neg,
        Sin, Cos, Tan, Exp, Log, Sqrt, Abs, Tanh, Sinh, Cosh, Atan, Floor,
        Atan2, Min, Max,
    };
    struct Instr {
        Op op;
        int index = 0;      // coordinate slot for Coord
        double value = 0.0; // literal for Push
    };

private:
    std::string source_;
    std::vector<Instr> code_;
    int max_depth_ = 0;

    friend class ExpressionCompiler;
};

} // namespace landau
