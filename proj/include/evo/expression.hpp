#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>

namespace evo {

/// Small arithmetic language over sample coordinates, parsed once at config
/// load. Variables: x, y, z (coordinates 0..2) and x0..x9. Operators + - * /
/// and ^ (or **); functions abs, sqrt, exp, log, sin, cos; constants pi, e.
class Expression {
public:
    struct Node;

    /// Throws ConfigError with the column of the first offending character.
    static Expression parse(std::string_view text);

    double evaluate(std::span<const double> x) const;
    /// Largest coordinate index referenced, or -1 for constant expressions.
    int max_variable() const { return max_variable_; }
    const std::string& source() const { return source_; }

private:
    std::shared_ptr<const Node> root_;
    int max_variable_ = -1;
    std::string source_;
};

}  // namespace evo
