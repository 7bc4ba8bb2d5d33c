#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace lcot::consensus {

// Small infix expression AST for symbolic final answers: numbers, identifiers,
// + - * / ^ (also **), unary sign, function calls, implicit multiplication.
struct Expr {
    enum class Kind { number, variable, add, mul, div, pow, neg, call };
    Kind kind = Kind::number;
    double number = 0.0;
    std::string name;  // variable or function name
    std::vector<std::unique_ptr<Expr>> args;
};

using ExprPtr = std::unique_ptr<Expr>;

// Throws lcot::Error(parse) on malformed input.
ExprPtr parse_expression(std::string_view text);

// Deterministic string form in which sums and products are flattened and their
// operands sorted, so commutative reorderings print identically.
std::string canonical_form(const Expr& e);

// Identifiers other than function names and the constant pi.
std::set<std::string> free_variables(const Expr& e);

// NaN for domain errors or unbound variables.
double evaluate(const Expr& e, const std::map<std::string, double>& bindings);

std::string strip_whitespace(std::string_view s);

} // namespace lcot::consensus
