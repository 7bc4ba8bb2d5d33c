#include "lcot/consensus/expression.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <functional>
#include <numbers>
#include <unordered_map>

#include "lcot/common/error.hpp"

namespace lcot::consensus {
namespace {

using UnaryFn = double (*)(double);

const std::unordered_map<std::string, UnaryFn>& functions() {
    static const std::unordered_map<std::string, UnaryFn> table = {
        {"sqrt", [](double x) { return std::sqrt(x); }}, {"sin", [](double x) { return std::sin(x); }},
        {"cos", [](double x) { return std::cos(x); }},   {"tan", [](double x) { return std::tan(x); }},
        {"asin", [](double x) { return std::asin(x); }}, {"acos", [](double x) { return std::acos(x); }},
        {"atan", [](double x) { return std::atan(x); }}, {"sinh", [](double x) { return std::sinh(x); }},
        {"cosh", [](double x) { return std::cosh(x); }}, {"tanh", [](double x) { return std::tanh(x); }},
        {"exp", [](double x) { return std::exp(x); }},   {"log", [](double x) { return std::log(x); }},
        {"ln", [](double x) { return std::log(x); }},    {"log10", [](double x) { return std::log10(x); }},
        {"abs", [](double x) { return std::fabs(x); }},
    };
    return table;
}

ExprPtr make(Expr::Kind kind) {
    auto e = std::make_unique<Expr>();
    e->kind = kind;
    return e;
}

ExprPtr binary(Expr::Kind kind, ExprPtr a, ExprPtr b) {
    auto e = make(kind);
    e->args.push_back(std::move(a));
    e->args.push_back(std::move(b));
    return e;
}

bool ident_start(unsigned char c) { return std::isalpha(c) || c == '_' || c >= 0x80; }
bool ident_char(unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; }

class Parser {
public:
    explicit Parser(std::string_view s) : s_(s) {}

    ExprPtr parse() {
        auto e = expr();
        skip();
        if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& why) const {
        throw parse_error("expression: " + why + " at offset " + std::to_string(pos_), std::string(s_));
    }

    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    bool eat(char c) {
        skip();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    char peek() {
        skip();
        return pos_ < s_.size() ? s_[pos_] : '\0';
    }

    ExprPtr expr() {
        auto lhs = term();
        for (;;) {
            if (eat('+')) lhs = binary(Expr::Kind::add, std::move(lhs), term());
            else if (eat('-')) {
                auto neg = make(Expr::Kind::neg);
                neg->args.push_back(term());
                lhs = binary(Expr::Kind::add, std::move(lhs), std::move(neg));
            } else return lhs;
        }
    }

    ExprPtr term() {
        auto lhs = unary();
        for (;;) {
            char c = peek();
            if (c == '*' && !(pos_ + 1 < s_.size() && s_[pos_ + 1] == '*')) {
                ++pos_;
                lhs = binary(Expr::Kind::mul, std::move(lhs), unary());
            } else if (c == '/') {
                ++pos_;
                lhs = binary(Expr::Kind::div, std::move(lhs), unary());
            } else if (c == '(' || std::isdigit(static_cast<unsigned char>(c)) || c == '.' ||
                       ident_start(static_cast<unsigned char>(c))) {
                lhs = binary(Expr::Kind::mul, std::move(lhs), power());  // implicit multiplication
            } else return lhs;
        }
    }

    ExprPtr unary() {
        if (eat('-')) {
            auto e = make(Expr::Kind::neg);
            e->args.push_back(unary());
            return e;
        }
        if (eat('+')) return unary();
        return power();
    }

    ExprPtr power() {
        auto base = primary();
        skip();
        if (eat('^')) return binary(Expr::Kind::pow, std::move(base), unary());
        if (pos_ + 1 < s_.size() && s_[pos_] == '*' && s_[pos_ + 1] == '*') {
            pos_ += 2;
            return binary(Expr::Kind::pow, std::move(base), unary());
        }
        return base;
    }

    ExprPtr primary() {
        skip();
        if (pos_ >= s_.size()) fail("unexpected end");
        unsigned char c = static_cast<unsigned char>(s_[pos_]);
        if (c == '(') {
            ++pos_;
            auto e = expr();
            if (!eat(')')) fail("missing ')'");
            return e;
        }
        if (std::isdigit(c) || c == '.') {
            double v = 0;
            auto [end, ec] = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
            if (ec != std::errc()) fail("bad number");
            pos_ = static_cast<std::size_t>(end - s_.data());
            auto e = make(Expr::Kind::number);
            e->number = v;
            return e;
        }
        if (ident_start(c)) {
            std::size_t start = pos_;
            while (pos_ < s_.size() && ident_char(static_cast<unsigned char>(s_[pos_]))) ++pos_;
            std::string name(s_.substr(start, pos_ - start));
            if (peek() == '(' && functions().contains(name)) {
                ++pos_;
                auto e = make(Expr::Kind::call);
                e->name = std::move(name);
                e->args.push_back(expr());
                if (!eat(')')) fail("missing ')' after call");
                return e;
            }
            auto e = make(Expr::Kind::variable);
            e->name = std::move(name);
            return e;
        }
        fail("unexpected '" + std::string(1, static_cast<char>(c)) + "'");
    }

    std::string_view s_;
    std::size_t pos_ = 0;
};

void flatten(const Expr& e, Expr::Kind kind, std::vector<std::string>& out) {
    if (e.kind == kind) {
        for (const auto& a : e.args) flatten(*a, kind, out);
        return;
    }
    out.push_back(canonical_form(e));
}

std::string number_text(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return ec == std::errc() ? std::string(buf, end) : std::to_string(v);
}

} // namespace

ExprPtr parse_expression(std::string_view text) {
    if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) throw parse_error("empty expression");
    return Parser(text).parse();
}

std::string canonical_form(const Expr& e) {
    switch (e.kind) {
    case Expr::Kind::number: return number_text(e.number);
    case Expr::Kind::variable: return e.name;
    case Expr::Kind::add:
    case Expr::Kind::mul: {
        std::vector<std::string> parts;
        flatten(e, e.kind, parts);
        std::sort(parts.begin(), parts.end());
        std::string out = "(";
        for (std::size_t i = 0; i < parts.size(); ++i) {
            if (i) out += e.kind == Expr::Kind::add ? '+' : '*';
            out += parts[i];
        }
        return out + ")";
    }
    case Expr::Kind::div: return "(" + canonical_form(*e.args[0]) + "/" + canonical_form(*e.args[1]) + ")";
    case Expr::Kind::pow: return "(" + canonical_form(*e.args[0]) + "^" + canonical_form(*e.args[1]) + ")";
    case Expr::Kind::neg: return "(-" + canonical_form(*e.args[0]) + ")";
    case Expr::Kind::call: return e.name + "(" + canonical_form(*e.args[0]) + ")";
    }
    return {};
}

std::set<std::string> free_variables(const Expr& e) {
    std::set<std::string> out;
    std::function<void(const Expr&)> walk = [&](const Expr& x) {
        if (x.kind == Expr::Kind::variable && x.name != "pi") out.insert(x.name);
        for (const auto& a : x.args) walk(*a);
    };
    walk(e);
    return out;
}

double evaluate(const Expr& e, const std::map<std::string, double>& bindings) {
    switch (e.kind) {
    case Expr::Kind::number: return e.number;
    case Expr::Kind::variable: {
        auto it = bindings.find(e.name);
        if (it != bindings.end()) return it->second;
        if (e.name == "pi") return std::numbers::pi;
        return std::numeric_limits<double>::quiet_NaN();
    }
    case Expr::Kind::add: return evaluate(*e.args[0], bindings) + evaluate(*e.args[1], bindings);
    case Expr::Kind::mul: return evaluate(*e.args[0], bindings) * evaluate(*e.args[1], bindings);
    case Expr::Kind::div: return evaluate(*e.args[0], bindings) / evaluate(*e.args[1], bindings);
    case Expr::Kind::pow: return std::pow(evaluate(*e.args[0], bindings), evaluate(*e.args[1], bindings));
    case Expr::Kind::neg: return -evaluate(*e.args[0], bindings);
    case Expr::Kind::call: return functions().at(e.name)(evaluate(*e.args[0], bindings));
    }
    return std::numeric_limits<double>::quiet_NaN();
}

std::string strip_whitespace(std::string_view s) {
    std::string out;
    for (char c : s)
        if (!std::isspace(static_cast<unsigned char>(c))) out += c;
    return out;
}

} // namespace lcot::consensus
