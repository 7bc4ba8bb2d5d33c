#include "lcot/consensus/answer.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <random>

#include "lcot/common/error.hpp"
#include "lcot/common/hash.hpp"
#include "lcot/common/text.hpp"
#include "lcot/consensus/expression.hpp"

namespace lcot::consensus {
namespace {

template <class... Ts> struct overloaded : Ts... { using Ts::operator()...; };
template <class... Ts> overloaded(Ts...) -> overloaded<Ts...>;

std::string format_number(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

// Drops wrappers solvers like to put around a value: "$...$", "\boxed{...}", a
// trailing period.
std::string unwrap(std::string_view raw) {
    std::string s = trim(raw);
    for (bool changed = true; changed && !s.empty();) {
        changed = false;
        if (s.size() >= 2 && s.front() == '$' && s.back() == '$') {
            s = trim(s.substr(1, s.size() - 2));
            changed = true;
        }
        if (s.starts_with("\\boxed{") && s.back() == '}') {
            s = trim(s.substr(7, s.size() - 8));
            changed = true;
        }
        if (!s.empty() && s.back() == '.') {
            s.pop_back();
            s = trim(s);
            changed = true;
        }
    }
    return s;
}

NumericAnswer parse_numeric(std::string_view raw) {
    std::string s = unwrap(raw);
    std::size_t pos = 0;
    if (!s.empty() && s[0] == '+') pos = 1;
    double v = 0;
    auto [end, ec] = std::from_chars(s.data() + pos, s.data() + s.size(), v);
    if (ec != std::errc() || !std::isfinite(v)) throw parse_error("not a number: '" + s + "'", std::string(raw));
    std::string unit = case_fold(strip_whitespace(std::string_view(end, static_cast<std::size_t>(s.data() + s.size() - end))));
    return {v, unit};
}

ChoiceAnswer parse_choice(std::string_view raw) {
    std::string s = unwrap(raw);
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && !std::isalnum(static_cast<unsigned char>(s[i]))) ++i;
        std::size_t start = i;
        while (i < s.size() && std::isalnum(static_cast<unsigned char>(s[i]))) ++i;
        if (i - start == 1 && std::isalpha(static_cast<unsigned char>(s[start])))
            return {static_cast<char>(std::toupper(static_cast<unsigned char>(s[start])))};
    }
    throw parse_error("no choice letter in '" + s + "'", std::string(raw));
}

SymbolicAnswer parse_symbolic(std::string_view raw) {
    std::string s = strip_whitespace(unwrap(raw));
    parse_expression(s);  // validates
    return {s};
}

bool symbolic_equivalent(const std::string& a, const std::string& b) {
    if (a == b) return true;
    ExprPtr ea, eb;
    try {
        ea = parse_expression(a);
        eb = parse_expression(b);
    } catch (const Error&) {
        return false;
    }
    if (canonical_form(*ea) == canonical_form(*eb)) return true;

    auto vars = free_variables(*ea);
    vars.merge(free_variables(*eb));
    // Seeded from the unordered pair so the comparison is symmetric and reproducible.
    std::uint64_t ha = fnv1a64(a), hb = fnv1a64(b);
    std::mt19937_64 rng(mix64(std::min(ha, hb) ^ mix64(std::max(ha, hb))));
    std::uniform_real_distribution<double> dist(-2.0, 2.0);

    int agreed = 0;
    for (int draw = 0; draw < 256 && agreed < kSymbolicSamplePoints; ++draw) {
        std::map<std::string, double> binding;
        for (const auto& v : vars) binding[v] = dist(rng);
        double va = evaluate(*ea, binding), vb = evaluate(*eb, binding);
        if (!std::isfinite(va) || !std::isfinite(vb)) continue;
        if (!numbers_close(va, vb)) return false;
        ++agreed;
    }
    return agreed == kSymbolicSamplePoints;
}

} // namespace

AnswerKind FinalAnswer::kind() const {
    return std::visit(overloaded{
                          [](const NumericAnswer&) { return AnswerKind::numeric; },
                          [](const SymbolicAnswer&) { return AnswerKind::symbolic; },
                          [](const ChoiceAnswer&) { return AnswerKind::multiple_choice; },
                          [](const CodeAnswer&) { return AnswerKind::code; },
                      },
                      value);
}

std::string FinalAnswer::text() const {
    return std::visit(overloaded{
                          [](const NumericAnswer& n) {
                              return n.unit.empty() ? format_number(n.value) : format_number(n.value) + " " + n.unit;
                          },
                          [](const SymbolicAnswer& s) { return s.expression; },
                          [](const ChoiceAnswer& c) { return std::string(1, c.choice); },
                          [](const CodeAnswer& c) { return c.source; },
                      },
                      value);
}

void to_json(nlohmann::json& j, const FinalAnswer& a) {
    j = {{"kind", a.kind()}};
    std::visit(overloaded{
                   [&](const NumericAnswer& n) {
                       j["value"] = n.value;
                       j["unit"] = n.unit;
                   },
                   [&](const SymbolicAnswer& s) { j["expression"] = s.expression; },
                   [&](const ChoiceAnswer& c) { j["choice"] = std::string(1, c.choice); },
                   [&](const CodeAnswer& c) {
                       j["source"] = c.source;
                       j["language"] = c.language;
                   },
               },
               a.value);
}

void from_json(const nlohmann::json& j, FinalAnswer& a) {
    AnswerKind kind = j.at("kind").get<AnswerKind>();
    switch (kind) {
    case AnswerKind::numeric: a = FinalAnswer::numeric(j.at("value").get<double>(), j.value("unit", "")); break;
    case AnswerKind::symbolic: a = FinalAnswer::symbolic(j.at("expression").get<std::string>()); break;
    case AnswerKind::multiple_choice: {
        auto c = j.at("choice").get<std::string>();
        if (c.size() != 1 || !std::isalpha(static_cast<unsigned char>(c[0])))
            throw validation_error("choice must be a single letter", c);
        a = FinalAnswer::choice(static_cast<char>(std::toupper(static_cast<unsigned char>(c[0]))));
        break;
    }
    case AnswerKind::code:
        a = FinalAnswer::code(j.at("source").get<std::string>(), j.value("language", "python"));
        break;
    }
}

FinalAnswer parse_answer_text(std::string_view text, AnswerKind kind) {
    switch (kind) {
    case AnswerKind::numeric: return {parse_numeric(text)};
    case AnswerKind::symbolic: return {parse_symbolic(text)};
    case AnswerKind::multiple_choice: return {parse_choice(text)};
    case AnswerKind::code: {
        auto block = first_fenced_block(text);
        if (block.found) return FinalAnswer::code(block.body, block.tag.empty() ? "python" : block.tag);
        std::string src = trim(text);
        if (src.empty()) throw parse_error("empty program");
        return FinalAnswer::code(src, "python");
    }
    }
    throw parse_error("unknown answer kind");
}

Extraction extract_answer(std::string_view chain_text, AnswerKind kind) {
    if (trim(chain_text).empty()) throw validation_error("chain text is empty");
    std::size_t at = chain_text.rfind(kAnswerMarker);
    if (at == std::string_view::npos) throw parse_error("no final answer marker", std::string(chain_text.substr(0, 200)));
    std::string_view after = chain_text.substr(at + kAnswerMarker.size());

    if (kind == AnswerKind::code) {
        auto block = first_fenced_block(after);
        if (!block.found) throw parse_error("no fenced program after final answer marker");
        return {FinalAnswer::code(block.body, block.tag.empty() ? "python" : block.tag), std::string(after)};
    }
    std::string_view line = after.substr(0, after.find('\n'));
    std::string span = trim(line);
    if (span.empty()) throw parse_error("empty final answer");
    return {parse_answer_text(span, kind), span};
}

bool numbers_close(double a, double b) {
    return std::fabs(a - b) <= std::max(kAbsTol, kRelTol * std::max(std::fabs(a), std::fabs(b)));
}

bool answers_equivalent(const FinalAnswer& a, const FinalAnswer& b, AnswerKind kind, const CodeJudge* judge) {
    if (a.kind() != kind || b.kind() != kind)
        throw validation_error("answer kind mismatch", std::string(to_string(a.kind())) + " vs " +
                                                           std::string(to_string(b.kind())) + " for " +
                                                           std::string(to_string(kind)));
    switch (kind) {
    case AnswerKind::numeric: {
        const auto& x = std::get<NumericAnswer>(a.value);
        const auto& y = std::get<NumericAnswer>(b.value);
        return x.unit == y.unit && numbers_close(x.value, y.value);
    }
    case AnswerKind::multiple_choice:
        return std::toupper(static_cast<unsigned char>(std::get<ChoiceAnswer>(a.value).choice)) ==
               std::toupper(static_cast<unsigned char>(std::get<ChoiceAnswer>(b.value).choice));
    case AnswerKind::symbolic:
        return symbolic_equivalent(std::get<SymbolicAnswer>(a.value).expression,
                                   std::get<SymbolicAnswer>(b.value).expression);
    case AnswerKind::code: {
        const auto& x = std::get<CodeAnswer>(a.value);
        const auto& y = std::get<CodeAnswer>(b.value);
        if (!judge) return x.source == y.source && x.language == y.language;
        return judge->passes(x) && judge->passes(y);
    }
    }
    return false;
}

} // namespace lcot::consensus
