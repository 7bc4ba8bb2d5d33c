#pragma once

#include <string>
#include <string_view>
#include <variant>

#include <nlohmann/json.hpp>

#include "lcot/common/domain.hpp"

namespace lcot::consensus {

inline constexpr std::string_view kAnswerMarker = "FINAL_ANSWER:";
inline constexpr double kRelTol = 1e-6;
inline constexpr double kAbsTol = 1e-9;
inline constexpr int kSymbolicSamplePoints = 8;

struct NumericAnswer {
    double value = 0.0;
    std::string unit;  // case-folded, whitespace-free; empty when unitless
};

struct SymbolicAnswer {
    std::string expression;  // whitespace stripped
};

struct ChoiceAnswer {
    char choice = 'A';  // upper case
};

struct CodeAnswer {
    std::string source;
    std::string language;
};

struct FinalAnswer {
    std::variant<NumericAnswer, SymbolicAnswer, ChoiceAnswer, CodeAnswer> value;

    AnswerKind kind() const;
    // Compact text of the populated variant.
    std::string text() const;

    static FinalAnswer numeric(double v, std::string unit = {}) { return {NumericAnswer{v, std::move(unit)}}; }
    static FinalAnswer symbolic(std::string expr) { return {SymbolicAnswer{std::move(expr)}}; }
    static FinalAnswer choice(char c) { return {ChoiceAnswer{c}}; }
    static FinalAnswer code(std::string source, std::string language) {
        return {CodeAnswer{std::move(source), std::move(language)}};
    }
};

void to_json(nlohmann::json& j, const FinalAnswer& a);
void from_json(const nlohmann::json& j, FinalAnswer& a);

// Decides whether a program answer passes the shared scoring harness.
class CodeJudge {
public:
    virtual ~CodeJudge() = default;
    virtual bool passes(const CodeAnswer& program) const = 0;
};

struct Extraction {
    FinalAnswer answer;
    std::string raw_span;  // text following the last marker
};

// Parses the last "FINAL_ANSWER:" line. Code answers take the first fenced block
// after the marker. Throws lcot::Error(parse) when no usable answer exists.
Extraction extract_answer(std::string_view chain_text, AnswerKind kind);

// Parses a bare answer string (no marker) of the given kind.
FinalAnswer parse_answer_text(std::string_view text, AnswerKind kind);

// numeric: |a-b| <= max(abs_tol, rel_tol*max(|a|,|b|)) and equal unit text.
// multiple_choice: case-insensitive letter equality.
// symbolic: equal canonical forms, else agreement on 8 seeded sample points in [-2,2].
// code: both programs pass `judge`; without a judge, identical source text.
// Throws lcot::Error(validation) when kinds disagree.
bool answers_equivalent(const FinalAnswer& a, const FinalAnswer& b, AnswerKind kind, const CodeJudge* judge = nullptr);

bool numbers_close(double a, double b);

} // namespace lcot::consensus
