#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace lcot {

struct Token {
    std::string term;   // case-folded
    std::size_t begin;  // byte offsets into the source text
    std::size_t end;
};

// Unicode word segmentation (letters/numbers only) with full case folding.
// No stemming.
std::vector<Token> tokenize(std::string_view text);
std::vector<std::string> tokenize_terms(std::string_view text);

std::string case_fold(std::string_view text);

// Canonical keyword form: case-folded tokens joined by single spaces.
// Idempotent: normalize_keyword(normalize_keyword(k)) == normalize_keyword(k).
std::string normalize_keyword(std::string_view keyword);

std::string trim(std::string_view s);
std::string collapse_whitespace(std::string_view s);
std::vector<std::string> split_lines(std::string_view s);
bool starts_with_ci(std::string_view s, std::string_view prefix);

// Largest offset <= pos that does not split a UTF-8 sequence.
std::size_t utf8_floor(std::string_view s, std::size_t pos);

// Body of the first ```-fenced block (optionally tagged), or nullopt-like empty
// flag when absent.
struct FencedBlock {
    bool found = false;
    std::string tag;
    std::string body;
};
FencedBlock first_fenced_block(std::string_view text, std::size_t from = 0);

} // namespace lcot
