#include "lcot/common/text.hpp"

#include <algorithm>
#include <cctype>
#include <memory>
#include <mutex>

#include <unicode/brkiter.h>
#include <unicode/unistr.h>
#include <unicode/utext.h>

#include "lcot/common/error.hpp"

namespace lcot {
namespace {

bool is_ascii(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](char c) { return static_cast<unsigned char>(c) < 0x80; });
}

// BreakIterator construction is expensive; clone a prototype per thread.
std::unique_ptr<icu::BreakIterator> make_word_iterator() {
    static std::once_flag once;
    static std::unique_ptr<icu::BreakIterator> prototype;
    static UErrorCode proto_status = U_ZERO_ERROR;
    std::call_once(once, [] {
        prototype.reset(icu::BreakIterator::createWordInstance(icu::Locale::getRoot(), proto_status));
    });
    if (U_FAILURE(proto_status) || !prototype)
        throw Error(ErrorCode::runtime, "ICU word break iterator unavailable");
    return std::unique_ptr<icu::BreakIterator>(prototype->clone());
}

icu::BreakIterator& word_iterator() {
    thread_local std::unique_ptr<icu::BreakIterator> it = make_word_iterator();
    return *it;
}

} // namespace

std::string case_fold(std::string_view text) {
    if (is_ascii(text)) {
        std::string out(text);
        for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        return out;
    }
    icu::UnicodeString u = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
    u.foldCase();
    std::string out;
    u.toUTF8String(out);
    return out;
}

std::vector<Token> tokenize(std::string_view text) {
    std::vector<Token> tokens;
    if (text.empty()) return tokens;
    UErrorCode status = U_ZERO_ERROR;
    UText* ut = utext_openUTF8(nullptr, text.data(), static_cast<int64_t>(text.size()), &status);
    if (U_FAILURE(status)) throw Error(ErrorCode::runtime, "ICU utext_openUTF8 failed");
    auto& it = word_iterator();
    it.setText(ut, status);
    if (U_FAILURE(status)) {
        utext_close(ut);
        throw Error(ErrorCode::runtime, "ICU setText failed");
    }
    int32_t start = it.first();
    for (int32_t end = it.next(); end != icu::BreakIterator::DONE; start = end, end = it.next()) {
        // Rule status ranges: NONE [0,100) covers spaces and punctuation.
        if (it.getRuleStatus() < UBRK_WORD_NONE_LIMIT) continue;
        auto b = static_cast<std::size_t>(start);
        auto e = static_cast<std::size_t>(end);
        tokens.push_back({case_fold(text.substr(b, e - b)), b, e});
    }
    utext_close(ut);
    return tokens;
}

std::vector<std::string> tokenize_terms(std::string_view text) {
    std::vector<std::string> terms;
    for (auto& t : tokenize(text)) terms.push_back(std::move(t.term));
    return terms;
}

std::string normalize_keyword(std::string_view keyword) {
    std::string out;
    for (const auto& t : tokenize(keyword)) {
        if (!out.empty()) out += ' ';
        out += t.term;
    }
    return out;
}

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n\f\v");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n\f\v");
    return std::string(s.substr(b, e - b + 1));
}

std::string collapse_whitespace(std::string_view s) {
    std::string out;
    bool pending = false;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending = !out.empty();
            continue;
        }
        if (pending) out += ' ';
        pending = false;
        out += c;
    }
    return out;
}

std::vector<std::string> split_lines(std::string_view s) {
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        auto nl = s.find('\n', pos);
        if (nl == std::string_view::npos) {
            if (pos < s.size()) lines.emplace_back(s.substr(pos));
            break;
        }
        std::string_view line = s.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.emplace_back(line);
        pos = nl + 1;
    }
    return lines;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
    if (s.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i)
        if (std::tolower(static_cast<unsigned char>(s[i])) != std::tolower(static_cast<unsigned char>(prefix[i])))
            return false;
    return true;
}

std::size_t utf8_floor(std::string_view s, std::size_t pos) {
    if (pos >= s.size()) return s.size();
    while (pos > 0 && (static_cast<unsigned char>(s[pos]) & 0xC0) == 0x80) --pos;
    return pos;
}

FencedBlock first_fenced_block(std::string_view text, std::size_t from) {
    FencedBlock block;
    auto open = text.find("```", from);
    if (open == std::string_view::npos) return block;
    auto tag_end = text.find('\n', open + 3);
    if (tag_end == std::string_view::npos) return block;
    auto close = text.find("```", tag_end + 1);
    if (close == std::string_view::npos) return block;
    block.found = true;
    block.tag = trim(text.substr(open + 3, tag_end - open - 3));
    block.body = std::string(text.substr(tag_end + 1, close - tag_end - 1));
    return block;
}

} // namespace lcot
