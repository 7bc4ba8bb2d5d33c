#pragma once

#include <stdexcept>
#include <string>

namespace lcot {

enum class ErrorCode {
    validation,    // caller supplied bad input or violated a precondition
    not_found,
    parse,         // unparseable file or model output
    backend,       // model backend failure
    no_coverage,   // search found nothing for the requested keyword
    integrity,     // on-disk data failed a checksum or reference check
    runtime,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message, std::string detail = {})
        : std::runtime_error(message), code_(code), detail_(std::move(detail)) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

inline Error validation_error(const std::string& msg, std::string detail = {}) {
    return Error(ErrorCode::validation, msg, std::move(detail));
}

inline Error parse_error(const std::string& msg, std::string raw = {}) {
    return Error(ErrorCode::parse, msg, std::move(raw));
}

} // namespace lcot
