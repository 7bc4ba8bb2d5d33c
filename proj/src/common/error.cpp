#include "lcot/common/error.hpp"
#include "lcot/common/audit.hpp"

namespace lcot {

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::validation: return "validation";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::parse: return "parse";
    case ErrorCode::backend: return "backend";
    case ErrorCode::no_coverage: return "no_coverage";
    case ErrorCode::integrity: return "integrity";
    case ErrorCode::runtime: return "runtime";
    }
    return "runtime";
}

void to_json(nlohmann::json& j, const AuditEntry& e) {
    j = {{"stage", e.stage}, {"subject", e.subject}, {"message", e.message}};
}

void from_json(const nlohmann::json& j, AuditEntry& e) {
    e.stage = j.at("stage").get<std::string>();
    e.subject = j.at("subject").get<std::string>();
    e.message = j.at("message").get<std::string>();
}

} // namespace lcot
