#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace lcot {

// One record of a skipped, rejected or downgraded item. Operations that drop
// inputs append here instead of discarding silently.
struct AuditEntry {
    std::string stage;
    std::string subject;
    std::string message;
};

using AuditLog = std::vector<AuditEntry>;

inline void audit(AuditLog* log, std::string stage, std::string subject, std::string message) {
    if (log) log->push_back({std::move(stage), std::move(subject), std::move(message)});
}

void to_json(nlohmann::json& j, const AuditEntry& e);
void from_json(const nlohmann::json& j, AuditEntry& e);

} // namespace lcot
