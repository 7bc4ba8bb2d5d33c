#include "lcot/gateway/http_backend.hpp"

#include <cctype>
#include <chrono>
#include <cstdlib>

#include <httplib.h>

namespace lcot::gateway {

void from_json(const nlohmann::json& j, WireFormat& w) {
    WireFormat d;
    w.model_field = j.value("model_field", d.model_field);
    w.messages_field = j.value("messages_field", d.messages_field);
    w.temperature_field = j.value("temperature_field", d.temperature_field);
    w.max_tokens_field = j.value("max_tokens_field", d.max_tokens_field);
    w.seed_field = j.value("seed_field", d.seed_field);
    w.response_text_pointer = j.value("response_text_pointer", d.response_text_pointer);
    w.token_count_pointer = j.value("token_count_pointer", d.token_count_pointer);
    w.auth_header = j.value("auth_header", d.auth_header);
    w.auth_prefix = j.value("auth_prefix", d.auth_prefix);
}

std::string api_key_env_var(const std::string& provider_name) {
    std::string var = "LCOT_API_KEY_";
    for (char c : provider_name)
        var += std::isalnum(static_cast<unsigned char>(c)) ? static_cast<char>(std::toupper(static_cast<unsigned char>(c))) : '_';
    return var;
}

nlohmann::json build_wire_request(const BackendSpec& spec, const WireFormat& wire, const ChatRequest& request) {
    nlohmann::json messages = nlohmann::json::array();
    if (!request.system_prompt.empty()) messages.push_back({{"role", "system"}, {"content", request.system_prompt}});
    messages.push_back({{"role", "user"}, {"content", request.user_prompt}});
    nlohmann::json body;
    body[wire.model_field] = spec.model_name;
    body[wire.messages_field] = std::move(messages);
    body[wire.temperature_field] = request.temperature;
    body[wire.max_tokens_field] = request.max_tokens;
    if (request.seed && !wire.seed_field.empty()) body[wire.seed_field] = *request.seed;
    return body;
}

HttpBackend::HttpBackend(BackendSpec spec, WireFormat wire) : spec_(std::move(spec)), wire_(std::move(wire)) {
    const auto& url = spec_.endpoint;
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw validation_error("endpoint must be an absolute URL: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    scheme_host_port_ = url.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
}

ChatResponse HttpBackend::complete(const ChatRequest& request) {
    auto start = std::chrono::steady_clock::now();
    httplib::Client client(scheme_host_port_);
    auto secs = static_cast<time_t>(spec_.timeout_s);
    auto usecs = static_cast<time_t>((spec_.timeout_s - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    httplib::Headers headers;
    if (const char* key = std::getenv(api_key_env_var(spec_.provider_name).c_str()))
        headers.emplace(wire_.auth_header, wire_.auth_prefix + key);

    auto body = build_wire_request(spec_, wire_, request).dump();
    auto res = client.Post(path_, headers, body, "application/json");
    if (!res) {
        auto err = res.error();
        auto kind = err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout ? FailureKind::timeout
                                                                                            : FailureKind::transport;
        throw BackendError(kind, spec_.backend_id, "http error: " + httplib::to_string(err));
    }
    if (res->status >= 400 && res->status < 500)
        throw BackendError(FailureKind::rejected, spec_.backend_id,
                           "provider rejected request (" + std::to_string(res->status) + "): " + res->body);
    if (res->status >= 500)
        throw BackendError(FailureKind::transport, spec_.backend_id, "provider error " + std::to_string(res->status));

    nlohmann::json payload;
    try {
        payload = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error&) {
        throw BackendError(FailureKind::transport, spec_.backend_id, "provider returned non-JSON body");
    }
    ChatResponse out;
    out.backend_id = spec_.backend_id;
    const nlohmann::json::json_pointer text_ptr(wire_.response_text_pointer);
    if (!payload.contains(text_ptr) || !payload.at(text_ptr).is_string())
        throw BackendError(FailureKind::rejected, spec_.backend_id,
                           "response lacks text at " + wire_.response_text_pointer);
    out.text = payload.at(text_ptr).get<std::string>();
    if (!wire_.token_count_pointer.empty()) {
        const nlohmann::json::json_pointer tok_ptr(wire_.token_count_pointer);
        if (payload.contains(tok_ptr) && payload.at(tok_ptr).is_number_integer())
            out.token_count = payload.at(tok_ptr).get<std::int64_t>();
    }
    out.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
    return out;
}

} // namespace lcot::gateway
