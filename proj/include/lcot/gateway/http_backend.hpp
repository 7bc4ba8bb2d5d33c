#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "lcot/gateway/gateway.hpp"

namespace lcot::gateway {

// Field names of a JSON chat-completion wire format. Defaults follow the common
// OpenAI-compatible shape; each provider may override any of them in config.
struct WireFormat {
    std::string model_field = "model";
    std::string messages_field = "messages";
    std::string temperature_field = "temperature";
    std::string max_tokens_field = "max_tokens";
    std::string seed_field = "seed";
    std::string response_text_pointer = "/choices/0/message/content";
    std::string token_count_pointer = "/usage/total_tokens";
    std::string auth_header = "Authorization";
    std::string auth_prefix = "Bearer ";
};

void from_json(const nlohmann::json& j, WireFormat& w);

// API key env var for a provider: LCOT_API_KEY_<PROVIDER>, upper-cased with
// non-alphanumerics mapped to '_'.
std::string api_key_env_var(const std::string& provider_name);

nlohmann::json build_wire_request(const BackendSpec& spec, const WireFormat& wire, const ChatRequest& request);

class HttpBackend : public Backend {
public:
    HttpBackend(BackendSpec spec, WireFormat wire = {});

    const BackendSpec& spec() const override { return spec_; }
    ChatResponse complete(const ChatRequest& request) override;

private:
    BackendSpec spec_;
    WireFormat wire_;
    std::string scheme_host_port_;
    std::string path_;
};

} // namespace lcot::gateway
