#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcot/gateway/gateway.hpp"

namespace lcot::gateway {

enum class MockFailure { none, timeout, transport, rejected };

struct MockRule {
    std::string pattern;   // substring of the user prompt; empty matches all
    std::string response;  // template, see render_mock_template
    MockFailure fail = MockFailure::none;
};

struct MockScript {
    std::int64_t seed = 0;
    std::vector<MockRule> rules;
    std::string default_response;
};

void from_json(const nlohmann::json& j, MockRule& r);
void to_json(nlohmann::json& j, const MockRule& r);
void from_json(const nlohmann::json& j, MockScript& s);
void to_json(nlohmann::json& j, const MockScript& s);

// Template slots:
//   {prompt} {system} {seed}      request text and effective seed
//   {field:Name}                  value after "Name:" on the first prompt line starting with it
//   {json:Name}                   same, escaped for embedding inside a JSON string
//   {lines:Prefix}                every prompt line starting with Prefix, newline-joined
//   {hash:N}                      hash(user prompt) mod N, seed independent
//   {rand:N}                      hash(seed, request, slot ordinal) mod N
//   {{ and }}                     literal braces
// Unknown slots are emitted verbatim.
std::string render_mock_template(const std::string& tmpl, const ChatRequest& request, std::int64_t seed);

// First rule whose pattern occurs in the user prompt wins; otherwise
// default_response. Output is a pure function of (script, request).
class MockBackend : public Backend {
public:
    MockBackend(BackendSpec spec, MockScript script);

    const BackendSpec& spec() const override { return spec_; }
    ChatResponse complete(const ChatRequest& request) override;
    const MockScript& script() const { return script_; }

private:
    BackendSpec spec_;
    MockScript script_;
};

// Fills in the offline defaults (provider "mock", endpoint "mock://<id>").
BackendSpec mock_backend(const MockScript& script, std::string backend_id, std::string provider_name = "mock");

std::unique_ptr<Backend> make_mock(std::string backend_id, MockScript script, std::string provider_name = "mock",
                                   int max_concurrency = 4);

} // namespace lcot::gateway
