#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

#include "lcot/gateway/gateway.hpp"
#include "lcot/gateway/mock_backend.hpp"

namespace lcot::testing {

// Scratch directory removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("lcot-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline gateway::MockScript script(std::vector<gateway::MockRule> rules, std::string fallback = "OK",
                                  std::int64_t seed = 0) {
    gateway::MockScript s;
    s.seed = seed;
    s.rules = std::move(rules);
    s.default_response = std::move(fallback);
    return s;
}

inline void add_mock(gateway::Gateway& gw, const std::string& id, gateway::MockScript s,
                     const std::string& provider = "") {
    gw.register_backend(gateway::make_mock(id, std::move(s), provider.empty() ? "prov-" + id : provider));
}

inline gateway::BackendSpec spec_of(const std::string& id, const std::string& provider = "test", int slots = 1) {
    gateway::BackendSpec s;
    s.backend_id = id;
    s.provider_name = provider;
    s.endpoint = "test://" + id;
    s.model_name = id;
    s.max_concurrency = slots;
    return s;
}

} // namespace lcot::testing
