#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace lcot {

using json = nlohmann::json;

std::string read_file(const std::filesystem::path& path);

// Write to a sibling temp file then rename, so readers never see a torn file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

json read_json_file(const std::filesystem::path& path);
json parse_json_text(std::string_view text, const std::string& origin);

std::vector<json> read_jsonl(const std::filesystem::path& path);
std::string to_jsonl(const std::vector<json>& rows);

template <typename T>
std::string to_jsonl_of(const std::vector<T>& items) {
    std::string out;
    for (const auto& item : items) {
        out += json(item).dump();
        out += '\n';
    }
    return out;
}

template <typename T>
std::vector<T> read_jsonl_of(const std::filesystem::path& path) {
    std::vector<T> out;
    for (auto& row : read_jsonl(path)) out.push_back(row.get<T>());
    return out;
}

} // namespace lcot
