#include "lcot/common/json_io.hpp"

#include <fstream>
#include <sstream>
#include <unistd.h>

#include "lcot/common/error.hpp"
#include "lcot/common/text.hpp"

namespace lcot {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::not_found, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::runtime, "cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw Error(ErrorCode::runtime, "short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

json parse_json_text(std::string_view text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        // Translate the byte offset into a line number for humans.
        std::size_t line = 1;
        std::size_t limit = std::min<std::size_t>(e.byte, text.size());
        for (std::size_t i = 0; i < limit; ++i)
            if (text[i] == '\n') ++line;
        throw parse_error(origin + ":" + std::to_string(line) + ": " + e.what());
    }
}

json read_json_file(const std::filesystem::path& path) {
    return parse_json_text(read_file(path), path.string());
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
    std::vector<json> rows;
    auto content = read_file(path);
    std::size_t line_no = 0;
    for (const auto& line : split_lines(content)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            rows.push_back(json::parse(line));
        } catch (const json::parse_error& e) {
            throw parse_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return rows;
}

std::string to_jsonl(const std::vector<json>& rows) {
    std::string out;
    for (const auto& r : rows) {
        out += r.dump();
        out += '\n';
    }
    return out;
}

} // namespace lcot
