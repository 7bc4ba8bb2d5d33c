#pragma once

#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace lcot {

enum class Discipline { mathematics, physics, chemistry, biology, engineering, computation };
enum class CourseLevel { undergraduate, graduate };
enum class TargetLevel { high_school, undergraduate, graduate };
enum class Category { reductionist, application };
enum class AnswerKind { numeric, symbolic, multiple_choice, code };

std::string_view to_string(Discipline d);
std::string_view to_string(CourseLevel l);
std::string_view to_string(TargetLevel l);
std::string_view to_string(Category c);
std::string_view to_string(AnswerKind k);

std::optional<Discipline> parse_discipline(std::string_view s);
std::optional<CourseLevel> parse_course_level(std::string_view s);
std::optional<TargetLevel> parse_target_level(std::string_view s);
std::optional<Category> parse_category(std::string_view s);
// Accepts the canonical kinds plus "calculation" as an alias for numeric.
std::optional<AnswerKind> parse_answer_kind(std::string_view s);

void to_json(nlohmann::json& j, Discipline v);
void from_json(const nlohmann::json& j, Discipline& v);
void to_json(nlohmann::json& j, CourseLevel v);
void from_json(const nlohmann::json& j, CourseLevel& v);
void to_json(nlohmann::json& j, TargetLevel v);
void from_json(const nlohmann::json& j, TargetLevel& v);
void to_json(nlohmann::json& j, Category v);
void from_json(const nlohmann::json& j, Category& v);
void to_json(nlohmann::json& j, AnswerKind v);
void from_json(const nlohmann::json& j, AnswerKind& v);

} // namespace lcot
