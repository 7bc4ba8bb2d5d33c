#include "lcot/common/domain.hpp"

#include <array>
#include <utility>

#include "lcot/common/error.hpp"

namespace lcot {
namespace {

template <typename E, std::size_t N>
using Names = std::array<std::pair<E, std::string_view>, N>;

constexpr Names<Discipline, 6> kDisciplines{{{Discipline::mathematics, "mathematics"},
                                             {Discipline::physics, "physics"},
                                             {Discipline::chemistry, "chemistry"},
                                             {Discipline::biology, "biology"},
                                             {Discipline::engineering, "engineering"},
                                             {Discipline::computation, "computation"}}};
constexpr Names<CourseLevel, 2> kCourseLevels{{{CourseLevel::undergraduate, "undergraduate"},
                                               {CourseLevel::graduate, "graduate"}}};
constexpr Names<TargetLevel, 3> kTargetLevels{{{TargetLevel::high_school, "high_school"},
                                               {TargetLevel::undergraduate, "undergraduate"},
                                               {TargetLevel::graduate, "graduate"}}};
constexpr Names<Category, 2> kCategories{{{Category::reductionist, "reductionist"},
                                          {Category::application, "application"}}};
constexpr Names<AnswerKind, 4> kAnswerKinds{{{AnswerKind::numeric, "numeric"},
                                             {AnswerKind::symbolic, "symbolic"},
                                             {AnswerKind::multiple_choice, "multiple_choice"},
                                             {AnswerKind::code, "code"}}};

template <typename E, std::size_t N>
std::string_view name_of(const Names<E, N>& names, E v) {
    for (const auto& [e, n] : names)
        if (e == v) return n;
    return "?";
}

template <typename E, std::size_t N>
std::optional<E> value_of(const Names<E, N>& names, std::string_view s) {
    for (const auto& [e, n] : names)
        if (n == s) return e;
    return std::nullopt;
}

template <typename E>
E require(std::optional<E> v, const nlohmann::json& j, const char* what) {
    if (!v) throw validation_error(std::string("invalid ") + what + ": " + j.dump());
    return *v;
}

} // namespace

std::string_view to_string(Discipline d) { return name_of(kDisciplines, d); }
std::string_view to_string(CourseLevel l) { return name_of(kCourseLevels, l); }
std::string_view to_string(TargetLevel l) { return name_of(kTargetLevels, l); }
std::string_view to_string(Category c) { return name_of(kCategories, c); }
std::string_view to_string(AnswerKind k) { return name_of(kAnswerKinds, k); }

std::optional<Discipline> parse_discipline(std::string_view s) { return value_of(kDisciplines, s); }
std::optional<CourseLevel> parse_course_level(std::string_view s) { return value_of(kCourseLevels, s); }
std::optional<TargetLevel> parse_target_level(std::string_view s) { return value_of(kTargetLevels, s); }
std::optional<Category> parse_category(std::string_view s) { return value_of(kCategories, s); }
std::optional<AnswerKind> parse_answer_kind(std::string_view s) {
    if (s == "calculation") return AnswerKind::numeric;
    return value_of(kAnswerKinds, s);
}

#define LCOT_ENUM_JSON(Type, parser, label)                                                  \
    void to_json(nlohmann::json& j, Type v) { j = std::string(to_string(v)); }                \
    void from_json(const nlohmann::json& j, Type& v) {                                         \
        v = require(j.is_string() ? parser(j.get<std::string>()) : std::nullopt, j, label);    \
    }

LCOT_ENUM_JSON(Discipline, parse_discipline, "discipline")
LCOT_ENUM_JSON(CourseLevel, parse_course_level, "course level")
LCOT_ENUM_JSON(TargetLevel, parse_target_level, "target level")
LCOT_ENUM_JSON(Category, parse_category, "category")
LCOT_ENUM_JSON(AnswerKind, parse_answer_kind, "answer type")

#undef LCOT_ENUM_JSON

} // namespace lcot
