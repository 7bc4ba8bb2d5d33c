#include "lcot/socrates/curriculum.hpp"

#include "lcot/common/error.hpp"
#include "lcot/common/json_io.hpp"

namespace lcot::socrates {
namespace {

std::string required_string(const nlohmann::json& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key) || !j.at(key).is_string())
        throw validation_error(where + ": missing string field '" + key + "'");
    auto s = j.at(key).get<std::string>();
    if (s.empty()) throw validation_error(where + ": field '" + key + "' must not be empty");
    return s;
}

} // namespace

Curriculum::Curriculum(std::vector<Course> courses, std::vector<Topic> topics)
    : courses_(std::move(courses)), topics_(std::move(topics)) {
    for (std::size_t i = 0; i < courses_.size(); ++i) {
        const auto& c = courses_[i];
        if (c.title.empty()) throw validation_error("course " + c.course_id + " has an empty title");
        if (!course_index_.emplace(c.course_id, i).second) throw validation_error("duplicate course_id " + c.course_id);
    }
    for (std::size_t i = 0; i < topics_.size(); ++i) {
        const auto& t = topics_[i];
        if (!course_index_.contains(t.course_id))
            throw validation_error("topic " + t.topic_id + " references missing course " + t.course_id);
        if (!topic_index_.emplace(t.topic_id, i).second) throw validation_error("duplicate topic_id " + t.topic_id);
    }
}

Curriculum Curriculum::from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("courses") || !j.at("courses").is_array())
        throw validation_error("curriculum must be an object with a 'courses' array");
    std::vector<Course> courses;
    std::vector<Topic> topics;
    for (const auto& cj : j.at("courses")) {
        Course c;
        c.course_id = required_string(cj, "course_id", "course");
        const std::string where = "course " + c.course_id;
        c.title = required_string(cj, "title", where);
        auto disc = parse_discipline(required_string(cj, "discipline", where));
        if (!disc) throw validation_error(where + ": unknown discipline " + cj.at("discipline").dump());
        c.discipline = *disc;
        auto level = parse_course_level(required_string(cj, "level", where));
        if (!level) throw validation_error(where + ": unknown level " + cj.at("level").dump());
        c.level = *level;
        if (cj.contains("topics")) {
            for (const auto& tj : cj.at("topics")) {
                Topic t;
                t.topic_id = required_string(tj, "topic_id", where + " topic");
                t.title = required_string(tj, "title", "topic " + t.topic_id);
                t.course_id = c.course_id;
                topics.push_back(std::move(t));
            }
        }
        courses.push_back(std::move(c));
    }
    if (j.contains("topics")) {
        for (const auto& tj : j.at("topics")) {
            Topic t;
            t.topic_id = required_string(tj, "topic_id", "topic");
            t.course_id = required_string(tj, "course_id", "topic " + t.topic_id);
            t.title = required_string(tj, "title", "topic " + t.topic_id);
            topics.push_back(std::move(t));
        }
    }
    return Curriculum(std::move(courses), std::move(topics));
}

nlohmann::json Curriculum::to_json() const {
    nlohmann::json out = {{"courses", nlohmann::json::array()}};
    for (const auto& c : courses_) {
        nlohmann::json cj = {{"course_id", c.course_id},
                             {"title", c.title},
                             {"discipline", c.discipline},
                             {"level", c.level},
                             {"topics", nlohmann::json::array()}};
        for (const auto* t : topics_of(c.course_id)) cj["topics"].push_back({{"topic_id", t->topic_id}, {"title", t->title}});
        out["courses"].push_back(std::move(cj));
    }
    return out;
}

const Course& Curriculum::course(const std::string& course_id) const {
    auto it = course_index_.find(course_id);
    if (it == course_index_.end()) throw Error(ErrorCode::not_found, "unknown course " + course_id);
    return courses_[it->second];
}

const Topic& Curriculum::topic(const std::string& topic_id) const {
    auto it = topic_index_.find(topic_id);
    if (it == topic_index_.end()) throw Error(ErrorCode::not_found, "unknown topic " + topic_id);
    return topics_[it->second];
}

std::vector<const Topic*> Curriculum::topics_of(const std::string& course_id) const {
    std::vector<const Topic*> out;
    for (const auto& t : topics_)
        if (t.course_id == course_id) out.push_back(&t);
    return out;
}

Curriculum load_curriculum(const std::filesystem::path& path) {
    return Curriculum::from_json(read_json_file(path));
}

} // namespace lcot::socrates
