#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcot/common/domain.hpp"

namespace lcot::socrates {

struct Course {
    std::string course_id;
    std::string title;
    Discipline discipline = Discipline::physics;
    CourseLevel level = CourseLevel::undergraduate;
};

struct Topic {
    std::string topic_id;
    std::string course_id;
    std::string title;
};

// Courses and their topics, validated for unique ids and resolvable
// topic -> course references.
class Curriculum {
public:
    Curriculum() = default;
    Curriculum(std::vector<Course> courses, std::vector<Topic> topics);

    // Accepts {courses:[{course_id,title,discipline,level,topics:[{topic_id,title}]}]}
    // plus an optional flat top-level "topics" list carrying explicit course_id.
    static Curriculum from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

    const std::vector<Course>& courses() const { return courses_; }
    const std::vector<Topic>& topics() const { return topics_; }

    const Course& course(const std::string& course_id) const;
    const Topic& topic(const std::string& topic_id) const;
    bool has_course(const std::string& course_id) const { return course_index_.contains(course_id); }
    bool has_topic(const std::string& topic_id) const { return topic_index_.contains(topic_id); }
    std::vector<const Topic*> topics_of(const std::string& course_id) const;

private:
    std::vector<Course> courses_;
    std::vector<Topic> topics_;
    std::map<std::string, std::size_t> course_index_;
    std::map<std::string, std::size_t> topic_index_;
};

// Parse errors carry file:line; dangling references and duplicate ids are
// validation errors.
Curriculum load_curriculum(const std::filesystem::path& path);

} // namespace lcot::socrates
