#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "lcot/store/knowledge_store.hpp"

namespace lcot::brainstorm {

struct Posting {
    std::uint32_t doc = 0;  // position in Index::docs, which is qa_id order
    std::uint32_t tf = 0;
};

struct IndexedDoc {
    std::string qa_id;
    std::string course_id;
    std::uint32_t length = 0;  // tokens in question + chain
    // question + "\n" + chain_text; the first question_bytes bytes are the question.
    std::string text;
    std::uint32_t question_bytes = 0;
};

// Inverted index over question + chain_text. Single tokens are keyed by their
// case-folded form; multiword phrases (from the phrase vocabulary) are keyed by
// their normalized text and count exact token-sequence occurrences.
struct Index {
    std::vector<IndexedDoc> docs;
    std::map<std::string, std::vector<Posting>> postings;
    std::set<std::string> phrases;
    double avg_doc_length = 0.0;

    std::size_t doc_count() const { return docs.size(); }
    const IndexedDoc* find(const std::string& qa_id) const;
    std::size_t df(const std::string& term) const;
};

struct IndexOptions {
    // Extra multiword phrases to index besides every record keyword.
    std::vector<std::string> phrases;
    std::size_t workers = 4;
};

// Throws validation error on an empty store.
Index build_index(const store::KnowledgeStore& store, const IndexOptions& options = {});
Index build_index(const std::vector<store::VerifiedQA>& records, const IndexOptions& options = {});

// index.json carries metadata and the doc table; index.bin carries postings and
// doc texts. Output is a pure function of the index.
void save_index(const Index& index, const std::filesystem::path& dir);
Index load_index(const std::filesystem::path& dir);
std::string serialize_postings(const Index& index);

} // namespace lcot::brainstorm
