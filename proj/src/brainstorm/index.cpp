#include "lcot/brainstorm/index.hpp"

#include <algorithm>
#include <cstring>
#include <unordered_map>

#include "lcot/common/error.hpp"
#include "lcot/common/hash.hpp"
#include "lcot/common/json_io.hpp"
#include "lcot/common/parallel.hpp"
#include "lcot/common/text.hpp"

namespace fs = std::filesystem;

namespace lcot::brainstorm {
namespace {

constexpr const char* kFormat = "lcot-index";
constexpr char kMagic[8] = {'L', 'C', 'O', 'T', 'I', 'D', 'X', '1'};

using PhraseTable = std::unordered_map<std::string, std::vector<std::vector<std::string>>>;

PhraseTable phrase_table(const std::set<std::string>& phrases) {
    PhraseTable table;
    for (const auto& p : phrases) {
        auto tokens = tokenize_terms(p);
        if (tokens.size() >= 2) table[tokens.front()].push_back(std::move(tokens));
    }
    return table;
}

void count_terms(const std::vector<std::string>& tokens, const PhraseTable& phrases,
                 std::map<std::string, std::uint32_t>& counts) {
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        ++counts[tokens[i]];
        auto it = phrases.find(tokens[i]);
        if (it == phrases.end()) continue;
        for (const auto& phrase : it->second) {
            if (i + phrase.size() > tokens.size()) continue;
            if (std::equal(phrase.begin(), phrase.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) {
                std::string key = phrase[0];
                for (std::size_t k = 1; k < phrase.size(); ++k) key += " " + phrase[k];
                ++counts[key];
            }
        }
    }
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

void put_str(std::string& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out += s;
}

class Reader {
public:
    explicit Reader(const std::string& data) : data_(data) {}
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::string str() {
        auto n = u32();
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    void expect(const char* bytes, std::size_t n) {
        need(n);
        if (std::memcmp(data_.data() + pos_, bytes, n) != 0) throw Error(ErrorCode::integrity, "index.bin: bad magic");
        pos_ += n;
    }
    bool done() const { return pos_ == data_.size(); }

private:
    void need(std::size_t n) const {
        if (pos_ + n > data_.size()) throw Error(ErrorCode::integrity, "index.bin: truncated");
    }
    const std::string& data_;
    std::size_t pos_ = 0;
};

double average_length(const std::vector<IndexedDoc>& docs) {
    if (docs.empty()) return 0.0;
    double sum = 0;
    for (const auto& d : docs) sum += d.length;
    return sum / double(docs.size());
}

} // namespace

const IndexedDoc* Index::find(const std::string& qa_id) const {
    auto it = std::lower_bound(docs.begin(), docs.end(), qa_id,
                               [](const IndexedDoc& d, const std::string& id) { return d.qa_id < id; });
    return it != docs.end() && it->qa_id == qa_id ? &*it : nullptr;
}

std::size_t Index::df(const std::string& term) const {
    auto it = postings.find(term);
    return it == postings.end() ? 0 : it->second.size();
}

Index build_index(const store::KnowledgeStore& store, const IndexOptions& options) {
    return build_index(store.scan(), options);
}

Index build_index(const std::vector<store::VerifiedQA>& input, const IndexOptions& options) {
    if (input.empty()) throw validation_error("cannot build an index over an empty store");
    std::vector<const store::VerifiedQA*> records;
    for (const auto& q : input) records.push_back(&q);
    std::sort(records.begin(), records.end(), [](auto* a, auto* b) { return a->qa_id < b->qa_id; });

    Index index;
    for (const auto* q : records)
        for (const auto& kw : q->keywords) {
            auto n = normalize_keyword(kw);
            if (n.find(' ') != std::string::npos) index.phrases.insert(n);
        }
    for (const auto& p : options.phrases) {
        auto n = normalize_keyword(p);
        if (n.find(' ') != std::string::npos) index.phrases.insert(n);
    }
    auto table = phrase_table(index.phrases);

    std::vector<std::map<std::string, std::uint32_t>> counts(records.size());
    index.docs.resize(records.size());
    parallel_for(records.size(), options.workers, [&](std::size_t i) {
        const auto& q = *records[i];
        auto question = tokenize_terms(q.question);
        auto chain = tokenize_terms(q.chain_text);
        count_terms(question, table, counts[i]);
        count_terms(chain, table, counts[i]);
        auto& d = index.docs[i];
        d.qa_id = q.qa_id;
        d.course_id = q.course_id;
        d.length = static_cast<std::uint32_t>(question.size() + chain.size());
        d.text = q.question + "\n" + q.chain_text;
        d.question_bytes = static_cast<std::uint32_t>(q.question.size());
    });
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (i && records[i]->qa_id == records[i - 1]->qa_id)
            throw validation_error("duplicate qa_id in index input: " + records[i]->qa_id);
        for (const auto& [term, tf] : counts[i])
            index.postings[term].push_back({static_cast<std::uint32_t>(i), tf});
    }
    index.avg_doc_length = average_length(index.docs);
    return index;
}

std::string serialize_postings(const Index& index) {
    std::string out(kMagic, sizeof kMagic);
    put_u32(out, static_cast<std::uint32_t>(index.postings.size()));
    for (const auto& [term, list] : index.postings) {
        put_str(out, term);
        put_u32(out, static_cast<std::uint32_t>(list.size()));
        for (const auto& p : list) {
            put_u32(out, p.doc);
            put_u32(out, p.tf);
        }
    }
    put_u32(out, static_cast<std::uint32_t>(index.docs.size()));
    for (const auto& d : index.docs) put_str(out, d.text);
    return out;
}

void save_index(const Index& index, const fs::path& dir) {
    fs::create_directories(dir);
    auto bin = serialize_postings(index);
    nlohmann::json docs = nlohmann::json::array();
    for (const auto& d : index.docs)
        docs.push_back({{"qa_id", d.qa_id}, {"course_id", d.course_id}, {"length", d.length},
                        {"question_bytes", d.question_bytes}});
    nlohmann::json meta = {{"format", kFormat},
                           {"version", 1},
                           {"doc_count", index.doc_count()},
                           {"avg_doc_length", index.avg_doc_length},
                           {"terms", index.postings.size()},
                           {"phrases", index.phrases},
                           {"bm25", {{"k1", 1.2}, {"b", 0.75}}},
                           {"bin_sha256", sha256_hex(bin)},
                           {"docs", std::move(docs)}};
    write_file_atomic(dir / "index.bin", bin);
    write_file_atomic(dir / "index.json", meta.dump(1) + "\n");
}

Index load_index(const fs::path& dir) {
    if (!fs::exists(dir / "index.json")) throw Error(ErrorCode::not_found, "no index at " + dir.string());
    auto meta = read_json_file(dir / "index.json");
    if (meta.value("format", "") != kFormat) throw Error(ErrorCode::integrity, "not an index: " + dir.string());
    auto bin = read_file(dir / "index.bin");
    if (sha256_hex(bin) != meta.at("bin_sha256").get<std::string>())
        throw Error(ErrorCode::integrity, "index.bin checksum mismatch in " + dir.string());

    Index index;
    for (const auto& d : meta.at("docs")) {
        IndexedDoc doc;
        doc.qa_id = d.at("qa_id").get<std::string>();
        doc.course_id = d.at("course_id").get<std::string>();
        doc.length = d.at("length").get<std::uint32_t>();
        doc.question_bytes = d.at("question_bytes").get<std::uint32_t>();
        index.docs.push_back(std::move(doc));
    }
    index.phrases = meta.at("phrases").get<std::set<std::string>>();

    Reader r(bin);
    r.expect(kMagic, sizeof kMagic);
    auto terms = r.u32();
    for (std::uint32_t t = 0; t < terms; ++t) {
        auto term = r.str();
        auto n = r.u32();
        std::vector<Posting> list(n);
        for (auto& p : list) {
            p.doc = r.u32();
            p.tf = r.u32();
            if (p.doc >= index.docs.size()) throw Error(ErrorCode::integrity, "index.bin: posting out of range");
        }
        index.postings.emplace(std::move(term), std::move(list));
    }
    if (r.u32() != index.docs.size()) throw Error(ErrorCode::integrity, "index.bin: doc table mismatch");
    for (auto& d : index.docs) d.text = r.str();
    if (!r.done()) throw Error(ErrorCode::integrity, "index.bin: trailing bytes");
    index.avg_doc_length = average_length(index.docs);
    return index;
}

} // namespace lcot::brainstorm
