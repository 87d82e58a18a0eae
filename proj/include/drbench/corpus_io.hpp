#ifndef DRBENCH_CORPUS_IO_HPP
#define DRBENCH_CORPUS_IO_HPP

// BEIR-format dataset ingestion: corpus.jsonl, queries.jsonl, qrels/*.tsv.

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "drbench/error.hpp"

namespace drbench {

struct Document {
  std::string id;
  std::string title;
  std::string text;

  friend bool operator==(const Document&, const Document&) = default;
};

struct Query {
  std::string id;
  std::string text;

  friend bool operator==(const Query&, const Query&) = default;
};

struct Judgment {
  std::string query_id;
  std::string doc_id;
  int relevance = 0;

  friend bool operator==(const Judgment&, const Judgment&) = default;
};

// Items in file order plus an id lookup. Immutable once built.
template <typename T>
class Collection {
 public:
  Collection() = default;

  // Lookups resolve a repeated id to its first occurrence; validate_dataset reports repeats.
  explicit Collection(std::vector<T> items) : items_(std::move(items)) {
    by_id_.reserve(items_.size());
    for (std::size_t i = 0; i < items_.size(); ++i) by_id_.emplace(items_[i].id, i);
  }

  const std::vector<T>& items() const noexcept { return items_; }
  std::size_t size() const noexcept { return items_.size(); }
  bool empty() const noexcept { return items_.empty(); }
  auto begin() const noexcept { return items_.begin(); }
  auto end() const noexcept { return items_.end(); }
  const T& operator[](std::size_t i) const { return items_[i]; }

  bool contains(const std::string& id) const { return by_id_.count(id) != 0; }

  const T* find(const std::string& id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &items_[it->second];
  }

  friend bool operator==(const Collection& a, const Collection& b) { return a.items_ == b.items_; }

 private:
  std::vector<T> items_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

using Corpus = Collection<Document>;
using QuerySet = Collection<Query>;

// Judgments in file order, grouped per query for metric evaluation.
class Qrels {
 public:
  using Grades = std::unordered_map<std::string, int>;  // doc_id -> relevance

  Qrels() = default;

  // Throws InvalidArgument on a repeated (query_id, doc_id) pair or a negative grade.
  explicit Qrels(std::vector<Judgment> judgments) : judgments_(std::move(judgments)) {
    for (const auto& j : judgments_) {
      if (j.relevance < 0) {
        throw InvalidArgument("negative relevance for (" + j.query_id + ", " + j.doc_id + ")");
      }
      if (!by_query_[j.query_id].emplace(j.doc_id, j.relevance).second) {
        throw InvalidArgument("duplicate judgment (" + j.query_id + ", " + j.doc_id + ")");
      }
    }
  }

  const std::vector<Judgment>& judgments() const noexcept { return judgments_; }
  std::size_t size() const noexcept { return judgments_.size(); }
  bool empty() const noexcept { return judgments_.empty(); }

  // nullptr when the query has no judgments at all.
  const Grades* grades(const std::string& query_id) const {
    auto it = by_query_.find(query_id);
    return it == by_query_.end() ? nullptr : &it->second;
  }

  // R: number of judged documents with relevance > 0.
  std::size_t positives(const std::string& query_id) const {
    const Grades* g = grades(query_id);
    if (g == nullptr) return 0;
    return static_cast<std::size_t>(
        std::count_if(g->begin(), g->end(), [](const auto& kv) { return kv.second > 0; }));
  }

  friend bool operator==(const Qrels& a, const Qrels& b) { return a.judgments_ == b.judgments_; }

 private:
  std::vector<Judgment> judgments_;
  std::unordered_map<std::string, Grades> by_query_;
};

inline constexpr std::string_view kQrelsHeader = "query-id\tcorpus-id\tscore";

namespace detail {

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

inline void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

inline bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
  });
}

// Reads `_id` as an opaque string. Integer ids (seen in some exports) are kept verbatim.
inline std::string json_id(const nlohmann::json& obj, const std::string& path, std::size_t line) {
  auto it = obj.find("_id");
  if (it == obj.end()) throw ParseError(path, line, "missing field \"_id\"");
  std::string id;
  if (it->is_string()) {
    id = it->get<std::string>();
  } else if (it->is_number_integer()) {
    id = it->dump();
  } else {
    throw ParseError(path, line, "field \"_id\" must be a string");
  }
  if (id.empty()) throw ParseError(path, line, "empty \"_id\"");
  return id;
}

inline std::string json_text(const nlohmann::json& obj, const char* field, bool required,
                             const std::string& path, std::size_t line) {
  auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) {
    if (required) throw ParseError(path, line, std::string("missing field \"") + field + "\"");
    return {};
  }
  if (!it->is_string()) {
    throw ParseError(path, line, std::string("field \"") + field + "\" must be a string");
  }
  return it->get<std::string>();
}

// Calls `on_object(json, line_no)` for every non-blank line of a JSON-lines file.
template <typename F>
void for_each_json_line(const std::filesystem::path& path, F&& on_object) {
  auto in = open_input(path);
  const std::string name = path.string();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (is_blank(line)) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(name, line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!obj.is_object()) throw ParseError(name, line_no, "expected a JSON object");
    on_object(obj, line_no);
  }
}

template <typename T>
void check_unique(std::unordered_map<std::string, std::size_t>& seen, const T& item,
                  const std::string& path, std::size_t line_no) {
  auto [it, inserted] = seen.emplace(item.id, line_no);
  if (!inserted) {
    throw ParseError(path, line_no,
                     "duplicate id \"" + item.id + "\" (first seen on line " +
                         std::to_string(it->second) + ")");
  }
}

}  // namespace detail

inline Corpus load_corpus(const std::filesystem::path& path) {
  std::vector<Document> docs;
  std::unordered_map<std::string, std::size_t> seen;
  const std::string name = path.string();
  detail::for_each_json_line(path, [&](const nlohmann::json& obj, std::size_t line_no) {
    Document doc;
    doc.id = detail::json_id(obj, name, line_no);
    doc.title = detail::json_text(obj, "title", false, name, line_no);
    doc.text = detail::json_text(obj, "text", false, name, line_no);
    if (detail::is_blank(doc.text) && doc.title.empty()) {
      throw ParseError(name, line_no, "document \"" + doc.id + "\" has neither text nor title");
    }
    detail::check_unique(seen, doc, name, line_no);
    docs.push_back(std::move(doc));
  });
  return Corpus(std::move(docs));
}

inline QuerySet load_queries(const std::filesystem::path& path) {
  std::vector<Query> queries;
  std::unordered_map<std::string, std::size_t> seen;
  const std::string name = path.string();
  detail::for_each_json_line(path, [&](const nlohmann::json& obj, std::size_t line_no) {
    Query q;
    q.id = detail::json_id(obj, name, line_no);
    q.text = detail::json_text(obj, "text", true, name, line_no);
    if (detail::is_blank(q.text)) {
      throw ParseError(name, line_no, "query \"" + q.id + "\" has blank text");
    }
    detail::check_unique(seen, q, name, line_no);
    queries.push_back(std::move(q));
  });
  return QuerySet(std::move(queries));
}

inline Qrels load_qrels(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  const std::string name = path.string();
  std::string line;
  std::size_t line_no = 0;

  if (!std::getline(in, line)) throw ParseError(name, 1, "missing header line");
  ++line_no;
  detail::strip_cr(line);
  if (line != kQrelsHeader) {
    throw ParseError(name, 1, "expected header \"query-id<TAB>corpus-id<TAB>score\"");
  }

  std::vector<Judgment> judgments;
  std::map<std::pair<std::string, std::string>, std::size_t> seen;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (detail::is_blank(line)) continue;

    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (std::size_t tab; (tab = rest.find('\t')) != std::string_view::npos;) {
      fields.push_back(rest.substr(0, tab));
      rest.remove_prefix(tab + 1);
    }
    fields.push_back(rest);
    if (fields.size() != 3) {
      throw ParseError(name, line_no,
                       "expected 3 tab-separated fields, got " + std::to_string(fields.size()));
    }
    if (fields[0].empty() || fields[1].empty()) throw ParseError(name, line_no, "empty id");

    int score = 0;
    const auto score_text = fields[2];
    auto [end, ec] = std::from_chars(score_text.data(), score_text.data() + score_text.size(), score);
    if (ec != std::errc() || end != score_text.data() + score_text.size()) {
      throw ParseError(name, line_no, "score \"" + std::string(score_text) + "\" is not an integer");
    }
    if (score < 0) throw ParseError(name, line_no, "negative score");

    Judgment j{std::string(fields[0]), std::string(fields[1]), score};
    auto [it, inserted] = seen.emplace(std::make_pair(j.query_id, j.doc_id), line_no);
    if (!inserted) {
      throw ParseError(name, line_no,
                       "duplicate judgment (" + j.query_id + ", " + j.doc_id +
                           ") first seen on line " + std::to_string(it->second));
    }
    judgments.push_back(std::move(j));
  }
  return Qrels(std::move(judgments));
}

inline void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& d : corpus) {
    out << nlohmann::json{{"_id", d.id}, {"title", d.title}, {"text", d.text}}.dump() << '\n';
  }
}

inline void write_queries(std::ostream& out, const QuerySet& queries) {
  for (const auto& q : queries) out << nlohmann::json{{"_id", q.id}, {"text", q.text}}.dump() << '\n';
}

inline void write_qrels(std::ostream& out, const Qrels& qrels) {
  out << kQrelsHeader << '\n';
  for (const auto& j : qrels.judgments()) {
    out << j.query_id << '\t' << j.doc_id << '\t' << j.relevance << '\n';
  }
}

struct ValidationReport {
  std::size_t documents = 0;
  std::size_t queries = 0;
  std::size_t judgments = 0;
  std::vector<Judgment> dangling_qrels;      // unknown query_id or doc_id
  std::vector<std::string> duplicate_ids;
  std::vector<std::string> zero_positive_queries;  // judged, but no grade > 0
  std::size_t unjudged_queries = 0;                // no judgments at all

  bool valid() const noexcept { return dangling_qrels.empty() && duplicate_ids.empty(); }
};

inline ValidationReport validate_dataset(const Corpus& corpus, const QuerySet& queries,
                                         const Qrels& qrels) {
  ValidationReport report;
  report.documents = corpus.size();
  report.queries = queries.size();
  report.judgments = qrels.size();

  std::set<std::string> seen;
  std::set<std::string> dup;
  for (const auto& d : corpus) {
    if (!seen.insert(d.id).second) dup.insert(d.id);
  }
  seen.clear();
  for (const auto& q : queries) {
    if (!seen.insert(q.id).second) dup.insert(q.id);
  }
  report.duplicate_ids.assign(dup.begin(), dup.end());

  for (const auto& j : qrels.judgments()) {
    if (!queries.contains(j.query_id) || !corpus.contains(j.doc_id)) {
      report.dangling_qrels.push_back(j);
    }
  }

  for (const auto& q : queries) {
    if (qrels.grades(q.id) == nullptr) {
      ++report.unjudged_queries;
    } else if (qrels.positives(q.id) == 0) {
      report.zero_positive_queries.push_back(q.id);
    }
  }
  return report;
}

}  // namespace drbench

#endif  // DRBENCH_CORPUS_IO_HPP
