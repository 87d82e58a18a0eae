#ifndef DRBENCH_RETRIEVAL_HPP
#define DRBENCH_RETRIEVAL_HPP

// Exact top-k cosine search over a flat (exhaustive) index.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <queue>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "drbench/embed.hpp"
#include "drbench/error.hpp"
#include "drbench/parallel.hpp"
#include "drbench/store.hpp"

namespace drbench {

inline double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw InvalidArgument("dimension mismatch: " + std::to_string(u.size()) + " vs " +
                          std::to_string(v.size()));
  }
  double dot = 0.0;
  double uu = 0.0;
  double vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (!(uu > 0.0) || !(vv > 0.0)) throw InvalidArgument("cosine similarity of a zero vector");
  return dot / (std::sqrt(uu) * std::sqrt(vv));
}

struct RankedEntry {
  std::string doc_id;
  double score = 0.0;
  std::size_t rank = 0;  // 1-based

  friend bool operator==(const RankedEntry&, const RankedEntry&) = default;
};

struct RankedList {
  std::string query_id;
  std::vector<RankedEntry> entries;  // rank order

  friend bool operator==(const RankedList&, const RankedList&) = default;
};

// Rows are unit-normalized at build time and ordered by doc id, so the row
// index doubles as the tie-break key.
class FlatIndex {
 public:
  FlatIndex() = default;

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return doc_ids_.size(); }
  const std::vector<std::string>& doc_ids() const noexcept { return doc_ids_; }

  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(matrix_).subspan(i * dim_, dim_);
  }

  friend bool operator==(const FlatIndex&, const FlatIndex&) = default;

 private:
  friend FlatIndex build_index(const EmbeddingStore& store);

  std::size_t dim_ = 0;
  std::vector<std::string> doc_ids_;
  std::vector<float> matrix_;
};

inline FlatIndex build_index(const EmbeddingStore& store) {
  if (store.empty()) throw InvalidArgument("cannot build an index over an empty store");
  if (store.dim == 0) throw InvalidArgument("store dim is zero");
  FlatIndex index;
  index.dim_ = store.dim;
  index.doc_ids_.reserve(store.size());
  index.matrix_.reserve(store.size() * store.dim);
  std::vector<double> scratch(store.dim);
  for (const auto& [id, v] : store.records) {  // std::map: sorted by id
    if (v.size() != store.dim) throw InvalidArgument("vector for \"" + id + "\" has the wrong dim");
    std::copy(v.begin(), v.end(), scratch.begin());
    try {
      normalize_in_place(scratch);
    } catch (const InvalidArgument&) {
      throw InvalidArgument("zero vector for document \"" + id + "\"");
    }
    index.doc_ids_.push_back(id);
    index.matrix_.insert(index.matrix_.end(), scratch.begin(), scratch.end());
  }
  return index;
}

namespace detail {

struct Candidate {
  double score;
  std::size_t row;
};

// Strict "ranks ahead of": higher score, then smaller doc id.
inline bool ranks_ahead(const Candidate& a, const Candidate& b) {
  return a.score > b.score || (a.score == b.score && a.row < b.row);
}

inline std::vector<double> unit_query(const FlatIndex& index, std::span<const double> query) {
  if (query.size() != index.dim()) {
    throw InvalidArgument("query dim " + std::to_string(query.size()) + " does not match index dim " +
                          std::to_string(index.dim()));
  }
  std::vector<double> q(query.begin(), query.end());
  normalize_in_place(q);
  return q;
}

inline double row_score(std::span<const float> row, std::span<const double> q) {
  double s = 0.0;
  for (std::size_t j = 0; j < q.size(); ++j) s += static_cast<double>(row[j]) * q[j];
  return s;
}

}  // namespace detail

// The k best documents by cosine similarity (all of them if k exceeds the
// index size). Equal scores are ordered by doc id.
inline RankedList search(const FlatIndex& index, std::span<const double> query, std::size_t k,
                         std::string query_id = {}) {
  if (k == 0) throw InvalidArgument("k must be at least 1");
  const auto q = detail::unit_query(index, query);
  const std::size_t keep = std::min(k, index.size());

  // Max-heap under ranks_ahead: the top is the weakest of the current best `keep`.
  auto cmp = [](const detail::Candidate& a, const detail::Candidate& b) {
    return detail::ranks_ahead(a, b);
  };
  std::priority_queue<detail::Candidate, std::vector<detail::Candidate>, decltype(cmp)> heap(cmp);
  for (std::size_t i = 0; i < index.size(); ++i) {
    detail::Candidate c{detail::row_score(index.row(i), q), i};
    if (heap.size() < keep) {
      heap.push(c);
    } else if (detail::ranks_ahead(c, heap.top())) {
      heap.pop();
      heap.push(c);
    }
  }

  std::vector<detail::Candidate> best;
  best.reserve(heap.size());
  while (!heap.empty()) {
    best.push_back(heap.top());
    heap.pop();
  }
  std::reverse(best.begin(), best.end());

  RankedList out{std::move(query_id), {}};
  out.entries.reserve(best.size());
  for (std::size_t r = 0; r < best.size(); ++r) {
    out.entries.push_back({index.doc_ids()[best[r].row], best[r].score, r + 1});
  }
  return out;
}

struct QueryVector {
  std::string id;
  EmbeddingVector vector;
};

// Equivalent to calling search() on each query; result order follows input order.
inline std::vector<RankedList> batch_search(const FlatIndex& index, std::span<const QueryVector> queries,
                                            std::size_t k, std::size_t threads = 1) {
  std::vector<RankedList> out(queries.size());
  parallel_for(queries.size(), threads, [&](std::size_t i) {
    out[i] = search(index, queries[i].vector, k, queries[i].id);
  });
  return out;
}

// TREC run format: `query_id Q0 doc_id rank score run_name`.
inline void write_trec_run(std::ostream& out, std::span<const RankedList> run, std::string_view run_name) {
  char buf[64];
  for (const auto& list : run) {
    for (const auto& e : list.entries) {
      auto res = std::to_chars(buf, buf + sizeof(buf), e.score);
      out << list.query_id << " Q0 " << e.doc_id << ' ' << e.rank << ' '
          << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf)) << ' ' << run_name << '\n';
    }
  }
}

}  // namespace drbench

#endif  // DRBENCH_RETRIEVAL_HPP
