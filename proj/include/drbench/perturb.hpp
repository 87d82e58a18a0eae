#ifndef DRBENCH_PERTURB_HPP
#define DRBENCH_PERTURB_HPP

// Token-ID poisoning: with probability epsilon per position, add a random
// offset in {0, ..., 9} to the token id (wrapping modulo the vocabulary size).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "drbench/error.hpp"
#include "drbench/parallel.hpp"
#include "drbench/rng.hpp"
#include "drbench/tokenizer.hpp"

namespace drbench {

inline constexpr double kDefaultPerturbRate = 0.1;
inline constexpr std::uint64_t kMaxOffset = 9;

struct PerturbationParams {
  double epsilon = kDefaultPerturbRate;
  std::uint64_t master_seed = 0;
  // Special positions are perturbed like any other token unless this is false,
  // in which case they consume no random draws.
  bool include_special = true;

  void validate() const {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
      throw InvalidArgument("perturbation rate must lie in [0, 1], got " + std::to_string(epsilon));
    }
  }
};

// What the perturbation needs to know about the token space.
struct TokenSpace {
  std::size_t vocab_size = 0;
  std::vector<TokenId> special_ids;

  static TokenSpace of(const Vocabulary& vocab) {
    auto sp = vocab.special_ids();
    return {vocab.size(), std::vector<TokenId>(sp.begin(), sp.end())};
  }

  bool is_special(TokenId id) const {
    return std::find(special_ids.begin(), special_ids.end(), id) != special_ids.end();
  }
};

struct PerturbationRecord {
  std::string query_id;
  std::vector<std::size_t> positions_changed;
  TokenSequence before;
  TokenSequence after;

  friend bool operator==(const PerturbationRecord&, const PerturbationRecord&) = default;
};

// Per-query stream seed. Keyed by id so results do not depend on query order
// or on how queries are scheduled across threads.
inline std::uint64_t query_stream_seed(std::uint64_t master_seed, std::string_view query_id) {
  return master_seed ^ fnv1a64(query_id);
}

inline TokenSequence perturb_sequence(const TokenSequence& seq, const PerturbationParams& params,
                                      const TokenSpace& space, SplitMix64& stream) {
  params.validate();
  if (space.vocab_size == 0) throw InvalidArgument("vocabulary size must be positive");
  TokenSequence out = seq;
  for (TokenId& id : out.ids) {
    if (!params.include_special && space.is_special(id)) continue;
    const double r = stream.next_unit();
    if (r < params.epsilon) {
      const std::uint64_t d = stream.next() % (kMaxOffset + 1);
      id = static_cast<TokenId>((static_cast<std::uint64_t>(id) + d) % space.vocab_size);
    }
  }
  return out;
}

inline PerturbationRecord perturb_query(const std::string& query_id, const TokenSequence& seq,
                                        const PerturbationParams& params, const TokenSpace& space) {
  SplitMix64 stream(query_stream_seed(params.master_seed, query_id));
  PerturbationRecord rec{query_id, {}, seq, perturb_sequence(seq, params, space, stream)};
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (rec.before.ids[i] != rec.after.ids[i]) rec.positions_changed.push_back(i);
  }
  return rec;
}

// Output order follows input order regardless of `threads`.
inline std::vector<PerturbationRecord> perturb_query_set(
    std::span<const std::pair<std::string, TokenSequence>> queries, const PerturbationParams& params,
    const TokenSpace& space, std::size_t threads = 1) {
  params.validate();
  std::vector<PerturbationRecord> records(queries.size());
  parallel_for(queries.size(), threads, [&](std::size_t i) {
    records[i] = perturb_query(queries[i].first, queries[i].second, params, space);
  });
  return records;
}

// Expected fraction of positions whose id actually changes: a draw of d = 0 is a no-op.
inline double expected_change_rate(double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw InvalidArgument("perturbation rate must lie in [0, 1]");
  }
  return epsilon * static_cast<double>(kMaxOffset) / static_cast<double>(kMaxOffset + 1);
}

struct PerturbationRow {
  std::string before;
  std::string after;
};

inline std::vector<PerturbationRow> render_perturbation_table(
    std::span<const PerturbationRecord> records, const Vocabulary& vocab) {
  std::vector<PerturbationRow> rows;
  rows.reserve(records.size());
  for (const auto& rec : records) rows.push_back({decode(rec.before, vocab), decode(rec.after, vocab)});
  return rows;
}

// Two aligned columns headed "Previous Input" / "After Perturbation".
inline std::string format_perturbation_table(std::span<const PerturbationRow> rows) {
  static constexpr std::string_view kLeft = "Previous Input";
  static constexpr std::string_view kRight = "After Perturbation";
  std::size_t width = kLeft.size();
  std::size_t right_width = kRight.size();
  for (const auto& row : rows) {
    width = std::max(width, row.before.size());
    right_width = std::max(right_width, row.after.size());
  }
  std::ostringstream out;
  auto line = [&](std::string_view a, std::string_view b) {
    out << a << std::string(width - a.size(), ' ') << " | " << b << '\n';
  };
  line(kLeft, kRight);
  out << std::string(width, '-') << "-+-" << std::string(right_width, '-') << '\n';
  for (const auto& row : rows) line(row.before, row.after);
  return out.str();
}

}  // namespace drbench

#endif  // DRBENCH_PERTURB_HPP
