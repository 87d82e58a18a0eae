#ifndef DRBENCH_EMBED_HPP
#define DRBENCH_EMBED_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "drbench/error.hpp"
#include "drbench/parallel.hpp"
#include "drbench/perturb.hpp"
#include "drbench/rng.hpp"
#include "drbench/tokenizer.hpp"

namespace drbench {

// Dense vectors are handled in double precision; stores keep 32-bit floats.
using EmbeddingVector = std::vector<double>;

inline constexpr std::size_t kDefaultReferenceDim = 64;
inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

inline double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Scales v to unit length. Throws InvalidArgument for a zero or non-finite vector.
inline void normalize_in_place(std::span<double> v) {
  const double n = l2_norm(v);
  if (!(n > 0.0) || !std::isfinite(n)) throw InvalidArgument("cannot normalize a zero or non-finite vector");
  for (double& x : v) x /= n;
}

// Deterministic pseudo-random unit vector for one token id. Components are
// uniform in [-1, 1) before normalization.
inline EmbeddingVector reference_token_vector(TokenId token_id, std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw InvalidArgument("embedding dimension must be positive");
  SplitMix64 stream(seed ^ ((static_cast<std::uint64_t>(token_id) + 1) * kGoldenGamma));
  EmbeddingVector v(dim);
  for (double& c : v) c = 2.0 * stream.next_unit() - 1.0;
  normalize_in_place(v);
  return v;
}

// Hashed bag-of-tokens embedder: mean of per-token reference vectors over all
// non-[PAD] positions, L2-normalized. Token vectors for ids below `vocab_size`
// are tabulated up front.
class ReferenceEmbedder {
 public:
  ReferenceEmbedder(std::size_t dim, std::uint64_t seed, TokenId pad_id, std::size_t vocab_size = 0)
      : dim_(dim), seed_(seed), pad_id_(pad_id) {
    if (dim == 0) throw InvalidArgument("embedding dimension must be positive");
    table_.reserve(vocab_size * dim);
    for (std::size_t id = 0; id < vocab_size; ++id) {
      auto v = reference_token_vector(static_cast<TokenId>(id), dim, seed);
      table_.insert(table_.end(), v.begin(), v.end());
    }
  }

  std::size_t dim() const noexcept { return dim_; }
  std::uint64_t seed() const noexcept { return seed_; }
  TokenId pad_id() const noexcept { return pad_id_; }

  EmbeddingVector embed(const TokenSequence& seq) const {
    EmbeddingVector sum(dim_, 0.0);
    std::size_t n = 0;
    EmbeddingVector scratch;
    for (TokenId id : seq.ids) {
      if (id == pad_id_) continue;
      std::span<const double> tv;
      if (static_cast<std::size_t>(id) * dim_ < table_.size()) {
        tv = std::span<const double>(table_).subspan(static_cast<std::size_t>(id) * dim_, dim_);
      } else {
        scratch = reference_token_vector(id, dim_, seed_);
        tv = scratch;
      }
      for (std::size_t i = 0; i < dim_; ++i) sum[i] += tv[i];
      ++n;
    }
    if (n == 0) throw InvalidArgument("cannot embed a sequence with no non-[PAD] tokens");
    for (double& x : sum) x /= static_cast<double>(n);
    normalize_in_place(sum);
    return sum;
  }

 private:
  std::size_t dim_;
  std::uint64_t seed_;
  TokenId pad_id_;
  std::vector<double> table_;
};

inline EmbeddingVector embed_sequence(const TokenSequence& seq, const ReferenceEmbedder& embedder) {
  return embedder.embed(seq);
}

// Something that can turn texts into token ids and token ids into vectors.
// Implementations must be deterministic and preserve input order.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual std::string name() const = 0;
  virtual TokenSpace token_space() const = 0;
  virtual std::vector<TokenSequence> tokenize(std::span<const std::string> texts) = 0;
  virtual std::vector<EmbeddingVector> embed(std::span<const TokenSequence> seqs) = 0;
};

// Local tokenizer + reference embedder; no model required.
class ReferenceProvider final : public EmbeddingProvider {
 public:
  ReferenceProvider(Vocabulary vocab, std::size_t max_len, std::size_t dim, std::uint64_t seed,
                    std::size_t threads = 1)
      : vocab_(std::move(vocab)),
        max_len_(max_len),
        embedder_(dim, seed, vocab_.pad(), vocab_.size()),
        threads_(threads) {
    if (max_len < 2) throw InvalidArgument("max_len must be at least 2");
  }

  std::string name() const override { return "reference"; }
  TokenSpace token_space() const override { return TokenSpace::of(vocab_); }
  const Vocabulary& vocab() const noexcept { return vocab_; }
  const ReferenceEmbedder& embedder() const noexcept { return embedder_; }

  std::vector<TokenSequence> tokenize(std::span<const std::string> texts) override {
    std::vector<TokenSequence> out(texts.size());
    parallel_for(texts.size(), threads_, [&](std::size_t i) { out[i] = encode(texts[i], vocab_, max_len_); });
    return out;
  }

  std::vector<EmbeddingVector> embed(std::span<const TokenSequence> seqs) override {
    std::vector<EmbeddingVector> out(seqs.size());
    parallel_for(seqs.size(), threads_, [&](std::size_t i) { out[i] = embedder_.embed(seqs[i]); });
    return out;
  }

 private:
  Vocabulary vocab_;
  std::size_t max_len_;
  ReferenceEmbedder embedder_;
  std::size_t threads_;
};

}  // namespace drbench

#endif  // DRBENCH_EMBED_HPP
