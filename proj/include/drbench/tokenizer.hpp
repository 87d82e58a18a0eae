#ifndef DRBENCH_TOKENIZER_HPP
#define DRBENCH_TOKENIZER_HPP

// Vocabulary-driven WordPiece-style tokenizer producing `[CLS] ... [SEP] [PAD]*` frames.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "drbench/error.hpp"

namespace drbench {

using TokenId = std::uint32_t;

inline constexpr std::string_view kPadToken = "[PAD]";
inline constexpr std::string_view kUnkToken = "[UNK]";
inline constexpr std::string_view kClsToken = "[CLS]";
inline constexpr std::string_view kSepToken = "[SEP]";
inline constexpr std::string_view kContinuationPrefix = "##";
inline constexpr std::size_t kMaxSubwordsPerWord = 100;

class Vocabulary {
 public:
  // Token i gets id i. Throws InvalidArgument on duplicates, empty tokens or
  // a missing special token.
  explicit Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    ids_.reserve(tokens_.size());
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (tokens_[i].empty()) {
        throw InvalidArgument("empty token at id " + std::to_string(i));
      }
      if (!ids_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
        throw InvalidArgument("duplicate token \"" + tokens_[i] + "\" at id " + std::to_string(i));
      }
    }
    pad_ = require(kPadToken);
    unk_ = require(kUnkToken);
    cls_ = require(kClsToken);
    sep_ = require(kSepToken);
  }

  std::size_t size() const noexcept { return tokens_.size(); }

  std::optional<TokenId> find(std::string_view token) const {
    auto it = ids_.find(std::string(token));
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }

  const std::string& token(TokenId id) const {
    if (id >= tokens_.size()) {
      throw InvalidArgument("token id " + std::to_string(id) + " out of range (V=" +
                            std::to_string(tokens_.size()) + ")");
    }
    return tokens_[id];
  }

  TokenId pad() const noexcept { return pad_; }
  TokenId unk() const noexcept { return unk_; }
  TokenId cls() const noexcept { return cls_; }
  TokenId sep() const noexcept { return sep_; }

  std::array<TokenId, 4> special_ids() const noexcept { return {pad_, unk_, cls_, sep_}; }

  bool is_special(TokenId id) const noexcept {
    return id == pad_ || id == unk_ || id == cls_ || id == sep_;
  }

  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

 private:
  TokenId require(std::string_view token) const {
    auto id = find(token);
    if (!id) throw InvalidArgument("vocabulary is missing special token " + std::string(token));
    return *id;
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
  TokenId pad_ = 0;
  TokenId unk_ = 0;
  TokenId cls_ = 0;
  TokenId sep_ = 0;
};

// One token per line; the 0-based line index is the id.
inline Vocabulary load_vocab(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(std::move(line));
  }
  try {
    return Vocabulary(std::move(tokens));
  } catch (const InvalidArgument& e) {
    throw ParseError(path.string(), 0, e.what());
  }
}

// Token ids as fed to an encoder. Freshly encoded sequences satisfy
// has_valid_frame(); perturbed ones may not.
struct TokenSequence {
  std::vector<TokenId> ids;

  std::size_t size() const noexcept { return ids.size(); }
  bool empty() const noexcept { return ids.empty(); }

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

// [CLS] first, exactly one [SEP], only [PAD] after it.
inline bool has_valid_frame(const TokenSequence& seq, const Vocabulary& vocab) {
  if (seq.size() < 2 || seq.ids.front() != vocab.cls()) return false;
  std::size_t seps = 0;
  bool after_sep = false;
  for (TokenId id : seq.ids) {
    if (id >= vocab.size()) return false;
    if (after_sep && id != vocab.pad()) return false;
    if (id == vocab.sep()) {
      ++seps;
      after_sep = true;
    }
  }
  return seps == 1;
}

namespace detail {

inline bool is_ascii_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline bool is_ascii_punct(unsigned char c) {
  return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) ||
         (c >= 123 && c <= 126);
}

inline bool is_utf8_continuation(unsigned char c) { return (c & 0xC0) == 0x80; }

}  // namespace detail

// Lowercases ASCII, splits on whitespace and isolates each ASCII punctuation
// character as its own word. Non-ASCII bytes pass through untouched.
inline std::vector<std::string> basic_split(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) words.push_back(std::move(current));
    current.clear();
  };
  for (unsigned char c : text) {
    if (detail::is_ascii_space(c)) {
      flush();
    } else if (detail::is_ascii_punct(c)) {
      flush();
      words.emplace_back(1, static_cast<char>(c));
    } else {
      current.push_back(static_cast<char>((c >= 'A' && c <= 'Z') ? c + ('a' - 'A') : c));
    }
  }
  flush();
  return words;
}

// Greedy longest-match-first segmentation of one word. Falls back to a single
// [UNK] when some suffix has no cover or the word needs too many pieces.
inline void wordpiece(std::string_view word, const Vocabulary& vocab, std::vector<TokenId>& out) {
  std::vector<TokenId> pieces;
  std::string candidate;
  std::size_t start = 0;
  while (start < word.size()) {
    std::size_t end = word.size();
    std::optional<TokenId> match;
    while (end > start) {
      // Never cut a UTF-8 sequence in half.
      if (end == word.size() || !detail::is_utf8_continuation(static_cast<unsigned char>(word[end]))) {
        candidate.clear();
        if (start > 0) candidate += kContinuationPrefix;
        candidate += word.substr(start, end - start);
        match = vocab.find(candidate);
        if (match) break;
      }
      --end;
    }
    if (!match || pieces.size() == kMaxSubwordsPerWord) {
      out.push_back(vocab.unk());
      return;
    }
    pieces.push_back(*match);
    start = end;
  }
  out.insert(out.end(), pieces.begin(), pieces.end());
}

// Framed as [CLS] tokens [SEP], right-padded with [PAD] to max_len, or
// truncated so that the final slot is still [SEP].
inline TokenSequence encode(std::string_view text, const Vocabulary& vocab, std::size_t max_len) {
  if (max_len < 2) throw InvalidArgument("max_len must be at least 2");
  std::vector<TokenId> body;
  for (const auto& word : basic_split(text)) {
    wordpiece(word, vocab, body);
    if (body.size() >= max_len - 2) break;
  }
  if (body.size() > max_len - 2) body.resize(max_len - 2);

  TokenSequence seq;
  seq.ids.reserve(max_len);
  seq.ids.push_back(vocab.cls());
  seq.ids.insert(seq.ids.end(), body.begin(), body.end());
  seq.ids.push_back(vocab.sep());
  seq.ids.resize(max_len, vocab.pad());
  return seq;
}

// Space-joined tokens with `##` continuations fused onto their predecessor.
// Special tokens are rendered literally.
inline std::string decode(const TokenSequence& seq, const Vocabulary& vocab) {
  std::string out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const std::string& tok = vocab.token(seq.ids[i]);
    std::string_view view(tok);
    if (i > 0) {
      if (view.starts_with(kContinuationPrefix)) {
        view.remove_prefix(kContinuationPrefix.size());
      } else {
        out.push_back(' ');
      }
    }
    out += view;
  }
  return out;
}

}  // namespace drbench

#endif  // DRBENCH_TOKENIZER_HPP
