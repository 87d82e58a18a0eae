#ifndef DRBENCH_STORE_HPP
#define DRBENCH_STORE_HPP

// Binary embedding store ("DRE1"). All integers little-endian:
//
//   magic    4 bytes  "DRE1"
//   version  u32      1
//   dim      u32
//   count    u64
//   flags    u8       1 if every vector is unit-norm
//   count x { u16 id_len, id_len bytes of UTF-8 id, dim x f32 }

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "drbench/error.hpp"

namespace drbench {

inline constexpr std::array<char, 4> kStoreMagic = {'D', 'R', 'E', '1'};
inline constexpr std::uint32_t kStoreVersion = 1;

struct EmbeddingStore {
  std::size_t dim = 0;
  bool normalized = false;
  std::map<std::string, std::vector<float>> records;  // sorted by id

  // Narrows to float. Throws InvalidArgument on dim mismatch, non-finite
  // components or a repeated id.
  void add(const std::string& id, std::span<const double> values) {
    std::vector<float> v(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) v[i] = static_cast<float>(values[i]);
    add(id, std::move(v));
  }

  void add(const std::string& id, std::vector<float> values) {
    if (values.size() != dim) {
      throw InvalidArgument("vector for \"" + id + "\" has dim " + std::to_string(values.size()) +
                            ", store dim is " + std::to_string(dim));
    }
    for (float x : values) {
      if (!std::isfinite(x)) throw InvalidArgument("non-finite component in vector \"" + id + "\"");
    }
    if (!records.emplace(id, std::move(values)).second) {
      throw InvalidArgument("duplicate id \"" + id + "\" in embedding store");
    }
  }

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }

  friend bool operator==(const EmbeddingStore&, const EmbeddingStore&) = default;
};

namespace detail {

template <typename U>
void put_le(std::string& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
  }
}

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  std::size_t offset() const noexcept { return pos_; }
  bool at_end() const noexcept { return pos_ == bytes_.size(); }

  std::string_view take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("truncated store while reading ") + what, pos_);
    }
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  template <typename U>
  U get_le(const char* what) {
    auto raw = take(sizeof(U), what);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(raw[i])) << (8 * i);
    }
    return static_cast<U>(v);
  }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_store(const EmbeddingStore& store) {
  if (store.dim == 0 || store.dim > std::numeric_limits<std::uint32_t>::max()) {
    throw InvalidArgument("store dim must be in [1, 2^32)");
  }
  std::string out(kStoreMagic.begin(), kStoreMagic.end());
  detail::put_le<std::uint32_t>(out, kStoreVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(store.dim));
  detail::put_le<std::uint64_t>(out, store.records.size());
  out.push_back(store.normalized ? 1 : 0);
  out.reserve(out.size() + store.records.size() * (2 + 16 + 4 * store.dim));
  for (const auto& [id, v] : store.records) {
    if (id.empty() || id.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw InvalidArgument("store ids must be 1..65535 bytes long");
    }
    if (v.size() != store.dim) throw InvalidArgument("vector for \"" + id + "\" has the wrong dim");
    detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(id.size()));
    out += id;
    for (float x : v) detail::put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(x));
  }
  return out;
}

inline EmbeddingStore parse_store(std::string_view bytes) {
  detail::ByteReader in(bytes);
  auto magic = in.take(kStoreMagic.size(), "magic");
  if (!std::equal(magic.begin(), magic.end(), kStoreMagic.begin())) {
    throw FormatError("bad magic: not a DRE1 embedding store", 0);
  }
  const std::size_t version_at = in.offset();
  const auto version = in.get_le<std::uint32_t>("version");
  if (version != kStoreVersion) {
    throw FormatError("unsupported store version " + std::to_string(version), version_at);
  }
  const std::size_t dim_at = in.offset();
  EmbeddingStore store;
  store.dim = in.get_le<std::uint32_t>("dim");
  if (store.dim == 0) throw FormatError("store dim is zero", dim_at);
  const auto count = in.get_le<std::uint64_t>("count");
  const std::size_t flag_at = in.offset();
  const auto flag = in.get_le<std::uint8_t>("flags");
  if (flag > 1) throw FormatError("invalid normalized flag", flag_at);
  store.normalized = flag == 1;

  for (std::uint64_t r = 0; r < count; ++r) {
    const std::size_t record_at = in.offset();
    const auto id_len = in.get_le<std::uint16_t>("record id length");
    if (id_len == 0) throw FormatError("empty record id", record_at);
    std::string id(in.take(id_len, "record id"));
    std::vector<float> v(store.dim);
    for (float& x : v) x = std::bit_cast<float>(in.get_le<std::uint32_t>("vector components"));
    if (!store.records.emplace(id, std::move(v)).second) {
      throw FormatError("duplicate id \"" + id + "\"", record_at);
    }
  }
  if (!in.at_end()) throw FormatError("trailing bytes after last record", in.offset());
  return store;
}

inline void write_store(const EmbeddingStore& store, const std::filesystem::path& path) {
  const std::string bytes = serialize_store(store);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

inline EmbeddingStore read_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_store(bytes);
}

}  // namespace drbench

#endif  // DRBENCH_STORE_HPP
