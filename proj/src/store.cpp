#include "mrphe/store.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "mrphe/errors.hpp"

namespace mrphe {

static_assert(std::endian::native == std::endian::little, "EMB1 I/O assumes a little-endian host");

EmbeddingStore::EmbeddingStore(std::uint32_t dim) : dim_(dim) {
  if (dim == 0) throw DataError("embedding store dimension must be >= 1");
}

const std::vector<float>* EmbeddingStore::find(const std::string& key) const {
  auto it = records_.find(key);
  return it == records_.end() ? nullptr : &it->second;
}

void EmbeddingStore::insert(std::string key, std::vector<float> values) {
  if (values.size() != dim_)
    throw DataError("record '" + key + "' has dimension " + std::to_string(values.size()) + ", store expects " +
                    std::to_string(dim_));
  auto [it, inserted] = records_.emplace(std::move(key), std::move(values));
  if (!inserted) throw DataError("duplicate key '" + it->first + "'");
}

void EmbeddingStore::upsert(std::string key, std::vector<float> values) {
  if (const auto* existing = find(key)) {
    if (*existing != values) throw DataError("conflicting vectors for key '" + key + "'");
    return;
  }
  insert(std::move(key), std::move(values));
}

namespace {

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - offset_ < n)
      throw DataError(std::string("truncated ") + what + " at offset " + std::to_string(offset_) + " (need " +
                      std::to_string(n) + " bytes, have " + std::to_string(bytes_.size() - offset_) + ")");
  }

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes_.data() + offset_, sizeof(T));
    offset_ += sizeof(T);
    return v;
  }

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.subspan(offset_, n);
    offset_ += n;
    return s;
  }

  std::size_t offset() const { return offset_; }
  std::size_t remaining() const { return bytes_.size() - offset_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t offset_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_store(const EmbeddingStore& store) {
  std::vector<std::uint8_t> out;
  out.reserve(EmbeddingStore::kHeaderBytes + store.size() * (8 + 4 * std::size_t{store.dim()}));
  out.insert(out.end(), {'E', 'M', 'B', '1'});
  put<std::uint32_t>(out, EmbeddingStore::kVersion);
  put<std::uint32_t>(out, store.dim());
  put<std::uint64_t>(out, store.size());
  for (const auto& [key, values] : store.records()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(key.size()));
    out.insert(out.end(), key.begin(), key.end());
    const auto* p = reinterpret_cast<const std::uint8_t*>(values.data());
    out.insert(out.end(), p, p + values.size() * sizeof(float));
  }
  return out;
}

EmbeddingStore deserialize_store(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "EMB1", 4) != 0) throw DataError("bad magic at offset 0");
  r.take(4, "magic");
  const auto version_at = r.offset();
  const auto version = r.get<std::uint32_t>("version");
  if (version != EmbeddingStore::kVersion)
    throw DataError("unsupported version " + std::to_string(version) + " at offset " + std::to_string(version_at));
  const auto dim_at = r.offset();
  const auto dim = r.get<std::uint32_t>("dim");
  if (dim == 0) throw DataError("zero dimension at offset " + std::to_string(dim_at));
  const auto count = r.get<std::uint64_t>("record count");

  EmbeddingStore store(dim);
  const std::size_t vector_bytes = std::size_t{dim} * sizeof(float);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto record_at = r.offset();
    const auto key_len = r.get<std::uint32_t>("key length");
    auto key_bytes = r.take(key_len, "key");
    std::string key(key_bytes.begin(), key_bytes.end());
    auto vec_bytes = r.take(vector_bytes, "vector");
    std::vector<float> values(dim);
    std::memcpy(values.data(), vec_bytes.data(), vector_bytes);
    if (store.contains(key))
      throw DataError("duplicate key '" + key + "' at offset " + std::to_string(record_at));
    store.insert(std::move(key), std::move(values));
  }
  if (r.remaining() != 0) throw DataError("trailing bytes at offset " + std::to_string(r.offset()));
  return store;
}

void store_write(const std::filesystem::path& path, const EmbeddingStore& store) {
  const auto bytes = serialize_store(store);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open for writing: " + tmp);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

EmbeddingStore store_read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open embedding store: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_store(bytes);
}

}  // namespace mrphe
