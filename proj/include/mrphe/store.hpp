#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace mrphe {

// Raw (unnormalized) embeddings keyed by content key, persisted in the EMB1 layout:
//
//   offset 0   "EMB1"
//   offset 4   u32 version (1)
//   offset 8   u32 dim
//   offset 12  u64 record count
//   offset 20  records: u32 key_length, key bytes (UTF-8), dim x f32
//
// All integers and floats little-endian. Records are written in key order.
class EmbeddingStore {
 public:
  static constexpr std::uint32_t kVersion = 1;
  static constexpr std::size_t kHeaderBytes = 20;

  explicit EmbeddingStore(std::uint32_t dim = 1);

  std::uint32_t dim() const { return dim_; }
  std::size_t size() const { return records_.size(); }
  bool contains(const std::string& key) const { return records_.count(key) != 0; }
  // nullptr when absent.
  const std::vector<float>* find(const std::string& key) const;

  // Throws DataError on duplicate key or dimension mismatch.
  void insert(std::string key, std::vector<float> values);
  // Inserts, or verifies an existing record is bit-identical.
  void upsert(std::string key, std::vector<float> values);

  const std::map<std::string, std::vector<float>>& records() const { return records_; }

  bool operator==(const EmbeddingStore&) const = default;

 private:
  std::uint32_t dim_;
  std::map<std::string, std::vector<float>> records_;
};

std::vector<std::uint8_t> serialize_store(const EmbeddingStore& store);
// Throws DataError("<problem> at offset N") on malformed input.
EmbeddingStore deserialize_store(std::span<const std::uint8_t> bytes);

void store_write(const std::filesystem::path& path, const EmbeddingStore& store);
EmbeddingStore store_read(const std::filesystem::path& path);

}  // namespace mrphe
