#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mrphe/embedding.hpp"
#include "mrphe/image.hpp"
#include "mrphe/store.hpp"

namespace mrphe {

enum class Modality { Image, Text, Both };

struct EncoderInfo {
  int dim = 0;
  std::string model_name;
  Modality modality = Modality::Both;

  bool supports_image() const { return modality != Modality::Text; }
  bool supports_text() const { return modality != Modality::Image; }
};

// An image handed to an encoder. `key` is the content key used by lookup backends:
// the image id for an original, "<id>#<patch index>" for a patch.
struct ImageInput {
  std::string key;
  const Raster* raster = nullptr;
};

std::string patch_key(std::string_view image_id, std::size_t patch_index);

// Image/text encoder (the pretrained f and g). Implementations are safe for concurrent
// read-only use and return raw, unnormalized vectors of length info().dim.
class Encoder {
 public:
  virtual ~Encoder() = default;
  virtual EncoderInfo info() const = 0;
  virtual std::vector<float> embed_image(const ImageInput& image) const = 0;
  virtual std::vector<float> embed_text(const std::string& text) const = 0;

  // Batched forms; backends with per-call overhead override these.
  virtual std::vector<std::vector<float>> embed_images(std::span<const ImageInput> images) const;
  virtual std::vector<std::vector<float>> embed_texts(std::span<const std::string> texts) const;
};

// Contract-checked entry points: modality, non-empty input, and dimension against `expected_dim`
// (0 = the backend's own dim).
Embedding<double> encode_image(const Encoder& backend, const ImageInput& image, int expected_dim = 0);
Embedding<double> encode_text(const Encoder& backend, const std::string& text, int expected_dim = 0);

// ---------------------------------------------------------------------------
// Mock backend

inline constexpr std::string_view kMockAlgorithm = "mock-fnv1a64-philox4x32-10/1";

// Expands fnv1a64(seed_le || content) through Philox in counter mode into `dim` values in [-1, 1].
// Integer hashing with a fixed int->float map, so the output is identical on every platform.
std::vector<float> mock_encode(std::span<const std::uint8_t> content, int dim, std::uint64_t seed);

class MockEncoder final : public Encoder {
 public:
  MockEncoder(int dim, std::uint64_t seed);
  EncoderInfo info() const override;
  std::vector<float> embed_image(const ImageInput& image) const override;
  std::vector<float> embed_text(const std::string& text) const override;

 private:
  int dim_;
  std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Lookup backend over a fixture table or an EMB1 store. Images are looked up by content key,
// texts by their exact string. A missing key is a DataError.

class TableEncoder final : public Encoder {
 public:
  TableEncoder(EmbeddingStore table, std::string model_name);

  // {"dim": D, "model": "...", "vectors": {"key": [..], ...}}
  static TableEncoder from_json_file(const std::filesystem::path& path);
  static TableEncoder from_store_file(const std::filesystem::path& path);

  EncoderInfo info() const override;
  std::vector<float> embed_image(const ImageInput& image) const override;
  std::vector<float> embed_text(const std::string& text) const override;

  const EmbeddingStore& table() const { return table_; }

 private:
  const std::vector<float>& lookup(const std::string& key) const;
  EmbeddingStore table_;
  std::string model_name_;
};

void write_table_json(const std::filesystem::path& path, const EmbeddingStore& table, const std::string& model);

// ---------------------------------------------------------------------------
// Remote backend speaking the HTTP/JSON encoder protocol:
//   GET  /v1/info         -> {"dim": D, "model": "...", "modalities": ["image","text"]}
//   POST /v1/embed_text   {"texts": [...]}      -> {"embeddings": [[...], ...]}
//   POST /v1/embed_image  multipart "images"    -> {"embeddings": [[...], ...]}

struct RemoteOptions {
  std::size_t max_batch = 64;
  int attempts = 3;
  std::chrono::milliseconds backoff{200};  // doubled after each failed attempt
  std::chrono::seconds timeout{60};
};

class RemoteEncoder final : public Encoder {
 public:
  // Queries /v1/info immediately; throws TransportError if the service is unreachable.
  explicit RemoteEncoder(std::string base_url, RemoteOptions options = {});

  EncoderInfo info() const override { return info_; }
  std::vector<float> embed_image(const ImageInput& image) const override;
  std::vector<float> embed_text(const std::string& text) const override;
  std::vector<std::vector<float>> embed_images(std::span<const ImageInput> images) const override;
  std::vector<std::vector<float>> embed_texts(std::span<const std::string> texts) const override;

 private:
  std::string url_;
  RemoteOptions options_;
  EncoderInfo info_;
};

}  // namespace mrphe
