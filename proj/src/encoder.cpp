#include "mrphe/encoder.hpp"

#include <fstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "mrphe/errors.hpp"
#include "mrphe/rng.hpp"

namespace mrphe {

std::string patch_key(std::string_view image_id, std::size_t patch_index) {
  return std::string(image_id) + "#" + std::to_string(patch_index);
}

std::vector<std::vector<float>> Encoder::embed_images(std::span<const ImageInput> images) const {
  std::vector<std::vector<float>> out;
  out.reserve(images.size());
  for (const auto& img : images) out.push_back(embed_image(img));
  return out;
}

std::vector<std::vector<float>> Encoder::embed_texts(std::span<const std::string> texts) const {
  std::vector<std::vector<float>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_text(t));
  return out;
}

namespace {

Embedding<double> to_embedding(const std::vector<float>& v, int expected_dim, const std::string& key) {
  if (expected_dim > 0 && static_cast<int>(v.size()) != expected_dim)
    throw ConfigError("encoder returned dimension " + std::to_string(v.size()) + " for '" + key + "', pipeline expects " +
                      std::to_string(expected_dim));
  Vector<double> values(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) values[static_cast<Eigen::Index>(i)] = v[i];
  return Embedding<double>::raw(std::move(values));
}

}  // namespace

Embedding<double> encode_image(const Encoder& backend, const ImageInput& image, int expected_dim) {
  const auto info = backend.info();
  if (!info.supports_image()) throw ConfigError("encoder '" + info.model_name + "' has no image modality");
  if (!image.raster || image.raster->empty()) throw DataError("empty raster for '" + image.key + "'");
  return to_embedding(backend.embed_image(image), expected_dim > 0 ? expected_dim : info.dim, image.key);
}

Embedding<double> encode_text(const Encoder& backend, const std::string& text, int expected_dim) {
  const auto info = backend.info();
  if (!info.supports_text()) throw ConfigError("encoder '" + info.model_name + "' has no text modality");
  if (text.empty()) throw DataError("empty prompt text");
  return to_embedding(backend.embed_text(text), expected_dim > 0 ? expected_dim : info.dim, text);
}

// --- mock ------------------------------------------------------------------

std::vector<float> mock_encode(std::span<const std::uint8_t> content, int dim, std::uint64_t seed) {
  if (dim < 1) throw ConfigError("mock encoder dimension must be >= 1");
  std::uint8_t seed_bytes[8];
  for (int i = 0; i < 8; ++i) seed_bytes[i] = static_cast<std::uint8_t>(seed >> (8 * i));
  const std::uint64_t h = fnv1a64(content, fnv1a64(std::span<const std::uint8_t>(seed_bytes, 8)));

  RandomStream stream(h, 0);
  std::vector<float> out(static_cast<std::size_t>(dim));
  constexpr double half = 2147483647.5;  // (2^32 - 1) / 2
  for (auto& v : out) v = static_cast<float>((static_cast<double>(stream.next_u32()) - half) / half);
  return out;
}

MockEncoder::MockEncoder(int dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim < 1) throw ConfigError("mock encoder dimension must be >= 1");
}

EncoderInfo MockEncoder::info() const {
  return {dim_, std::string(kMockAlgorithm), Modality::Both};
}

std::vector<float> MockEncoder::embed_image(const ImageInput& image) const {
  const Raster& r = *image.raster;
  std::vector<std::uint8_t> content{'i', 'm', 'g', 0};
  for (int v : {r.width, r.height})
    for (int i = 0; i < 4; ++i) content.push_back(static_cast<std::uint8_t>(static_cast<std::uint32_t>(v) >> (8 * i)));
  content.insert(content.end(), r.pixels.begin(), r.pixels.end());
  return mock_encode(content, dim_, seed_);
}

std::vector<float> MockEncoder::embed_text(const std::string& text) const {
  std::vector<std::uint8_t> content{'t', 'x', 't', 0};
  content.insert(content.end(), text.begin(), text.end());
  return mock_encode(content, dim_, seed_);
}

// --- table / store ---------------------------------------------------------

TableEncoder::TableEncoder(EmbeddingStore table, std::string model_name)
    : table_(std::move(table)), model_name_(std::move(model_name)) {}

TableEncoder TableEncoder::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open fixture table: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
    const int dim = j.at("dim").get<int>();
    if (dim < 1) throw DataError("fixture table dim must be >= 1: " + path.string());
    EmbeddingStore table(static_cast<std::uint32_t>(dim));
    for (const auto& [key, values] : j.at("vectors").items()) table.insert(key, values.get<std::vector<float>>());
    return TableEncoder(std::move(table), j.value("model", "table:" + path.filename().string()));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed fixture table " + path.string() + ": " + e.what());
  }
}

TableEncoder TableEncoder::from_store_file(const std::filesystem::path& path) {
  return TableEncoder(store_read(path), "store:" + path.filename().string());
}

EncoderInfo TableEncoder::info() const {
  return {static_cast<int>(table_.dim()), model_name_, Modality::Both};
}

const std::vector<float>& TableEncoder::lookup(const std::string& key) const {
  const auto* v = table_.find(key);
  if (!v) throw DataError("no embedding for key '" + key + "' in " + model_name_);
  return *v;
}

std::vector<float> TableEncoder::embed_image(const ImageInput& image) const { return lookup(image.key); }
std::vector<float> TableEncoder::embed_text(const std::string& text) const { return lookup(text); }

void write_table_json(const std::filesystem::path& path, const EmbeddingStore& table, const std::string& model) {
  nlohmann::json vectors = nlohmann::json::object();
  for (const auto& [key, values] : table.records()) vectors[key] = values;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write fixture table: " + path.string());
  out << nlohmann::json{{"dim", table.dim()}, {"model", model}, {"vectors", std::move(vectors)}}.dump() << '\n';
}

// --- remote ----------------------------------------------------------------

namespace {

template <typename Send>
nlohmann::json request_with_retry(const std::string& url, const RemoteOptions& opt, const std::string& what, Send send) {
  int last_status = -1;
  std::string last_error;
  auto delay = opt.backoff;
  for (int attempt = 1; attempt <= opt.attempts; ++attempt) {
    httplib::Client client(url);
    client.set_connection_timeout(opt.timeout);
    client.set_read_timeout(opt.timeout);
    client.set_write_timeout(opt.timeout);
    auto res = send(client);
    if (res && res->status == 200) {
      try {
        return nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::exception& e) {
        throw TransportError(what + ": malformed JSON response: " + e.what(), attempt, res->status);
      }
    }
    if (res) {
      last_status = res->status;
      last_error = "HTTP " + std::to_string(res->status);
      // Client errors will not change on retry.
      if (res->status >= 400 && res->status < 500 && res->status != 429) {
        throw TransportError(what + ": " + last_error + " " + res->body, attempt, last_status);
      }
    } else {
      last_error = httplib::to_string(res.error());
    }
    if (attempt < opt.attempts) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
  }
  throw TransportError(what + ": " + last_error + " after " + std::to_string(opt.attempts) + " attempts", opt.attempts,
                       last_status);
}

std::vector<std::vector<float>> parse_embeddings(const nlohmann::json& body, std::size_t expected, int dim,
                                                 const std::string& what) {
  std::vector<std::vector<float>> out;
  try {
    out = body.at("embeddings").get<std::vector<std::vector<float>>>();
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(what + ": response lacks 'embeddings': " + e.what(), 1, 200);
  }
  if (out.size() != expected)
    throw TransportError(what + ": expected " + std::to_string(expected) + " embeddings, got " +
                             std::to_string(out.size()),
                         1, 200);
  for (std::size_t i = 0; i < out.size(); ++i)
    if (static_cast<int>(out[i].size()) != dim)
      throw ConfigError(what + ": embedding " + std::to_string(i) + " has dimension " + std::to_string(out[i].size()) +
                        ", service reported " + std::to_string(dim));
  return out;
}

}  // namespace

RemoteEncoder::RemoteEncoder(std::string base_url, RemoteOptions options)
    : url_(std::move(base_url)), options_(options) {
  if (options_.max_batch < 1) throw ConfigError("remote max batch must be >= 1");
  const auto body = request_with_retry(url_, options_, "GET /v1/info", [](httplib::Client& c) { return c.Get("/v1/info"); });
  try {
    info_.dim = body.at("dim").get<int>();
    info_.model_name = body.at("model").get<std::string>();
    bool image = false, text = false;
    for (const auto& m : body.at("modalities")) {
      image |= m == "image";
      text |= m == "text";
    }
    info_.modality = image && text ? Modality::Both : image ? Modality::Image : Modality::Text;
    if (!image && !text) throw ConfigError("remote encoder reports no usable modality");
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(std::string("GET /v1/info: malformed info: ") + e.what(), 1, 200);
  }
  if (info_.dim < 1) throw ConfigError("remote encoder reports dim < 1");
}

std::vector<float> RemoteEncoder::embed_image(const ImageInput& image) const {
  return embed_images(std::span(&image, 1)).front();
}

std::vector<float> RemoteEncoder::embed_text(const std::string& text) const {
  return embed_texts(std::span(&text, 1)).front();
}

std::vector<std::vector<float>> RemoteEncoder::embed_texts(std::span<const std::string> texts) const {
  std::vector<std::vector<float>> out;
  out.reserve(texts.size());
  for (std::size_t begin = 0; begin < texts.size(); begin += options_.max_batch) {
    const auto batch = texts.subspan(begin, std::min(options_.max_batch, texts.size() - begin));
    const std::string payload = nlohmann::json{{"texts", std::vector<std::string>(batch.begin(), batch.end())}}.dump();
    auto body = request_with_retry(url_, options_, "POST /v1/embed_text", [&](httplib::Client& c) {
      return c.Post("/v1/embed_text", payload, "application/json");
    });
    for (auto& v : parse_embeddings(body, batch.size(), info_.dim, "POST /v1/embed_text")) out.push_back(std::move(v));
  }
  return out;
}

std::vector<std::vector<float>> RemoteEncoder::embed_images(std::span<const ImageInput> images) const {
  std::vector<std::vector<float>> out;
  out.reserve(images.size());
  for (std::size_t begin = 0; begin < images.size(); begin += options_.max_batch) {
    const auto batch = images.subspan(begin, std::min(options_.max_batch, images.size() - begin));
    httplib::MultipartFormDataItems items;
    for (const auto& img : batch) {
      const auto png = encode_png(*img.raster);
      items.push_back({"images", std::string(png.begin(), png.end()), img.key + ".png", "image/png"});
    }
    auto body = request_with_retry(url_, options_, "POST /v1/embed_image",
                                   [&](httplib::Client& c) { return c.Post("/v1/embed_image", items); });
    for (auto& v : parse_embeddings(body, batch.size(), info_.dim, "POST /v1/embed_image")) out.push_back(std::move(v));
  }
  return out;
}

}  // namespace mrphe
