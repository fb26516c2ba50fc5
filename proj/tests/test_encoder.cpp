#include <doctest.h>

#include <atomic>
#include <set>
#include <thread>

#include "mrphe/encoder.hpp"
#include "mrphe/errors.hpp"
#include "mrphe/planted.hpp"

// After Eigen: resolv.h, pulled in by httplib, defines a macro named _res.
#include <httplib.h>

using namespace mrphe;

namespace {

Raster flat(int w, int h, std::uint8_t v) {
  Raster r(w, h);
  std::fill(r.pixels.begin(), r.pixels.end(), v);
  return r;
}

std::vector<float> vector_for(const std::string& s, int dim) {
  std::vector<std::uint8_t> bytes(s.begin(), s.end());
  return mock_encode(bytes, dim, 42);
}

// Minimal stand-in for the encoder service.
struct FakeService {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  int dim = 8;
  int reply_dim = 8;
  std::size_t max_batch = 64;
  std::atomic<int> failures_left{0};
  std::atomic<int> requests{0};
  std::vector<std::size_t> batch_sizes;
  std::mutex mu;

  FakeService() {
    server.Get("/v1/info", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(nlohmann::json{{"dim", dim}, {"model", "fake"}, {"modalities", {"image", "text"}}}.dump(),
                      "application/json");
    });
    server.Post("/v1/embed_text", [this](const httplib::Request& req, httplib::Response& res) {
      ++requests;
      if (failures_left > 0) {
        --failures_left;
        res.status = 503;
        return;
      }
      const auto texts = nlohmann::json::parse(req.body).at("texts").get<std::vector<std::string>>();
      respond(texts, res);
    });
    server.Post("/v1/embed_image", [this](const httplib::Request& req, httplib::Response& res) {
      ++requests;
      std::vector<std::string> names;
      for (const auto& f : req.get_file_values("images")) names.push_back(f.filename);
      respond(names, res);
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }

  void respond(const std::vector<std::string>& items, httplib::Response& res) {
    {
      std::lock_guard lock(mu);
      batch_sizes.push_back(items.size());
    }
    if (items.size() > max_batch) {
      res.status = 413;
      res.set_content("batch too large", "text/plain");
      return;
    }
    nlohmann::json out = nlohmann::json::array();
    for (const auto& s : items) out.push_back(vector_for(s, reply_dim));
    res.set_content(nlohmann::json{{"embeddings", out}}.dump(), "application/json");
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }

  ~FakeService() {
    server.stop();
    thread.join();
  }
};

RemoteOptions fast() {
  RemoteOptions o;
  o.backoff = std::chrono::milliseconds(1);
  o.timeout = std::chrono::seconds(5);
  return o;
}

}  // namespace

TEST_SUITE("encoder") {
  TEST_CASE("mock encoder is deterministic") {
    MockEncoder enc(16, 3);
    const auto r = flat(4, 4, 9);
    CHECK(enc.embed_image({"a", &r}) == enc.embed_image({"b", &r}));
    CHECK(enc.embed_text("tumor") == enc.embed_text("tumor"));
    CHECK(enc.embed_text("tumor") != MockEncoder(16, 4).embed_text("tumor"));
    CHECK(enc.embed_text("tumor") != enc.embed_text("tumour"));
  }

  TEST_CASE("mock encoder has no collisions over ten thousand items") {
    std::set<std::vector<float>> seen;
    std::string base(32, 'a');
    for (int i = 0; i < 10000; ++i) {
      auto s = base;
      s[static_cast<std::size_t>(i % 32)] = static_cast<char>('a' + 1 + (i / 32) % 25);
      s += std::to_string(i);
      seen.insert(vector_for(s, 8));
    }
    CHECK(seen.size() == 10000);

    // One flipped byte in the same position always changes the vector.
    const auto ref = vector_for(base, 8);
    for (int b = 1; b < 256; ++b) {
      auto s = base;
      s[5] = static_cast<char>('a' ^ b);
      CHECK(vector_for(s, 8) != ref);
    }
  }

  TEST_CASE("mock values lie in [-1, 1], also at D = 1") {
    const auto v = vector_for("x", 1);
    REQUIRE(v.size() == 1);
    CHECK(v[0] >= -1.0f);
    CHECK(v[0] <= 1.0f);
    for (float x : vector_for("y", 4096)) CHECK((x >= -1.0f && x <= 1.0f));
  }

  TEST_CASE("checked entry points") {
    MockEncoder enc(8, 0);
    const Raster empty;
    CHECK_THROWS_AS(encode_text(enc, ""), DataError);
    CHECK_THROWS_AS(encode_image(enc, {"e", &empty}), DataError);
    CHECK_THROWS_AS(encode_text(enc, "x", 16), ConfigError);
    CHECK(encode_text(enc, "x").dim() == 8);
    CHECK_FALSE(encode_text(enc, "x").normalized());
  }

  TEST_CASE("table encoder returns fixture vectors verbatim") {
    EmbeddingStore t(3);
    t.insert("img.png", {0.1f, 0.2f, 0.3f});
    t.insert("img.png#0", {1, 0, 0});
    t.insert("a photo of a benign.", {0, 2, 0});
    TableEncoder enc(t, "fixture");
    const auto r = flat(2, 2, 0);
    CHECK(enc.embed_image({"img.png", &r}) == std::vector<float>{0.1f, 0.2f, 0.3f});
    CHECK(enc.embed_image({patch_key("img.png", 0), &r}) == std::vector<float>{1, 0, 0});
    CHECK(enc.embed_text("a photo of a benign.") == std::vector<float>{0, 2, 0});
    CHECK_THROWS_AS(enc.embed_text("a photo of a tumor."), DataError);
    CHECK_THROWS_AS(enc.embed_image({"other.png", &r}), DataError);

    const auto path = std::filesystem::temp_directory_path() / "mrphe_table.json";
    write_table_json(path, t, "fixture");
    const auto back = TableEncoder::from_json_file(path);
    CHECK(back.table() == t);
    CHECK(back.info().model_name == "fixture");
  }

  TEST_CASE("planted marker maps to the first class direction") {
    PlantedSpec spec;
    spec.images_per_class = 1;
    spec.val_per_class = 0;
    const auto data = generate_planted(spec);
    const auto* v = data.table.find("CLASS_0 marker");
    REQUIRE(v);
    for (int d = 0; d < spec.dim; ++d) CHECK((*v)[d] == doctest::Approx(data.class_directions(0, d)).epsilon(1e-6));
    CHECK(data.class_directions.row(0).norm() == doctest::Approx(1.0));
  }

  TEST_CASE("remote encoder: info and order-preserving batches") {
    FakeService svc;
    auto opts = fast();
    opts.max_batch = 4;
    RemoteEncoder enc(svc.url(), opts);
    CHECK(enc.info().dim == 8);
    CHECK(enc.info().model_name == "fake");
    CHECK(enc.info().supports_image());

    std::vector<std::string> texts;
    for (int i = 0; i < 10; ++i) texts.push_back("prompt " + std::to_string(i));
    const auto out = enc.embed_texts(texts);
    REQUIRE(out.size() == 10);
    for (int i = 0; i < 10; ++i) CHECK(out[i] == vector_for(texts[i], 8));
    CHECK(svc.batch_sizes == std::vector<std::size_t>{4, 4, 2});

    const auto r = flat(5, 5, 200);
    std::vector<ImageInput> imgs{{"x.png", &r}, {"x.png#0", &r}, {"y.png", &r}};
    const auto iv = enc.embed_images(imgs);
    REQUIRE(iv.size() == 3);
    CHECK(iv[1] == vector_for("x.png#0.png", 8));
    CHECK(iv[2] == vector_for("y.png.png", 8));
  }

  TEST_CASE("remote encoder: oversize batch fails without retry") {
    FakeService svc;
    auto opts = fast();
    opts.max_batch = 100;
    RemoteEncoder enc(svc.url(), opts);
    std::vector<std::string> texts(65, "t");
    try {
      enc.embed_texts(texts);
      FAIL("expected TransportError");
    } catch (const TransportError& e) {
      CHECK(e.last_status == 413);
      CHECK(e.attempts == 1);
    }
    CHECK(svc.requests == 1);
  }

  TEST_CASE("remote encoder: 503 is retried with backoff") {
    FakeService svc;
    RemoteEncoder enc(svc.url(), fast());
    svc.failures_left = 2;
    CHECK(enc.embed_text("x") == vector_for("x", 8));
    CHECK(svc.requests == 3);

    svc.failures_left = 5;
    svc.requests = 0;
    try {
      enc.embed_text("x");
      FAIL("expected TransportError");
    } catch (const TransportError& e) {
      CHECK(e.attempts == 3);
      CHECK(e.last_status == 503);
    }
    CHECK(svc.requests == 3);
  }

  TEST_CASE("remote encoder: dimension disagreement is a config error") {
    FakeService svc;
    svc.reply_dim = 7;
    RemoteEncoder enc(svc.url(), fast());
    CHECK_THROWS_AS(enc.embed_text("x"), ConfigError);
  }

  TEST_CASE("remote encoder: unreachable service") {
    int port;
    {
      FakeService svc;
      port = svc.port;
    }
    auto opts = fast();
    opts.timeout = std::chrono::seconds(1);
    try {
      RemoteEncoder enc("http://127.0.0.1:" + std::to_string(port), opts);
      FAIL("expected TransportError");
    } catch (const TransportError& e) {
      CHECK(e.last_status == -1);
      CHECK(e.attempts == 3);
    }
  }
}
