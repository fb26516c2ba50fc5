#include <doctest.h>

#include <cstring>
#include <filesystem>

#include "mrphe/embedding.hpp"
#include "mrphe/errors.hpp"
#include "mrphe/store.hpp"

using namespace mrphe;

namespace {

std::string error_of(std::span<const std::uint8_t> bytes) {
  try {
    deserialize_store(bytes);
  } catch (const DataError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_SUITE("embedding") {
  TEST_CASE("normalize 3-4-5") {
    Vector<double> v(2);
    v << 3, 4;
    const auto e = normalize(Embedding<double>::raw(v));
    CHECK(e.normalized());
    CHECK(e.values()[0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(e.values()[1] == doctest::Approx(0.8).epsilon(1e-15));
  }

  TEST_CASE("normalize is idempotent") {
    Vector<double> v(3);
    v << 0.6, 0.0, 0.8;
    const auto once = normalized_copy(v);
    const auto twice = normalized_copy(once);
    CHECK((twice - v).cwiseAbs().maxCoeff() < 1e-7);
  }

  TEST_CASE("zero vector is rejected with its key") {
    Vector<double> v = Vector<double>::Zero(2);
    CHECK_THROWS_AS(normalized_copy(v, "img-7"), NumericError);
    try {
      normalized_copy(v, "img-7");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("img-7") != std::string::npos);
    }
  }

  TEST_CASE("unit flag is checked") {
    Vector<double> v(2);
    v << 1, 1;
    CHECK_THROWS_AS(Embedding<double>::unit(v), ContractError);
    RowMatrix<double> m(1, 2);
    m << 1, 1;
    CHECK_THROWS_AS(UnitRows<double>::checked(m), ContractError);
    const auto rows = UnitRows<double>::normalize(m);
    CHECK(is_unit(rows.matrix().row(0)));
  }

  TEST_CASE("float rows") {
    RowMatrix<float> m(2, 3);
    m << 1, 2, 2, 0, 0, 5;
    const auto rows = UnitRows<float>::normalize(m);
    CHECK(rows.matrix()(0, 1) == doctest::Approx(2.0f / 3.0f));
    CHECK(rows.matrix()(1, 2) == 1.0f);
  }
}

TEST_SUITE("store") {
  TEST_CASE("empty store has a 20-byte header and round-trips") {
    EmbeddingStore s(512);
    const auto bytes = serialize_store(s);
    CHECK(bytes.size() == EmbeddingStore::kHeaderBytes);
    CHECK(bytes.size() == 20);
    CHECK(std::memcmp(bytes.data(), "EMB1", 4) == 0);
    CHECK(deserialize_store(bytes) == s);
  }

  TEST_CASE("one record round-trips bit for bit") {
    EmbeddingStore s(3);
    s.insert("a/b.png#2", {1.5f, -0.0f, 3.4028235e38f});
    const auto bytes = serialize_store(s);
    CHECK(bytes.size() == 20 + 4 + 9 + 12);
    const auto back = deserialize_store(bytes);
    REQUIRE(back.find("a/b.png#2"));
    CHECK(std::memcmp(back.find("a/b.png#2")->data(), s.find("a/b.png#2")->data(), 12) == 0);
    CHECK(std::signbit((*back.find("a/b.png#2"))[1]));
  }

  TEST_CASE("little-endian header fields") {
    EmbeddingStore s(258);
    s.insert("k", std::vector<float>(258, 1.0f));
    const auto b = serialize_store(s);
    CHECK(b[4] == 1);
    CHECK(b[8] == 2);
    CHECK(b[9] == 1);
    CHECK(b[12] == 1);
    CHECK(b[20] == 1);
    CHECK(b[24] == 'k');
  }

  TEST_CASE("corruption errors name the offset") {
    EmbeddingStore s(2);
    s.insert("x", {1, 2});
    s.insert("y", {3, 4});
    auto bytes = serialize_store(s);

    auto bad = bytes;
    bad[0] = 'X';
    CHECK(error_of(bad) == "bad magic at offset 0");

    auto version = bytes;
    version[4] = 2;
    CHECK(error_of(version) == "unsupported version 2 at offset 4");

    auto zero = bytes;
    zero[8] = 0;
    CHECK(error_of(zero) == "zero dimension at offset 8");

    CHECK(error_of(std::span(bytes).first(10)).rfind("truncated dim at offset 8", 0) == 0);
    CHECK(error_of(std::span(bytes).first(bytes.size() - 1)).rfind("truncated vector at offset", 0) == 0);

    auto extra = bytes;
    extra.push_back(0);
    CHECK(error_of(extra) == "trailing bytes at offset " + std::to_string(bytes.size()));

    auto dup = bytes;
    dup[20 + 4 + 1 + 8 + 4] = 'x';  // rename "y" to "x"
    CHECK(error_of(dup).rfind("duplicate key 'x' at offset 33", 0) == 0);

    CHECK(error_of(std::span(bytes).first(2)) == "bad magic at offset 0");
  }

  TEST_CASE("insert rules") {
    EmbeddingStore s(2);
    s.insert("a", {1, 2});
    CHECK_THROWS_AS(s.insert("a", {1, 2}), DataError);
    CHECK_THROWS_AS(s.insert("b", {1, 2, 3}), DataError);
    CHECK_NOTHROW(s.upsert("a", {1, 2}));
    CHECK_THROWS_AS(s.upsert("a", {1, 3}), DataError);
    CHECK_THROWS_AS(EmbeddingStore(0), DataError);
  }

  TEST_CASE("file round trip") {
    const auto path = std::filesystem::temp_directory_path() / "mrphe_store_test" / "s.emb";
    EmbeddingStore s(4);
    s.insert("q", {0.25f, 0.5f, 0.75f, 1.0f});
    store_write(path, s);
    CHECK(store_read(path) == s);
    CHECK_FALSE(std::filesystem::exists(path.string() + ".tmp"));
    CHECK_THROWS_AS(store_read(path.parent_path() / "missing.emb"), DataError);
  }
}
