#include <doctest.h>

#include <algorithm>
#include <fstream>

#include "mrphe/errors.hpp"
#include "mrphe/manifest.hpp"
#include "mrphe/metrics.hpp"

using namespace mrphe;

TEST_SUITE("metrics") {
  TEST_CASE("all correct") {
    const std::vector<int> y{0, 1, 2, 1};
    const auto r = compute_metrics(y, y, {"a", "b", "c"});
    CHECK(r.accuracy == 1.0);
    CHECK(r.macro_f1 == 1.0);
  }

  TEST_CASE("two-class confusion [[8,2],[3,7]]") {
    std::vector<int> y, p;
    for (int i = 0; i < 10; ++i) y.push_back(0), p.push_back(i < 8 ? 0 : 1);
    for (int i = 0; i < 10; ++i) y.push_back(1), p.push_back(i < 3 ? 0 : 1);
    const auto r = compute_metrics(y, p, {"benign", "malignant"});
    CHECK(r.accuracy == 0.75);
    CHECK(r.macro_f1 == doctest::Approx(0.7493734335839599).epsilon(1e-14));
    CHECK(r.confusion == std::vector<std::vector<long>>{{8, 2}, {3, 7}});
  }

  TEST_CASE("absent class contributes zero and is flagged") {
    const std::vector<int> y{0, 0, 0, 0, 0, 0, 1, 1, 1, 2};
    const std::vector<int> p{0, 0, 0, 0, 1, 2, 1, 1, 0, 0};
    const auto r = compute_metrics(y, p, {"a", "b", "c", "d"});
    CHECK(r.macro_f1 == doctest::Approx(0.3333333333333333).epsilon(1e-14));
    CHECK(r.weighted_f1 == doctest::Approx(0.6).epsilon(1e-14));
    CHECK(r.per_class[3].f1 == 0.0);
    CHECK(r.per_class[3].f1_undefined);
    CHECK(r.per_class[2].f1_undefined);

    const auto w = compute_metrics(y, p, {"a", "b", "c", "d"}, F1Average::Weighted);
    CHECK(w.f1() == w.weighted_f1);
    CHECK(w.to_json()["f1_average"] == "weighted");
  }

  TEST_CASE("metrics ignore sample order") {
    std::vector<IdLabel> truth, pred;
    for (int i = 0; i < 30; ++i) {
      truth.push_back({"id" + std::to_string(i), i % 3});
      pred.push_back({"id" + std::to_string(i), (i * 7) % 3});
    }
    const auto a = compute_metrics(pred, truth, {"x", "y", "z"});
    std::reverse(pred.begin(), pred.end());
    std::rotate(truth.begin(), truth.begin() + 11, truth.end());
    const auto b = compute_metrics(pred, truth, {"x", "y", "z"});
    CHECK(a.to_json() == b.to_json());
  }

  TEST_CASE("id mismatch lists offenders") {
    const std::vector<IdLabel> truth{{"a", 0}, {"b", 1}};
    const std::vector<IdLabel> pred{{"a", 0}, {"c", 1}};
    try {
      compute_metrics(pred, truth, {"x", "y"});
      FAIL("expected DataError");
    } catch (const DataError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("missing predictions: b") != std::string::npos);
      CHECK(msg.find("unknown ids: c") != std::string::npos);
    }
  }
}

TEST_SUITE("manifest") {
  TEST_CASE("csv fields") {
    CHECK(split_csv_line("a,b") == std::vector<std::string>{"a", "b"});
    CHECK(split_csv_line("\"x,y\",\"say \"\"hi\"\"\",") == std::vector<std::string>{"x,y", "say \"hi\"", ""});
    CHECK(csv_escape("plain") == "plain");
    CHECK(csv_escape("a,b") == "\"a,b\"");
  }

  TEST_CASE("read and write") {
    const auto dir = std::filesystem::temp_directory_path() / "mrphe_manifest";
    std::filesystem::create_directories(dir);
    Manifest m{{{"img/a.png", "benign"}, {"img/b,c.png", "tumor"}}, {}};
    write_manifest(dir / "m.csv", m);
    const auto back = read_manifest(dir / "m.csv");
    REQUIRE(back.rows.size() == 2);
    CHECK(back.rows[1].path == "img/b,c.png");
    CHECK(back.resolve(back.rows[0]) == dir / "img/a.png");
    CHECK(back.label_indices({"tumor", "benign"}) == std::vector<int>{1, 0});
    CHECK_THROWS_AS(back.label_indices({"tumor"}), DataError);

    std::ofstream(dir / "bad.csv") << "file,class\nx,y\n";
    CHECK_THROWS_AS(read_manifest(dir / "bad.csv"), DataError);
    std::ofstream(dir / "dup.csv") << "path,label\nx,y\nx,z\n";
    CHECK_THROWS_AS(read_manifest(dir / "dup.csv"), DataError);
  }

  TEST_CASE("validation subset is deterministic and sized by rounding") {
    Manifest m;
    for (int i = 0; i < 41; ++i) m.rows.push_back({"p" + std::to_string(i), "a"});
    const auto v = validation_subset(m, 0.25, 3);
    CHECK(v.rows.size() == 10);
    const auto again = validation_subset(m, 0.25, 3);
    for (std::size_t i = 0; i < v.rows.size(); ++i) CHECK(v.rows[i].path == again.rows[i].path);
    CHECK(validation_subset(m, 0.0, 3).rows.empty());
    CHECK(validation_subset(m, 1.0, 3).rows.size() == 41);
  }
}
