#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "cumad/dataset.hpp"
#include "cumad/stats.hpp"

using namespace cumad;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("cumad_test_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string write_file(const TempDir& dir, const std::string& name, const std::string& content) {
  const std::string p = dir.file(name);
  std::ofstream out(p);
  out << content;
  return p;
}

std::string csv_row(std::size_t width, double base) {
  std::string row;
  for (std::size_t i = 0; i < width; ++i) {
    if (i) row += ',';
    row += csv::format_double(base + static_cast<double>(i));
  }
  return row;
}

// Row multiset as sorted strings, for partition bijection checks.
std::vector<std::string> row_keys(const FeatureMatrix& m) {
  std::vector<std::string> keys;
  for (std::size_t i = 0; i < m.size(); ++i) {
    std::string k;
    for (double v : m.row(i)) k += csv::format_double(v) + ",";
    keys.push_back(std::move(k));
  }
  std::sort(keys.begin(), keys.end());
  return keys;
}

}  // namespace

TEST_CASE("feature csv loading", "[dataset]") {
  TempDir dir;

  SECTION("header plus valid rows") {
    std::string header;
    for (int i = 0; i < 115; ++i) header += (i ? ",f" : "f") + std::to_string(i + 1);
    const std::string content = header + "\n" + csv_row(115, 0.0) + "\n" + csv_row(115, 1.0) +
                                "\n" + csv_row(115, 2.0) + "\n";
    const auto m = load_feature_csv(write_file(dir, "ok.csv", content), Label::benign, "dev");
    CHECK(m.size() == 3);
    CHECK(m.width == 115);
    CHECK(m.device_id == "dev");
    CHECK(m.labels == std::vector<Label>(3, Label::benign));
    CHECK(m.row(1)[0] == 1.0);
    CHECK(m.row(2)[114] == 116.0);
  }

  SECTION("wrong column count names the row") {
    const std::string content = csv_row(115, 0.0) + "\n" + csv_row(114, 0.0) + "\n";
    CHECK_THROWS_WITH(load_feature_csv(write_file(dir, "short.csv", content), Label::benign, "d"),
                      ContainsSubstring("row 2") && ContainsSubstring("114"));
  }

  SECTION("non-numeric cell names row and column") {
    std::string bad = csv_row(115, 0.0);
    bad.replace(bad.find("3,"), 1, "x");
    const std::string content = csv_row(115, 0.0) + "\n" + bad + "\n";
    CHECK_THROWS_WITH(load_feature_csv(write_file(dir, "bad.csv", content), Label::attack, "d"),
                      ContainsSubstring("row 2") && ContainsSubstring("column 4"));
  }

  SECTION("empty file rejected") {
    CHECK_THROWS_WITH(load_feature_csv(write_file(dir, "empty.csv", ""), Label::benign, "d"),
                      ContainsSubstring("no data rows"));
    CHECK_THROWS_AS(load_feature_csv(dir.file("missing.csv"), Label::benign, "d"),
                    std::runtime_error);
  }

  SECTION("labeled csv round trip") {
    FeatureMatrix m;
    m.width = 4;
    m.push_row(std::vector<double>{1.5, 2.5, 3.5, -0.25}, Label::benign);
    m.push_row(std::vector<double>{4.0, 5.0, 6.0, 7.0}, Label::attack);
    std::ofstream out(dir.file("lab.csv"));
    write_feature_csv(m, out);
    out.close();
    const auto back = load_labeled_csv(dir.file("lab.csv"), "d", 4);
    CHECK(back.size() == 2);
    CHECK(back.labels[0] == Label::benign);
    CHECK(back.labels[1] == Label::attack);
    CHECK(back.values == m.values);
  }

  SECTION("labeled csv requires the label column") {
    std::string header;
    for (int i = 0; i < 4; ++i) header += (i ? ",f" : "f") + std::to_string(i + 1);
    const std::string content = header + "\n1,2,3,4\n";
    CHECK_THROWS_WITH(load_labeled_csv(write_file(dir, "nolabel.csv", content), "d", 4),
                      ContainsSubstring("label column missing"));
  }
}

TEST_CASE("benign partition", "[dataset]") {
  auto make_matrix = [](std::size_t n) {
    FeatureMatrix m;
    m.device_id = "dev";
    m.width = 3;
    for (std::size_t i = 0; i < n; ++i)
      m.push_row(std::vector<double>{static_cast<double>(i), 0.0, 1.0}, Label::benign);
    return m;
  };

  SECTION("300 rows split evenly") {
    const DatasetSplit s = partition_benign(make_matrix(300), 7);
    CHECK(s.train.size() == 100);
    CHECK(s.validation.size() == 100);
    CHECK(s.holdout_benign.size() == 100);
  }

  SECTION("remainder goes to earlier parts in order") {
    const DatasetSplit s = partition_benign(make_matrix(301), 7);
    CHECK(s.train.size() == 101);
    CHECK(s.validation.size() == 100);
    CHECK(s.holdout_benign.size() == 100);
    const DatasetSplit s2 = partition_benign(make_matrix(302), 7);
    CHECK(s2.train.size() == 101);
    CHECK(s2.validation.size() == 101);
    CHECK(s2.holdout_benign.size() == 100);
  }

  SECTION("deterministic under a fixed seed") {
    const auto m = make_matrix(100);
    const DatasetSplit a = partition_benign(m, 42);
    const DatasetSplit b = partition_benign(m, 42);
    CHECK(a.train.values == b.train.values);
    CHECK(a.validation.values == b.validation.values);
    CHECK(a.holdout_benign.values == b.holdout_benign.values);
    const DatasetSplit c = partition_benign(m, 43);
    CHECK(a.train.values != c.train.values);  // different permutation
  }

  SECTION("partition is a bijection onto the input rows") {
    const auto m = make_matrix(101);
    const DatasetSplit s = partition_benign(m, 3);
    std::vector<std::string> merged;
    for (const FeatureMatrix* part : {&s.train, &s.validation, &s.holdout_benign})
      for (const auto& k : row_keys(*part)) merged.push_back(k);
    std::sort(merged.begin(), merged.end());
    CHECK(merged == row_keys(m));
  }

  SECTION("chronological mode keeps input order") {
    const auto m = make_matrix(9);
    const DatasetSplit s = partition_benign(m, 5, true);
    CHECK(s.train.row(0)[0] == 0.0);
    CHECK(s.validation.row(0)[0] == 3.0);
    CHECK(s.holdout_benign.row(2)[0] == 8.0);
  }

  SECTION("fewer than 3 rows rejected") {
    CHECK_THROWS_AS(partition_benign(make_matrix(2), 0), std::invalid_argument);
  }
}

TEST_CASE("balanced test assembly", "[dataset]") {
  auto make_matrix = [](std::size_t n, double base, Label label) {
    FeatureMatrix m;
    m.device_id = "dev";
    m.width = 2;
    for (std::size_t i = 0; i < n; ++i)
      m.push_row(std::vector<double>{base + static_cast<double>(i), 0.0}, label);
    return m;
  };

  SECTION("benign rows plus an equally sized attack sample") {
    const auto test = build_balanced_test(make_matrix(100, 0, Label::benign),
                                          make_matrix(500, 1000, Label::attack), 11);
    CHECK(test.size() == 200);
    CHECK(test.count(Label::benign) == 100);
    CHECK(test.count(Label::attack) == 100);
    for (std::size_t i = 0; i < 100; ++i) CHECK(test.labels[i] == Label::benign);
  }

  SECTION("exact-size sample uses every attack row") {
    const auto test = build_balanced_test(make_matrix(100, 0, Label::benign),
                                          make_matrix(100, 1000, Label::attack), 11);
    CHECK(test.size() == 200);
    for (std::size_t i = 0; i < 100; ++i)
      CHECK(test.row(100 + i)[0] == 1000.0 + static_cast<double>(i));
  }

  SECTION("insufficient attack rows reported with counts") {
    CHECK_THROWS_WITH(build_balanced_test(make_matrix(100, 0, Label::benign),
                                          make_matrix(99, 1000, Label::attack), 11),
                      ContainsSubstring("99") && ContainsSubstring("100"));
  }

  SECTION("relative order within each class is preserved") {
    const auto test = build_balanced_test(make_matrix(50, 0, Label::benign),
                                          make_matrix(200, 1000, Label::attack), 23);
    for (std::size_t i = 1; i < 50; ++i) CHECK(test.row(i)[0] > test.row(i - 1)[0]);
    for (std::size_t i = 51; i < 100; ++i) CHECK(test.row(i)[0] > test.row(i - 1)[0]);
  }
}

TEST_CASE("synthetic generator", "[dataset]") {
  SECTION("shape contract and determinism") {
    SyntheticSpec spec;
    spec.n_benign = 120;
    spec.n_attack = 80;
    spec.dim = 10;
    spec.benign_correlation = 0.5;
    spec.attack_shift = 4.0;
    spec.seed = 1;
    auto [benign, attack] = generate_synthetic(spec);
    CHECK(benign.size() == 120);
    CHECK(attack.size() == 80);
    CHECK(benign.width == 10);
    CHECK(benign.count(Label::benign) == 120);
    CHECK(attack.count(Label::attack) == 80);

    auto [benign2, attack2] = generate_synthetic(spec);
    CHECK(benign.values == benign2.values);
    CHECK(attack.values == attack2.values);
  }

  SECTION("per-feature mean shift matches the spec parameter") {
    SyntheticSpec spec;
    spec.n_benign = 1000;
    spec.n_attack = 1000;
    spec.dim = 20;
    spec.benign_correlation = 0.5;
    spec.attack_shift = 6.0;
    spec.seed = 9;
    auto [benign, attack] = generate_synthetic(spec);
    for (std::size_t j = 0; j < spec.dim; ++j) {
      double mb = 0.0, ma = 0.0;
      for (std::size_t i = 0; i < benign.size(); ++i) mb += benign.row(i)[j];
      for (std::size_t i = 0; i < attack.size(); ++i) ma += attack.row(i)[j];
      const double diff = ma / 1000.0 - mb / 1000.0;
      CHECK(diff >= 5.5);
      CHECK(diff <= 6.5);
    }
  }

  SECTION("zero shift makes the classes identically distributed") {
    SyntheticSpec spec;
    spec.n_benign = 2000;
    spec.n_attack = 2000;
    spec.dim = 8;
    spec.benign_correlation = 0.3;
    spec.attack_shift = 0.0;
    spec.seed = 4;
    auto [benign, attack] = generate_synthetic(spec);
    for (std::size_t j = 0; j < spec.dim; ++j) {
      std::vector<double> cb, ca;
      for (std::size_t i = 0; i < benign.size(); ++i) cb.push_back(benign.row(i)[j]);
      for (std::size_t i = 0; i < attack.size(); ++i) ca.push_back(attack.row(i)[j]);
      const auto sb = population_stats(cb), sa = population_stats(ca);
      // mean difference ~ N(0, 2/n): |diff| < 5 * sqrt(2/2000)
      CHECK(std::abs(sb.mean - sa.mean) < 5.0 * std::sqrt(2.0 / 2000.0));
      CHECK_THAT(sb.variance, WithinAbs(sa.variance, 0.3));
    }
  }

  SECTION("marginals and pairwise correlation match the parameters") {
    SyntheticSpec spec;
    spec.n_benign = 4000;
    spec.n_attack = 1;
    spec.dim = 4;
    spec.benign_correlation = 0.6;
    spec.attack_shift = 0.0;
    spec.seed = 77;
    auto [benign, attack] = generate_synthetic(spec);
    std::vector<std::vector<double>> cols(4, std::vector<double>(benign.size()));
    for (std::size_t i = 0; i < benign.size(); ++i)
      for (std::size_t j = 0; j < 4; ++j) cols[j][i] = benign.row(i)[j];
    for (std::size_t j = 0; j < 4; ++j) {
      const auto s = population_stats(cols[j]);
      CHECK_THAT(s.mean, WithinAbs(0.0, 0.1));
      CHECK_THAT(s.variance, WithinAbs(1.0, 0.12));
    }
    // every pair correlates with magnitude benign_correlation (loading
    // signs are seeded per feature)
    for (std::size_t a = 0; a < 4; ++a)
      for (std::size_t b = a + 1; b < 4; ++b) {
        const auto sa = population_stats(cols[a]), sb = population_stats(cols[b]);
        double cov = 0.0;
        for (std::size_t i = 0; i < benign.size(); ++i)
          cov += (cols[a][i] - sa.mean) * (cols[b][i] - sb.mean);
        cov /= static_cast<double>(benign.size());
        CHECK_THAT(std::abs(cov / std::sqrt(sa.variance * sb.variance)), WithinAbs(0.6, 0.08));
      }
  }

  SECTION("invalid specs rejected") {
    SyntheticSpec spec;
    spec.n_benign = 0;
    spec.n_attack = 1;
    CHECK_THROWS_AS(generate_synthetic(spec), std::invalid_argument);
    spec.n_benign = 1;
    spec.benign_correlation = 1.0;
    CHECK_THROWS_AS(generate_synthetic(spec), std::invalid_argument);
    spec.benign_correlation = 0.5;
    spec.attack_shift = -1.0;
    CHECK_THROWS_AS(generate_synthetic(spec), std::invalid_argument);
  }
}
