#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "cropxai/data.hpp"
#include "cropxai/error.hpp"
#include "cropxai/rng.hpp"
#include "support/fixtures.hpp"
#include "support/synthetic_crops.hpp"

using namespace cropxai;

namespace {

Dataset parse(const std::string& text) {
  std::istringstream in(text);
  return load_dataset(in);
}

}  // namespace

TEST_SUITE("data") {
  TEST_CASE("a single Kaggle-style row parses field by field") {
    const Dataset d = parse("N,P,K,temperature,humidity,ph,rainfall,label\n90,42,43,20.88,82.00,6.50,202.94,rice\n");
    REQUIRE(d.size() == 1);
    const auto& s = d.samples[0];
    CHECK(s.features[kNitrogen] == 90.0);
    CHECK(s.features[kPhosphorus] == 42.0);
    CHECK(s.features[kPotassium] == 43.0);
    CHECK(s.features[kTemperature] == 20.88);
    CHECK(s.features[kHumidity] == 82.0);
    CHECK(s.features[kPh] == 6.5);
    CHECK(s.features[kRainfall] == 202.94);
    REQUIRE(s.label.has_value());
    CHECK(d.classes[*s.label] == "rice");
  }

  TEST_CASE("header only gives an empty dataset") {
    const Dataset d = parse("N,P,K,temperature,humidity,ph,rainfall,label\n");
    CHECK(d.empty());
    CHECK(d.num_classes() == 22);
  }

  TEST_CASE("columns are matched by name, in any order, label optional") {
    const Dataset d = parse("rainfall,ph,humidity,temperature,potassium,phosphorus,nitrogen\n1,2,3,4,5,6,7\n");
    REQUIRE(d.size() == 1);
    CHECK(d.samples[0].features == FeatureVector{7, 6, 5, 4, 3, 2, 1});
    CHECK_FALSE(d.samples[0].label.has_value());
  }

  TEST_CASE("a missing column is a schema error naming it") {
    try {
      parse("N,P,K,temperature,humidity,rainfall,label\n");
      FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
      CHECK(std::string(e.what()).find("ph") != std::string::npos);
    }
  }

  TEST_CASE("an unparseable number is a row error with the line number") {
    try {
      parse("N,P,K,temperature,humidity,ph,rainfall,label\n1,2,3,4,5,6,7,rice\n1,2,x,4,5,6,7,rice\n");
      FAIL("expected RowError");
    } catch (const RowError& e) {
      CHECK(e.line() == 3);
    }
  }

  TEST_CASE("out-of-range rows are rejected, not clamped") {
    CHECK_THROWS_AS(parse("N,P,K,temperature,humidity,ph,rainfall\n1,2,3,4,101,6,7\n"), RowError);
    CHECK_THROWS_AS(parse("N,P,K,temperature,humidity,ph,rainfall\n1,2,3,4,50,14.5,7\n"), RowError);
    CHECK_THROWS_AS(parse("N,P,K,temperature,humidity,ph,rainfall\n-1,2,3,4,50,6,7\n"), RowError);
    CHECK_THROWS_AS(parse("N,P,K,temperature,humidity,ph,rainfall\nnan,2,3,4,50,6,7\n"), RowError);
  }

  TEST_CASE("an unknown crop is a label error") {
    CHECK_THROWS_AS(parse("N,P,K,temperature,humidity,ph,rainfall,label\n1,2,3,4,5,6,7,tomato\n"), LabelError);
  }

  TEST_CASE("crop names resolve regardless of case and spacing") {
    CHECK(find_class(crop_classes(), "Kidney Beans") == find_class(crop_classes(), "kidneybeans"));
    CHECK(find_class(crop_classes(), "PIGEON_PEAS").has_value());
    CHECK_FALSE(find_class(crop_classes(), "tomato").has_value());
  }

  TEST_CASE("class order is lexicographic") {
    const auto& c = crop_classes();
    CHECK(c.size() == 22);
    CHECK(std::is_sorted(c.begin(), c.end()));
  }

  TEST_CASE("the bundled fixture has 10 rows for each of 4 crops") {
    const Dataset d = testing::fixture_dataset();
    CHECK(d.size() == 40);
    CHECK(d.present_classes() == 4);
    for (std::size_t n : d.class_counts()) CHECK((n == 0 || n == 10));
  }

  TEST_CASE("write then load reproduces every value") {
    const Dataset d = testing::synthetic_crops(5, 3);
    std::stringstream buf;
    write_dataset(buf, d);
    const Dataset back = load_dataset(buf);
    REQUIRE(back.size() == d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
      CHECK(back.samples[i].features == d.samples[i].features);
      CHECK(back.samples[i].label == d.samples[i].label);
    }
  }

  TEST_CASE("the 70/30 split of 2200 rows holds out 660, 30 per crop") {
    const Split s = stratified_split(testing::synthetic_full(), 0.3, 42);
    CHECK(s.test.size() == 660);
    CHECK(s.train.size() == 1540);
    for (std::size_t n : s.test.class_counts()) CHECK(n == 30);
  }

  TEST_CASE("reported accuracies are whole counts out of 660") {
    // Accuracy column of the published results table.
    for (double acc : {96.6667, 99.2424, 98.4848, 97.4242, 97.5758, 95.6061}) {
      const double correct = acc * 6.6;
      CHECK(std::abs(correct - std::round(correct)) < 1e-3);
    }
  }

  TEST_CASE("split is deterministic, disjoint and exhaustive") {
    const Dataset d = testing::synthetic_crops(13, 5);
    for (std::uint64_t seed : {0ULL, 1ULL, 42ULL, 977ULL}) {
      for (double f : {0.2, 0.3, 0.5}) {
        const Split a = stratified_split(d, f, seed);
        const Split b = stratified_split(d, f, seed);
        CHECK(a.train.feature_matrix() == b.train.feature_matrix());
        CHECK(a.test.feature_matrix() == b.test.feature_matrix());
        CHECK(a.train.size() + a.test.size() == d.size());
        std::multiset<FeatureVector> all, parts;
        for (const auto& s : d.samples) all.insert(s.features);
        for (const auto& s : a.train.samples) parts.insert(s.features);
        for (const auto& s : a.test.samples) parts.insert(s.features);
        CHECK(all == parts);
        const auto counts = d.class_counts();
        const auto test_counts = a.test.class_counts();
        for (std::size_t c = 0; c < counts.size(); ++c) {
          CHECK(test_counts[c] == static_cast<std::size_t>(std::llround(counts[c] * f)));
          CHECK(std::abs(static_cast<double>(test_counts[c]) - counts[c] * f) <= 1.0);
        }
      }
    }
  }

  TEST_CASE("four rows in two classes split in half give one test row per class") {
    Dataset d;
    d.classes = {"a", "b"};
    d.samples = {{{1, 1, 1, 1, 1, 1, 1}, 0}, {{2, 2, 2, 2, 2, 2, 2}, 0}, {{3, 3, 3, 3, 3, 3, 3}, 1},
                 {{4, 4, 4, 4, 4, 4, 4}, 1}};
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const Split s = stratified_split(d, 0.5, seed);
      CHECK(s.test.class_counts() == std::vector<std::size_t>{1, 1});
    }
  }

  TEST_CASE("a fraction that empties one side is a split error") {
    Dataset d;
    d.classes = {"a", "b"};
    d.samples = {{{1, 1, 1, 1, 1, 1, 1}, 0}, {{2, 2, 2, 2, 2, 2, 2}, 0}, {{3, 3, 3, 3, 3, 3, 3}, 1}};
    CHECK_THROWS_AS(stratified_split(d, 0.3, 1), SplitError);
    CHECK_THROWS_AS(stratified_split(d, 0.0, 1), SplitError);
    CHECK_THROWS_AS(stratified_split(d, 1.0, 1), SplitError);
  }

  TEST_CASE("stratified folds partition the rows and balance classes") {
    const Dataset d = testing::synthetic_crops(10, 9);
    const auto folds = stratified_folds(d, 5, 42);
    std::vector<int> seen(d.size(), 0);
    for (const auto& f : folds) {
      for (std::size_t i : f) ++seen[i];
      CHECK(d.subset(f).present_classes() == 22);
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](int n) { return n == 1; }));
    CHECK_THROWS_AS(stratified_folds(d, 1, 42), ConfigError);
  }

  TEST_CASE("stratified sample keeps class proportions") {
    const Dataset bg = stratified_sample(testing::synthetic_full(), 110, 42);
    CHECK(bg.size() == 110);
    for (std::size_t n : bg.class_counts()) CHECK(n == 5);
  }

  TEST_CASE("statistics of a single sample") {
    Dataset d;
    d.samples = {{{1, 2, 3, 4, 5, 6, 7}, std::nullopt}};
    const FeatureStats s = compute_stats(d);
    for (std::size_t j = 0; j < kNumFeatures; ++j) {
      const double v = static_cast<double>(j + 1);
      CHECK(s[j].min == v);
      CHECK(s[j].max == v);
      CHECK(s[j].mean == v);
      CHECK(s[j].q1 == v);
      CHECK(s[j].median == v);
      CHECK(s[j].q3 == v);
      CHECK(s[j].std == 0.0);
      CHECK(s[j].mad == 0.0);
    }
  }

  TEST_CASE("statistics of two samples {0, 10}") {
    Dataset d;
    d.samples = {{{0, 0, 0, 0, 0, 0, 0}, std::nullopt}, {{10, 10, 10, 10, 10, 10, 10}, std::nullopt}};
    const FeatureStats s = compute_stats(d);
    CHECK(s[0].mean == 5.0);
    CHECK(s[0].min == 0.0);
    CHECK(s[0].max == 10.0);
    CHECK(s[0].q1 == 2.5);
    CHECK(s[0].median == 5.0);
    CHECK(s[0].q3 == 7.5);
    CHECK_THROWS_AS(compute_stats(Dataset{}), InputError);
  }

  TEST_CASE("linear-interpolation quantiles") {
    const std::vector<double> v{1, 2, 3, 4};
    CHECK(quantile_sorted(v, 0.0) == 1.0);
    CHECK(quantile_sorted(v, 0.25) == doctest::Approx(1.75));
    CHECK(quantile_sorted(v, 0.5) == doctest::Approx(2.5));
    CHECK(quantile_sorted(v, 1.0) == 4.0);
  }

  TEST_CASE("scaled training features have mean 0 and std 1") {
    const Dataset& d = testing::synthetic_split().train;
    const Scaler sc = fit_scaler(d);
    for (std::size_t j = 0; j < kNumFeatures; ++j) {
      double sum = 0, sq = 0;
      for (const auto& s : d.samples) {
        const double z = apply_scaler(sc, s).features[j];
        sum += z;
        sq += z * z;
      }
      const double n = static_cast<double>(d.size());
      CHECK(std::abs(sum / n) < 1e-9);
      CHECK(std::abs(std::sqrt(sq / n - (sum / n) * (sum / n)) - 1.0) < 1e-9);
    }
  }

  TEST_CASE("constant columns scale to 0 and {-1, +1} is left alone") {
    Dataset d;
    d.samples = {{{-1, 5, 0, 0, 0, 0, 0}, std::nullopt}, {{1, 5, 0, 0, 0, 0, 0}, std::nullopt}};
    const Scaler sc = fit_scaler(d);
    CHECK(sc.apply(d.samples[0].features)[0] == -1.0);
    CHECK(sc.apply(d.samples[1].features)[0] == 1.0);
    CHECK(sc.apply(d.samples[0].features)[1] == 0.0);
    CHECK(sc.apply(d.samples[1].features)[1] == 0.0);
  }

  TEST_CASE("scaler round trip") {
    const Scaler sc = fit_scaler(testing::synthetic_split().train);
    const FeatureVector back = sc.invert(sc.apply(testing::kPapayaInstance));
    for (std::size_t j = 0; j < kNumFeatures; ++j) CHECK(std::abs(back[j] - testing::kPapayaInstance[j]) < 1e-9);
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
      FeatureVector x;
      for (double& v : x) v = rng.uniform(-1e4, 1e4);
      const FeatureVector r = sc.invert(sc.apply(x));
      for (std::size_t j = 0; j < kNumFeatures; ++j) CHECK(std::abs(r[j] - x[j]) <= 1e-9 * std::max(1.0, std::abs(x[j])));
    }
  }
}
