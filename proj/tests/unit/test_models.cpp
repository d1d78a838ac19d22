#include <doctest.h>

#include <cmath>
#include <numeric>

#include "cropxai/error.hpp"
#include "cropxai/learners.hpp"
#include "cropxai/model.hpp"
#include "cropxai/rng.hpp"
#include "support/fixtures.hpp"
#include "support/synthetic_crops.hpp"

using namespace cropxai;

namespace {

FeatureVector random_point(Rng& rng) {
  const FeatureVector lo{0, 5, 5, 8, 14, 3.5, 20};
  const FeatureVector hi{140, 145, 205, 44, 100, 9.9, 300};
  FeatureVector x;
  for (std::size_t j = 0; j < kNumFeatures; ++j) x[j] = rng.uniform(lo[j], hi[j]);
  return x;
}

// Two crops separated by nitrogen alone: "a" below 50, "b" above 60.
Dataset separable_pair(std::size_t per_class, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  d.classes = {"a", "b"};
  for (std::size_t i = 0; i < per_class; ++i) {
    for (int c = 0; c < 2; ++c) {
      FeatureVector x = random_point(rng);
      x[kNitrogen] = c == 0 ? rng.uniform(0, 50) : rng.uniform(60, 110);
      d.samples.push_back({x, c});
    }
  }
  return d;
}

}  // namespace

TEST_SUITE("models") {
  TEST_CASE("every kind outputs a probability simplex over 22 crops") {
    Rng rng(11);
    std::vector<FeatureVector> queries{testing::kPapayaInstance};
    for (int i = 0; i < 50; ++i) queries.push_back(random_point(rng));
    for (ModelKind kind : kAllModelKinds) {
      CAPTURE(to_string(kind));
      const TrainedModel& m = testing::trained(kind);
      for (const auto& x : queries) {
        const auto p = m.predict_proba(x);
        REQUIRE(p.size() == 22);
        CHECK(std::all_of(p.begin(), p.end(), [](double v) { return v >= 0.0; }));
        CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) < 1e-9);
      }
    }
  }

  TEST_CASE("predict is the argmax with ties to the lowest index") {
    const std::vector<double> flat(22, 1.0 / 22);
    CHECK(argmax(flat) == 0);
    CHECK(argmax(std::vector<double>{0.2, 0.4, 0.4}) == 1);
  }

  TEST_CASE("non-finite input is an input error") {
    FeatureVector x = testing::kPapayaInstance;
    x[kPh] = std::nan("");
    for (ModelKind kind : kAllModelKinds) CHECK_THROWS_AS(testing::trained(kind).predict(x), InputError);
  }

  TEST_CASE("RF predicts papaya for the papaya instance") {
    CHECK(predict_label(testing::trained(ModelKind::rf), testing::kPapayaInstance) == "papaya");
  }

  TEST_CASE("training is deterministic for a fixed seed") {
    const Dataset d = testing::synthetic_crops(15, 4);
    for (ModelKind kind : kAllModelKinds) {
      CAPTURE(to_string(kind));
      const TrainedModel a = train_model(kind, d, 9);
      const TrainedModel b = train_model(kind, d, 9);
      CHECK(a.fit() == b.fit());
    }
  }

  TEST_CASE("single-class and empty data are degenerate") {
    Dataset d = separable_pair(5, 1);
    std::erase_if(d.samples, [](const Sample& s) { return *s.label == 1; });
    CHECK_THROWS_AS(train_model(ModelKind::dt, d, 1), DegenerateDataError);
    CHECK_THROWS_AS(train_model(ModelKind::dt, Dataset{}, 1), DegenerateDataError);
  }

  TEST_CASE("invalid hyperparameters are configuration errors") {
    CHECK_THROWS_AS(validate(KnnParams{0, Metric::euclidean}), ConfigError);
    DtParams dt;
    dt.min_samples_split = 1;
    CHECK_THROWS_AS(validate(dt), ConfigError);
    LgbmParams lg;
    lg.num_leaves = 1;
    CHECK_THROWS_AS(validate(lg), ConfigError);
    SvmParams svm;
    svm.c = 0.0;
    CHECK_THROWS_AS(validate(svm), ConfigError);
    MlpParams mlp;
    mlp.alpha = -1.0;
    CHECK_THROWS_AS(validate(mlp), ConfigError);
    mlp = MlpParams{};
    mlp.hidden_layer_sizes = {10, 0};
    CHECK_THROWS_AS(validate(mlp), ConfigError);
  }

  TEST_CASE("a depth-1 tree separates a one-feature problem perfectly") {
    const Dataset d = separable_pair(30, 2);
    DtParams p;
    p.max_depth = 1;
    const TrainedModel m = train_model(p, d, 1);
    const auto& tree = std::get<TreeFit>(m.fit()).tree;
    CHECK(tree.depth() == 1);
    CHECK(tree.feature[0] == static_cast<int>(kNitrogen));
    for (const auto& s : d.samples) CHECK(m.predict(s.features) == *s.label);
  }

  TEST_CASE("a stump leaf reports the training class frequencies of its side") {
    // Fixture CSV: split maize/mango/papaya/rice with a single threshold and
    // count by hand which training rows land left.
    const Dataset d = testing::fixture_dataset();
    DtParams p;
    p.max_depth = 1;
    const TrainedModel m = train_model(p, d, 1);
    const Tree& t = std::get<TreeFit>(m.fit()).tree;
    REQUIRE(!t.is_leaf(0));
    std::vector<double> left(22, 0.0);
    double n_left = 0;
    for (const auto& s : d.samples) {
      if (s.features[static_cast<std::size_t>(t.feature[0])] <= t.threshold[0]) {
        left[static_cast<std::size_t>(*s.label)] += 1;
        n_left += 1;
      }
    }
    FeatureVector probe{};
    for (const auto& s : d.samples) {
      if (s.features[static_cast<std::size_t>(t.feature[0])] <= t.threshold[0]) {
        probe = s.features;
        break;
      }
    }
    const auto p_left = m.predict_proba(probe);
    for (std::size_t c = 0; c < 22; ++c) CHECK(p_left[c] == doctest::Approx(left[c] / n_left).epsilon(1e-12));
  }

  TEST_CASE("an unbounded tree fits distinct training rows exactly") {
    const Dataset d = testing::synthetic_crops(20, 6);
    DtParams p;
    p.max_depth = 10000;  // deeper than any tree 440 rows can build
    p.min_samples_split = 2;
    const TrainedModel m = train_model(p, d, 3);
    for (const auto& s : d.samples) CHECK(m.predict(s.features) == *s.label);
  }

  TEST_CASE("1-NN recovers every training label") {
    const Dataset d = testing::synthetic_crops(10, 8);
    for (Metric metric : {Metric::euclidean, Metric::cityblock}) {
      const TrainedModel m = train_model(KnnParams{1, metric}, d, 1);
      for (const auto& s : d.samples) CHECK(m.predict(s.features) == *s.label);
    }
  }

  TEST_CASE("RF with one unbootstrapped tree over all features equals a DT") {
    const Dataset& train = testing::synthetic_split().train;
    for (Criterion criterion : {Criterion::gini, Criterion::entropy}) {
      RfParams rf;
      rf.n_estimators = 1;
      rf.bootstrap = false;
      rf.max_features = 0;
      rf.max_depth = 9;
      rf.criterion = criterion;
      DtParams dt;
      dt.max_depth = 9;
      dt.criterion = criterion;
      dt.min_samples_split = 2;
      const TrainedModel a = train_model(rf, train, 5);
      const TrainedModel b = train_model(dt, train, 77);
      Rng rng(12);
      for (int i = 0; i < 500; ++i) {
        const FeatureVector x = random_point(rng);
        CHECK(a.predict_proba(x) == b.predict_proba(x));
      }
    }
  }

  TEST_CASE("internal node values are the weighted mean of their children") {
    auto check_tree = [](const Tree& t) {
      for (std::size_t n = 0; n < t.size(); ++n) {
        if (t.is_leaf(n)) continue;
        const auto l = static_cast<std::size_t>(t.left[n]);
        const auto r = static_cast<std::size_t>(t.right[n]);
        CHECK(std::abs(t.weight[n] - t.weight[l] - t.weight[r]) < 1e-9);
        for (std::size_t k = 0; k < t.width; ++k) {
          const double mix = (t.weight[l] * t.node_value(l)[k] + t.weight[r] * t.node_value(r)[k]) / t.weight[n];
          CHECK(std::abs(t.node_value(n)[k] - mix) < 1e-9);
        }
      }
    };
    check_tree(std::get<TreeFit>(testing::trained(ModelKind::dt).fit()).tree);
    for (const Tree& t : std::get<ForestFit>(testing::trained(ModelKind::rf).fit()).trees) check_tree(t);
    for (const auto& per_class : std::get<BoostFit>(testing::trained(ModelKind::lgbm).fit()).trees) {
      for (const Tree& t : per_class) check_tree(t);
    }
  }

  TEST_CASE("RF logs the features each tree uses") {
    const auto& fit = std::get<ForestFit>(testing::trained(ModelKind::rf).fit());
    REQUIRE(fit.trees.size() == 89);
    for (std::size_t t = 0; t < fit.trees.size(); ++t) {
      for (int f : fit.trees[t].feature) {
        if (f >= 0) CHECK(std::binary_search(fit.features_used[t].begin(), fit.features_used[t].end(), f));
      }
    }
  }

  TEST_CASE("LGBM training loss never increases") {
    const auto& fit = std::get<BoostFit>(testing::trained(ModelKind::lgbm).fit());
    REQUIRE(fit.loss_trace.size() == 43);
    for (std::size_t r = 1; r < fit.loss_trace.size(); ++r) CHECK(fit.loss_trace[r] <= fit.loss_trace[r - 1] + 1e-12);
    LgbmParams p;
    p.num_leaves = 20;
    p.n_estimators = 30;
    p.learning_rate = 0.5;
    const TrainedModel m = train_model(p, testing::synthetic_crops(20, 2), 1);
    const auto& trace = std::get<BoostFit>(m.fit()).loss_trace;
    for (std::size_t r = 1; r < trace.size(); ++r) CHECK(trace[r] <= trace[r - 1] + 1e-12);
  }

  TEST_CASE("LGBM trees respect num_leaves") {
    const auto& fit = std::get<BoostFit>(testing::trained(ModelKind::lgbm).fit());
    for (const auto& per_class : fit.trees) {
      for (const Tree& t : per_class) {
        std::size_t leaves = 0;
        for (std::size_t n = 0; n < t.size(); ++n) leaves += t.is_leaf(n) ? 1 : 0;
        CHECK(leaves <= 5);
      }
    }
  }

  TEST_CASE("MLP analytic gradient matches central differences") {
    Rng rng(5);
    const std::size_t n = 12;
    Eigen::MatrixXd inputs(n, 7);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (int j = 0; j < 7; ++j) inputs(static_cast<Eigen::Index>(i), j) = rng.normal();
      labels[i] = static_cast<int>(i % 3);
    }
    for (Activation act : {Activation::tanh, Activation::relu}) {
      MlpNetwork net = init_network(7, {5, 4}, 3, act, 17);
      const double alpha = 0.3;
      MlpNetwork grad;
      net.loss_and_gradient(inputs, labels, alpha, &grad);
      const double h = 1e-5;
      double worst = 0.0;
      auto probe = [&](double& param, double analytic) {
        const double saved = param;
        param = saved + h;
        const double up = net.loss_and_gradient(inputs, labels, alpha, nullptr);
        param = saved - h;
        const double down = net.loss_and_gradient(inputs, labels, alpha, nullptr);
        param = saved;
        const double numeric = (up - down) / (2 * h);
        const double rel = std::abs(numeric - analytic) / std::max(1e-8, std::abs(numeric) + std::abs(analytic));
        worst = std::max(worst, rel);
      };
      for (std::size_t l = 0; l < net.weights.size(); ++l) {
        for (Eigen::Index i = 0; i < net.weights[l].size(); ++i) probe(net.weights[l].data()[i], grad.weights[l].data()[i]);
        for (Eigen::Index i = 0; i < net.biases[l].size(); ++i) probe(net.biases[l].data()[i], grad.biases[l].data()[i]);
      }
      CAPTURE(to_string(act));
      CHECK(worst < 1e-4);
    }
  }

  TEST_CASE("SVM reaches zero hinge loss on separable data with weak regularisation") {
    const Dataset d = separable_pair(40, 3);
    for (Kernel kernel : {Kernel::linear, Kernel::rbf}) {
      SvmParams p;
      p.kernel = kernel;
      p.c = 1000.0;
      p.gamma = 0.001;
      const TrainedModel m = train_model(p, d, 1);
      const auto& fit = std::get<SvmFit>(m.fit());
      REQUIRE(fit.pairs.size() == 1);
      const SvmPair& pair = fit.pairs[0];
      double hinge = 0.0;
      for (const auto& s : d.samples) {
        double f = pair.bias;
        if (kernel == Kernel::linear) {
          for (std::size_t j = 0; j < kNumFeatures; ++j) f += pair.weights[j] * s.features[j];
        } else {
          for (std::size_t k = 0; k < pair.support.size(); ++k) {
            const FeatureVector& sv = fit.support[static_cast<std::size_t>(pair.support[k])];
            double d2 = 0.0;
            for (std::size_t j = 0; j < kNumFeatures; ++j) d2 += (sv[j] - s.features[j]) * (sv[j] - s.features[j]);
            f += pair.coef[k] * std::exp(-fit.gamma * d2);
          }
        }
        const double y = *s.label == 0 ? 1.0 : -1.0;
        hinge += std::max(0.0, 1.0 - y * f);
      }
      CAPTURE(to_string(kernel));
      CHECK(hinge < 1e-2);
      for (const auto& s : d.samples) CHECK(m.predict(s.features) == *s.label);
    }
  }

  TEST_CASE("classes missing from training get probability 0 where the learner models classes") {
    const Dataset d = testing::fixture_dataset();
    for (ModelKind kind : {ModelKind::lgbm, ModelKind::svm, ModelKind::mlp}) {
      const TrainedModel m = train_model(kind, d, 1);
      const auto p = m.predict_proba(testing::kPapayaInstance);
      const auto counts = d.class_counts();
      for (std::size_t c = 0; c < 22; ++c) {
        if (counts[c] == 0) CHECK(p[c] == 0.0);
      }
    }
  }

  TEST_CASE("tree learners honour a feature mask") {
    TrainOptions opt;
    opt.allowed = {true, true, true, false, true, false, true};
    const TrainedModel m = train_model(default_params(ModelKind::rf), testing::synthetic_crops(10, 1), 1, opt);
    for (const Tree& t : std::get<ForestFit>(m.fit()).trees) {
      for (int f : t.feature) CHECK((f != static_cast<int>(kTemperature) && f != static_cast<int>(kPh)));
    }
    CHECK_THROWS_AS(train_model(default_params(ModelKind::knn), testing::synthetic_crops(10, 1), 1, opt), ConfigError);
  }
}
