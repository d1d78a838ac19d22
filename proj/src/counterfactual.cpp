#include "cropxai/counterfactual.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "cropxai/error.hpp"
#include "cropxai/rng.hpp"

namespace cropxai {

namespace {

struct Bounds {
  double lo;
  double hi;
};

struct Scored {
  FeatureVector x{};
  bool valid = false;
  double score = 0.0;  // cost when valid, otherwise the probability gap
  double target_probability = 0.0;
};

class Search {
 public:
  Search(const Classifier& model, const FeatureVector& query, const CounterfactualConfig& config,
         const FeatureStats& stats)
      : model_(model), query_(query), config_(config), scale_(distance_scales(stats)),
        proba_(model.num_classes()) {
    for (std::size_t j = 0; j < kNumFeatures; ++j) {
      const auto& r = config.ranges[j];
      bounds_[j] = r ? Bounds{r->first, r->second} : Bounds{stats[j].min, stats[j].max};
      if (!(bounds_[j].lo <= bounds_[j].hi)) {
        throw ConfigError("empty permitted range for feature " + FeatureSchema::crop().names[j]);
      }
      if (!config.immutable[j]) mutable_.push_back(j);
    }
  }

  const std::vector<std::size_t>& mutable_features() const { return mutable_; }

  double distance(const FeatureVector& x) const {
    double d = 0.0;
    for (std::size_t j = 0; j < kNumFeatures; ++j) d += std::abs(x[j] - query_[j]) / scale_[j];
    return d;
  }

  std::size_t changed(const FeatureVector& x) const {
    std::size_t c = 0;
    for (std::size_t j = 0; j < kNumFeatures; ++j) c += x[j] != query_[j];
    return c;
  }

  double cost(const FeatureVector& x) const {
    return config_.proximity_weight * distance(x) +
           config_.sparsity_weight * static_cast<double>(changed(x));
  }

  bool in_range(std::size_t j, double v) const { return v >= bounds_[j].lo && v <= bounds_[j].hi; }

  Scored score(const FeatureVector& x) {
    model_.predict_proba(x, proba_);
    const auto t = static_cast<std::size_t>(config_.target);
    Scored s;
    s.x = x;
    s.target_probability = proba_[t];
    s.valid = argmax(proba_) == config_.target;
    if (s.valid) {
      s.score = cost(x);
    } else {
      double other = 0.0;
      for (std::size_t c = 0; c < proba_.size(); ++c) {
        if (c != t) other = std::max(other, proba_[c]);
      }
      s.score = (other - proba_[t]) + 1e-3 * cost(x);
    }
    return s;
  }

  bool valid(const FeatureVector& x) {
    model_.predict_proba(x, proba_);
    return argmax(proba_) == config_.target;
  }

  double uniform_in_range(std::size_t j, Rng& rng) const {
    return rng.uniform(bounds_[j].lo, bounds_[j].hi);
  }

  FeatureVector random_individual(Rng& rng) const {
    FeatureVector x = query_;
    std::vector<std::size_t> order = mutable_;
    rng.shuffle(order);
    const std::size_t k = 1 + rng.index(order.size());
    for (std::size_t i = 0; i < k; ++i) x[order[i]] = uniform_in_range(order[i], rng);
    return x;
  }

  void mutate(FeatureVector& x, Rng& rng) const {
    const double rate = 1.0 / static_cast<double>(mutable_.size());
    bool touched = false;
    for (std::size_t j : mutable_) {
      if (rng.uniform() >= rate) continue;
      touched = true;
      mutate_gene(x, j, rng);
    }
    if (!touched) mutate_gene(x, mutable_[rng.index(mutable_.size())], rng);
  }

  // Reverts changes that are not needed for validity, then moves each
  // remaining change as close to the query as validity allows.
  FeatureVector tighten(FeatureVector x) {
    std::vector<std::size_t> order;
    for (std::size_t j : mutable_) {
      if (x[j] != query_[j]) order.push_back(j);
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return std::abs(x[a] - query_[a]) / scale_[a] < std::abs(x[b] - query_[b]) / scale_[b];
    });
    for (std::size_t j : order) {
      const double keep = x[j];
      x[j] = query_[j];
      if (!valid(x)) x[j] = keep;
    }
    for (std::size_t j : order) {
      if (x[j] == query_[j]) continue;
      const double target_value = x[j];
      double lo = 0.0;  // fraction of the change known to be insufficient or unchecked
      double hi = 1.0;  // fraction known to be valid
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double v = query_[j] + mid * (target_value - query_[j]);
        x[j] = v;
        if (v != query_[j] && in_range(j, v) && valid(x)) {
          hi = mid;
        } else {
          lo = mid;
        }
      }
      x[j] = hi == 1.0 ? target_value : query_[j] + hi * (target_value - query_[j]);
    }
    return x;
  }

 private:
  void mutate_gene(FeatureVector& x, std::size_t j, Rng& rng) const {
    const double u = rng.uniform();
    if (u < 0.25) {
      x[j] = query_[j];
    } else if (u < 0.6) {
      x[j] = uniform_in_range(j, rng);
    } else {
      const double span = bounds_[j].hi - bounds_[j].lo;
      const double base = in_range(j, x[j]) ? x[j] : std::clamp(x[j], bounds_[j].lo, bounds_[j].hi);
      x[j] = std::clamp(base + 0.1 * span * rng.normal(), bounds_[j].lo, bounds_[j].hi);
    }
  }

  const Classifier& model_;
  FeatureVector query_;
  const CounterfactualConfig& config_;
  FeatureVector scale_;
  std::array<Bounds, kNumFeatures> bounds_{};
  std::vector<std::size_t> mutable_;
  std::vector<double> proba_;
};

// Valid before invalid, then lower score, then earlier index.
bool better(const Scored& a, const Scored& b) {
  if (a.valid != b.valid) return a.valid;
  return a.score < b.score;
}

void validate_config(const Classifier& model, const CounterfactualConfig& c) {
  if (c.target < 0 || static_cast<std::size_t>(c.target) >= model.num_classes()) {
    throw InputError("target class index " + std::to_string(c.target) + " out of range");
  }
  if (c.count < 1) throw ConfigError("counterfactual count must be >= 1");
  if (c.population < 2) throw ConfigError("population must be >= 2");
  if (c.generations < 1) throw ConfigError("generations must be >= 1");
  if (c.proximity_weight < 0 || c.sparsity_weight < 0 || c.diversity_weight < 0) {
    throw ConfigError("counterfactual weights must be >= 0");
  }
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

FeatureVector distance_scales(const FeatureStats& stats) {
  FeatureVector s{};
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    const FeatureSummary& f = stats[j];
    if (f.mad > 0.0) {
      s[j] = f.mad;
    } else if (f.max > f.min) {
      s[j] = (f.max - f.min) / 2.0;
    } else {
      s[j] = 1.0;
    }
  }
  return s;
}

CounterfactualResult counterfactual_search(const Classifier& model, const FeatureVector& query,
                                           const CounterfactualConfig& config, const FeatureStats& stats) {
  for (double v : query) {
    if (!std::isfinite(v)) throw InputError("feature values must be finite");
  }
  validate_config(model, config);
  Search search(model, query, config, stats);

  CounterfactualResult result;
  result.target = config.target;
  result.seed = config.seed;
  result.query_prediction = model.predict(query);

  auto make = [&](const FeatureVector& x) {
    Counterfactual c;
    c.features = x;
    c.predicted = model.predict(x);
    for (std::size_t j = 0; j < kNumFeatures; ++j) c.deltas[j] = x[j] - query[j];
    c.distance = search.distance(x);
    c.changed = search.changed(x);
    c.target_probability = model.predict_proba(x)[static_cast<std::size_t>(config.target)];
    return c;
  };

  if (result.query_prediction == config.target) {
    result.status = CounterfactualStatus::found;
    result.counterfactuals.push_back(make(query));
    return result;
  }
  if (search.mutable_features().empty()) return result;

  Rng rng(config.seed);
  std::vector<Scored> pop;
  pop.reserve(config.population);
  pop.push_back(search.score(query));
  while (pop.size() < config.population) pop.push_back(search.score(search.random_individual(rng)));

  std::map<FeatureVector, double> archive;  // valid candidates -> cost
  auto remember = [&](const std::vector<Scored>& group) {
    for (const Scored& s : group) {
      if (s.valid) archive.emplace(s.x, s.score);
    }
    if (archive.size() > 2000) {
      std::vector<std::pair<double, FeatureVector>> items;
      for (const auto& [x, c] : archive) items.emplace_back(c, x);
      std::stable_sort(items.begin(), items.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      archive.clear();
      for (std::size_t i = 0; i < 1000; ++i) archive.emplace(items[i].second, items[i].first);
    }
  };
  remember(pop);

  const std::size_t elite = std::max<std::size_t>(2, config.population / 10);
  double best_cost = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  for (std::size_t gen = 0; gen < config.generations; ++gen) {
    std::stable_sort(pop.begin(), pop.end(), better);
    result.generations_run = gen + 1;
    if (pop.front().valid) {
      if (pop.front().score < best_cost - 1e-12) {
        best_cost = pop.front().score;
        stale = 0;
      } else if (config.patience > 0 && ++stale >= config.patience) {
        break;
      }
    }
    auto pick = [&]() -> const Scored& {
      std::size_t best = rng.index(pop.size());
      for (int t = 0; t < 2; ++t) best = std::min(best, rng.index(pop.size()));  // pop is sorted
      return pop[best];
    };
    std::vector<Scored> next(pop.begin(), pop.begin() + static_cast<std::ptrdiff_t>(elite));
    while (next.size() < config.population) {
      const Scored& a = pick();
      const Scored& b = pick();
      FeatureVector child = a.x;
      for (std::size_t j : search.mutable_features()) {
        if (rng.uniform() < 0.5) child[j] = b.x[j];
      }
      search.mutate(child, rng);
      next.push_back(search.score(child));
    }
    pop = std::move(next);
    remember(pop);
  }

  if (archive.empty()) return result;

  std::vector<std::pair<double, FeatureVector>> ranked;
  for (const auto& [x, c] : archive) ranked.emplace_back(c, x);
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  const std::size_t pool_size = std::min(ranked.size(), 5 * config.count + 5);
  std::vector<FeatureVector> pool;
  for (std::size_t i = 0; i < pool_size; ++i) {
    FeatureVector t = search.tighten(ranked[i].second);
    if (search.valid(t) && std::find(pool.begin(), pool.end(), t) == pool.end()) pool.push_back(t);
  }

  const FeatureVector scale = distance_scales(stats);
  auto separation = [&](const FeatureVector& a, const FeatureVector& b) {
    double d = 0.0;
    for (std::size_t j = 0; j < kNumFeatures; ++j) d += std::abs(a[j] - b[j]) / scale[j];
    return d;
  };
  std::vector<FeatureVector> chosen;
  std::vector<bool> used(pool.size(), false);
  while (chosen.size() < config.count && chosen.size() < pool.size()) {
    std::size_t best = pool.size();
    double best_score = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (used[i]) continue;
      double penalty = 0.0;
      if (!chosen.empty()) {
        double nearest = std::numeric_limits<double>::infinity();
        for (const auto& c : chosen) nearest = std::min(nearest, separation(pool[i], c));
        penalty = config.diversity_weight * std::exp(-nearest);
      }
      const double s = search.cost(pool[i]) + penalty;
      if (s < best_score) {
        best_score = s;
        best = i;
      }
    }
    used[best] = true;
    chosen.push_back(pool[best]);
  }

  for (const auto& x : chosen) result.counterfactuals.push_back(make(x));
  std::stable_sort(result.counterfactuals.begin(), result.counterfactuals.end(),
                   [](const Counterfactual& a, const Counterfactual& b) { return a.distance < b.distance; });
  result.status = result.counterfactuals.empty() ? CounterfactualStatus::not_found
                                                 : CounterfactualStatus::found;
  return result;
}

std::vector<std::vector<DeltaRow>> counterfactual_delta_report(const FeatureVector& query,
                                                               const std::vector<FeatureVector>& counterfactuals) {
  std::vector<std::vector<DeltaRow>> out;
  for (const auto& cf : counterfactuals) {
    std::vector<DeltaRow> rows;
    for (std::size_t j = 0; j < kNumFeatures; ++j) {
      const double d = cf[j] - query[j];
      if (d != 0.0) rows.push_back({j, query[j], cf[j], d});
    }
    out.push_back(std::move(rows));
  }
  return out;
}

nlohmann::json counterfactual_to_json(const CounterfactualResult& result, const FeatureVector& query,
                                      const FeatureSchema& schema, const std::vector<std::string>& classes) {
  auto features_json = [&](const FeatureVector& x) {
    nlohmann::json o = nlohmann::json::object();
    for (std::size_t j = 0; j < kNumFeatures; ++j) o[schema.names[j]] = x[j];
    return o;
  };
  nlohmann::json list = nlohmann::json::array();
  for (const Counterfactual& c : result.counterfactuals) {
    list.push_back({{"features", std::vector<double>(c.features.begin(), c.features.end())},
                    {"values", features_json(c.features)},
                    {"deltas", features_json(c.deltas)},
                    {"predicted_class", classes.at(static_cast<std::size_t>(c.predicted))},
                    {"target_probability", c.target_probability},
                    {"distance", c.distance},
                    {"changed_features", c.changed}});
  }
  return {{"status", result.status == CounterfactualStatus::found ? "found" : "not_found"},
          {"target_class", classes.at(static_cast<std::size_t>(result.target))},
          {"query", std::vector<double>(query.begin(), query.end())},
          {"query_prediction", classes.at(static_cast<std::size_t>(result.query_prediction))},
          {"counterfactuals", list},
          {"generations_run", result.generations_run},
          {"seed", result.seed}};
}

std::string render_delta_table(const CounterfactualResult& result, const FeatureVector& query,
                               const FeatureSchema& schema, const std::vector<std::string>& classes) {
  constexpr std::size_t kCol = 13;
  auto cell = [&](const std::string& s) {
    return s.size() >= kCol ? s + " " : std::string(kCol - s.size(), ' ') + s;
  };
  std::ostringstream os;
  os << cell("");
  for (const auto& n : schema.names) os << cell(n);
  os << cell("class") << '\n';
  os << cell("query");
  for (double v : query) os << cell(fixed(v, 4));
  os << cell(classes.at(static_cast<std::size_t>(result.query_prediction))) << '\n';
  for (std::size_t i = 0; i < result.counterfactuals.size(); ++i) {
    const Counterfactual& c = result.counterfactuals[i];
    os << cell("cf" + std::to_string(i + 1));
    for (double v : c.features) os << cell(fixed(v, 4));
    os << cell(classes.at(static_cast<std::size_t>(c.predicted))) << '\n';
  }
  if (result.status == CounterfactualStatus::not_found) {
    os << "\nno counterfactual found for " << classes.at(static_cast<std::size_t>(result.target)) << '\n';
    return os.str();
  }

  std::vector<FeatureVector> xs;
  for (const auto& c : result.counterfactuals) xs.push_back(c.features);
  const auto report = counterfactual_delta_report(query, xs);
  std::size_t name_width = 0;
  for (const auto& n : schema.names) name_width = std::max(name_width, n.size());
  for (std::size_t i = 0; i < report.size(); ++i) {
    os << "\ncf" << i + 1 << " -> " << classes.at(static_cast<std::size_t>(result.counterfactuals[i].predicted))
       << '\n';
    if (report[i].empty()) os << "  (no change)\n";
    double largest = 0.0;
    for (const DeltaRow& r : report[i]) largest = std::max(largest, std::abs(r.delta));
    for (const DeltaRow& r : report[i]) {
      constexpr int kHalf = 20;
      const int len = largest > 0 ? static_cast<int>(std::lround(std::abs(r.delta) / largest * kHalf)) : 0;
      std::string left(kHalf, ' ');
      std::string right(kHalf, ' ');
      if (r.delta < 0) {
        std::fill(left.end() - len, left.end(), '-');
      } else {
        std::fill(right.begin(), right.begin() + len, '+');
      }
      const std::string& n = schema.names[r.feature];
      char value[32];
      std::snprintf(value, sizeof value, "%+.4f", r.delta);
      os << "  " << n << std::string(name_width - n.size(), ' ') << ' ' << left << '|' << right << ' '
         << value << '\n';
    }
  }
  return os.str();
}

}  // namespace cropxai
