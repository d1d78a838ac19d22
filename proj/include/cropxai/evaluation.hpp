#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cropxai/data.hpp"
#include "cropxai/model.hpp"

namespace cropxai {

// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t n_classes = 0)
      : n_(n_classes), counts_(n_classes * n_classes, 0) {}

  std::size_t size() const { return n_; }
  std::size_t at(std::size_t truth, std::size_t predicted) const { return counts_[truth * n_ + predicted]; }
  void add(std::size_t truth, std::size_t predicted, std::size_t count = 1);
  std::size_t total() const;
  std::size_t trace() const;
  std::size_t row_sum(std::size_t truth) const;
  std::size_t column_sum(std::size_t predicted) const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t n_;
  std::vector<std::size_t> counts_;
};

struct ClassMetrics {
  double precision = 0.0;  // percent; 0 when nothing was predicted as the class
  double recall = 0.0;     // percent; 0 when the class never occurs
  double f1 = 0.0;
  std::size_t support = 0;
};

struct ClassificationReport {
  std::vector<std::string> classes;
  std::vector<ClassMetrics> per_class;
  // Unweighted means over every class, including absent ones.
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  ConfusionMatrix confusion;
};

ClassificationReport report_from_confusion(const ConfusionMatrix& confusion,
                                           std::vector<std::string> classes);

// Throws InputError on an empty test set or an unlabeled sample.
ClassificationReport evaluate(const Classifier& model, const Dataset& test);

nlohmann::json report_to_json(const ClassificationReport& report);

// Per-class precision/recall/F1/support followed by the macro rows.
std::string render_report(const ClassificationReport& report);

// One column per model, rows Precision/Recall/F1-Score/Accuracy.
std::string render_comparison(const std::vector<std::pair<std::string, ClassificationReport>>& reports);

}  // namespace cropxai
