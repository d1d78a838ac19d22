#include "cropxai/evaluation.hpp"

#include <cstdio>
#include <sstream>

#include "cropxai/error.hpp"

namespace cropxai {

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted, std::size_t count) {
  if (truth >= n_ || predicted >= n_) throw InputError("confusion matrix index out of range");
  counts_[truth * n_ + predicted] += count;
}

std::size_t ConfusionMatrix::total() const {
  std::size_t s = 0;
  for (std::size_t c : counts_) s += c;
  return s;
}

std::size_t ConfusionMatrix::trace() const {
  std::size_t s = 0;
  for (std::size_t i = 0; i < n_; ++i) s += at(i, i);
  return s;
}

std::size_t ConfusionMatrix::row_sum(std::size_t truth) const {
  std::size_t s = 0;
  for (std::size_t j = 0; j < n_; ++j) s += at(truth, j);
  return s;
}

std::size_t ConfusionMatrix::column_sum(std::size_t predicted) const {
  std::size_t s = 0;
  for (std::size_t i = 0; i < n_; ++i) s += at(i, predicted);
  return s;
}

ClassificationReport report_from_confusion(const ConfusionMatrix& confusion,
                                           std::vector<std::string> classes) {
  const std::size_t n = confusion.size();
  if (classes.size() != n) throw InputError("class list does not match the confusion matrix");
  if (n == 0) throw InputError("confusion matrix is empty");
  ClassificationReport r;
  r.classes = std::move(classes);
  r.confusion = confusion;
  r.per_class.resize(n);
  for (std::size_t c = 0; c < n; ++c) {
    const auto tp = static_cast<double>(confusion.at(c, c));
    const auto predicted = static_cast<double>(confusion.column_sum(c));
    const auto actual = static_cast<double>(confusion.row_sum(c));
    ClassMetrics& m = r.per_class[c];
    m.support = confusion.row_sum(c);
    m.precision = predicted > 0 ? 100.0 * tp / predicted : 0.0;
    m.recall = actual > 0 ? 100.0 * tp / actual : 0.0;
    m.f1 = m.precision + m.recall > 0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    r.precision += m.precision;
    r.recall += m.recall;
    r.f1 += m.f1;
  }
  r.precision /= static_cast<double>(n);
  r.recall /= static_cast<double>(n);
  r.f1 /= static_cast<double>(n);
  const std::size_t total = confusion.total();
  r.accuracy = total > 0 ? 100.0 * static_cast<double>(confusion.trace()) / static_cast<double>(total) : 0.0;
  return r;
}

ClassificationReport evaluate(const Classifier& model, const Dataset& test) {
  if (test.empty()) throw InputError("test set is empty");
  ConfusionMatrix cm(test.num_classes());
  for (std::size_t i = 0; i < test.size(); ++i) {
    const Sample& s = test.samples[i];
    if (!s.label) throw InputError("test sample " + std::to_string(i) + " has no label");
    cm.add(static_cast<std::size_t>(*s.label), static_cast<std::size_t>(model.predict(s.features)));
  }
  return report_from_confusion(cm, test.classes);
}

nlohmann::json report_to_json(const ClassificationReport& report) {
  nlohmann::json per_class = nlohmann::json::array();
  for (std::size_t c = 0; c < report.classes.size(); ++c) {
    const ClassMetrics& m = report.per_class[c];
    per_class.push_back({{"class", report.classes[c]},
                         {"precision", m.precision},
                         {"recall", m.recall},
                         {"f1", m.f1},
                         {"support", m.support}});
  }
  nlohmann::json matrix = nlohmann::json::array();
  for (std::size_t i = 0; i < report.confusion.size(); ++i) {
    std::vector<std::size_t> row;
    for (std::size_t j = 0; j < report.confusion.size(); ++j) row.push_back(report.confusion.at(i, j));
    matrix.push_back(row);
  }
  return {{"precision", report.precision}, {"recall", report.recall},
          {"f1", report.f1},               {"accuracy", report.accuracy},
          {"per_class", per_class},        {"confusion_matrix", matrix}};
}

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string pad_left(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string pad_right(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

std::string render_report(const ClassificationReport& report) {
  std::size_t name_width = 9;
  for (const auto& c : report.classes) name_width = std::max(name_width, c.size());
  std::ostringstream os;
  os << pad_right("class", name_width) << pad_left("precision", 11) << pad_left("recall", 10)
     << pad_left("f1", 10) << pad_left("support", 9) << '\n';
  for (std::size_t c = 0; c < report.classes.size(); ++c) {
    const ClassMetrics& m = report.per_class[c];
    os << pad_right(report.classes[c], name_width) << pad_left(fixed(m.precision, 2), 11)
       << pad_left(fixed(m.recall, 2), 10) << pad_left(fixed(m.f1, 2), 10)
       << pad_left(std::to_string(m.support), 9) << '\n';
  }
  os << '\n'
     << pad_right("macro avg", name_width) << pad_left(fixed(report.precision, 4), 11)
     << pad_left(fixed(report.recall, 4), 10) << pad_left(fixed(report.f1, 4), 10)
     << pad_left(std::to_string(report.confusion.total()), 9) << '\n'
     << pad_right("accuracy", name_width) << pad_left(fixed(report.accuracy, 4), 31) << '\n';
  return os.str();
}

std::string render_comparison(const std::vector<std::pair<std::string, ClassificationReport>>& reports) {
  constexpr std::size_t kLabel = 10;
  constexpr std::size_t kCol = 10;
  std::ostringstream os;
  os << pad_right("", kLabel);
  for (const auto& [name, _] : reports) os << pad_left(name, kCol);
  os << '\n';
  auto row = [&](const char* label, double ClassificationReport::*field) {
    os << pad_right(label, kLabel);
    for (const auto& [_, r] : reports) os << pad_left(fixed(r.*field, 4), kCol);
    os << '\n';
  };
  row("Precision", &ClassificationReport::precision);
  row("Recall", &ClassificationReport::recall);
  row("F1-Score", &ClassificationReport::f1);
  row("Accuracy", &ClassificationReport::accuracy);
  return os.str();
}

}  // namespace cropxai
