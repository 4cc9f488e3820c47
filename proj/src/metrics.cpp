#include "ffcnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ffcnet/errors.hpp"

namespace ffcnet {

namespace {

std::vector<std::string> default_names(std::size_t classes) {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < classes; ++c) names.push_back("class" + std::to_string(c));
  return names;
}

}  // namespace

ConfusionMatrix::ConfusionMatrix(std::size_t classes) : ConfusionMatrix(default_names(classes)) {}

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> class_names)
    : names_(std::move(class_names)), counts_(names_.size() * names_.size(), 0) {
  if (names_.empty()) throw std::invalid_argument("confusion matrix needs at least one class");
}

void ConfusionMatrix::update(std::size_t true_label, std::size_t predicted_label) {
  if (true_label >= classes() || predicted_label >= classes()) {
    throw std::out_of_range("confusion matrix update (" + std::to_string(true_label) + ", " +
                            std::to_string(predicted_label) + ") outside " +
                            std::to_string(classes()) + " classes");
  }
  ++counts_[true_label * classes() + predicted_label];
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.classes() != classes()) throw std::invalid_argument("cannot merge confusion matrices of different sizes");
  for (std::size_t k = 0; k < counts_.size(); ++k) counts_[k] += other.counts_[k];
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::support(std::size_t truth) const {
  std::uint64_t s = 0;
  for (std::size_t p = 0; p < classes(); ++p) s += count(truth, p);
  return s;
}

MetricsSummary summarize(const ConfusionMatrix& cm, Averaging averaging) {
  const std::uint64_t total = cm.total();
  if (total == 0) throw std::invalid_argument("cannot summarize an empty confusion matrix");
  const std::size_t C = cm.classes();

  MetricsSummary s;
  s.averaging = averaging;
  std::uint64_t trace = 0;
  for (std::size_t c = 0; c < C; ++c) trace += cm.count(c, c);
  s.accuracy = static_cast<double>(trace) / static_cast<double>(total);

  double weight_sum = 0;
  for (std::size_t c = 0; c < C; ++c) {
    ClassMetrics m;
    const std::uint64_t tp = cm.count(c, c);
    std::uint64_t predicted = 0;
    for (std::size_t t = 0; t < C; ++t) predicted += cm.count(t, c);
    m.support = cm.support(c);
    if (m.support == 0) {
      m.defined = false;
      s.warnings.push_back("class '" + cm.class_names()[c] +
                           "' has no samples; excluded from averaged metrics");
      s.per_class.push_back(m);
      continue;
    }
    m.recall = static_cast<double>(tp) / static_cast<double>(m.support);
    m.precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    m.f1 = (m.precision + m.recall) > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    const double w = averaging == Averaging::kWeighted ? static_cast<double>(m.support) : 1.0;
    s.precision += w * m.precision;
    // support * (tp / support) is tp; summing the integer keeps the weighted
    // recall exact.
    s.recall += averaging == Averaging::kWeighted ? static_cast<double>(tp) : m.recall;
    s.f1 += w * m.f1;
    weight_sum += w;
    s.per_class.push_back(m);
  }
  s.precision /= weight_sum;
  s.recall /= weight_sum;
  s.f1 /= weight_sum;
  return s;
}

std::vector<std::vector<double>> row_normalize(const ConfusionMatrix& cm) {
  const std::size_t C = cm.classes();
  std::vector<std::vector<double>> out(C, std::vector<double>(C, 0.0));
  for (std::size_t t = 0; t < C; ++t) {
    const std::uint64_t row = cm.support(t);
    if (row == 0) continue;
    for (std::size_t p = 0; p < C; ++p) {
      const double pct = 100.0 * static_cast<double>(cm.count(t, p)) / static_cast<double>(row);
      out[t][p] = std::round(pct * 100.0) / 100.0;
    }
  }
  return out;
}

namespace {

nlohmann::json summary_json(const MetricsSummary& s, const ConfusionMatrix& cm) {
  nlohmann::json j;
  j["averaging"] = s.averaging == Averaging::kWeighted ? "weighted" : "macro";
  j["accuracy"] = 100.0 * s.accuracy;
  j["precision"] = 100.0 * s.precision;
  j["recall"] = 100.0 * s.recall;
  j["f1"] = 100.0 * s.f1;
  nlohmann::json per_class = nlohmann::json::array();
  for (std::size_t c = 0; c < s.per_class.size(); ++c) {
    const ClassMetrics& m = s.per_class[c];
    nlohmann::json row{{"class", cm.class_names()[c]}, {"support", m.support}};
    if (m.defined) {
      row["precision"] = 100.0 * m.precision;
      row["recall"] = 100.0 * m.recall;
      row["f1"] = 100.0 * m.f1;
    }
    per_class.push_back(row);
  }
  j["per_class"] = per_class;
  return j;
}

}  // namespace

std::string summary_to_json(const MetricsSummary& weighted, const MetricsSummary& macro,
                            const ConfusionMatrix& cm) {
  nlohmann::json j;
  j["samples"] = cm.total();
  j["weighted"] = summary_json(weighted, cm);
  j["macro"] = summary_json(macro, cm);
  j["warnings"] = weighted.warnings;
  nlohmann::json counts = nlohmann::json::array();
  for (std::size_t t = 0; t < cm.classes(); ++t) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t p = 0; p < cm.classes(); ++p) row.push_back(cm.count(t, p));
    counts.push_back(row);
  }
  j["confusion"] = {{"classes", cm.class_names()}, {"counts", counts}, {"percent", row_normalize(cm)}};
  return j.dump(2) + "\n";
}

void write_confusion_csv(const std::filesystem::path& counts_path, const std::filesystem::path& percent_path,
                         const ConfusionMatrix& cm) {
  const std::size_t C = cm.classes();
  auto header = [&](std::ostream& os) {
    os << "true\\predicted";
    for (const auto& n : cm.class_names()) os << ',' << n;
    os << '\n';
  };
  std::ofstream counts(counts_path);
  std::ofstream pct(percent_path);
  if (!counts || !pct) throw FormatError("cannot write confusion matrix CSV files");
  header(counts);
  header(pct);
  const auto percent = row_normalize(cm);
  pct << std::fixed << std::setprecision(2);
  for (std::size_t t = 0; t < C; ++t) {
    counts << cm.class_names()[t];
    pct << cm.class_names()[t];
    for (std::size_t p = 0; p < C; ++p) {
      counts << ',' << cm.count(t, p);
      pct << ',' << percent[t][p];
    }
    counts << '\n';
    pct << '\n';
  }
}

void write_confusion_svg(const std::filesystem::path& path, const ConfusionMatrix& cm) {
  const std::size_t C = cm.classes();
  const auto percent = row_normalize(cm);
  const int cell = 80, margin = 120;
  const int size = margin + static_cast<int>(C) * cell + 20;

  std::ofstream os(path);
  if (!os) throw FormatError("cannot write " + path.string());
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << margin + static_cast<int>(C) * cell / 2 << "\" y=\"20\" text-anchor=\"middle\">"
     << "Predicted class (%)</text>\n";
  os << "<text x=\"16\" y=\"" << margin + static_cast<int>(C) * cell / 2
     << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << margin + static_cast<int>(C) * cell / 2
     << ")\">True class</text>\n";
  os << std::fixed << std::setprecision(2);
  for (std::size_t t = 0; t < C; ++t) {
    const int y = margin + static_cast<int>(t) * cell;
    os << "<text x=\"" << margin - 6 << "\" y=\"" << y + cell / 2 << "\" text-anchor=\"end\">"
       << cm.class_names()[t] << "</text>\n";
    for (std::size_t p = 0; p < C; ++p) {
      const int x = margin + static_cast<int>(p) * cell;
      if (t == 0) {
        os << "<text x=\"" << x + cell / 2 << "\" y=\"" << margin - 8 << "\" text-anchor=\"middle\">"
           << cm.class_names()[p] << "</text>\n";
      }
      const double v = percent[t][p];
      // white -> dark blue ramp
      const int shade = static_cast<int>(std::lround(255.0 - 2.2 * v));
      os << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell
         << "\" fill=\"rgb(" << std::max(shade, 0) << ',' << std::clamp(shade + 20, 0, 255) << ",255)\" stroke=\"#888\"/>\n";
      os << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 4 << "\" text-anchor=\"middle\" fill=\""
         << (v > 55.0 ? "white" : "black") << "\">" << v << "</text>\n";
    }
  }
  os << "</svg>\n";
}

}  // namespace ffcnet
