#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ffcnet {

enum class Averaging { kWeighted, kMacro };

/// C x C counts, rows = true class, columns = predicted class.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes);
  explicit ConfusionMatrix(std::vector<std::string> class_names);

  void update(std::size_t true_label, std::size_t predicted_label);
  /// Count-wise addition of an evaluation shard.
  void merge(const ConfusionMatrix& other);

  std::size_t classes() const { return names_.size(); }
  std::uint64_t count(std::size_t truth, std::size_t predicted) const {
    return counts_[truth * classes() + predicted];
  }
  std::uint64_t total() const;
  std::uint64_t support(std::size_t truth) const;
  const std::vector<std::string>& class_names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::vector<std::uint64_t> counts_;
};

struct ClassMetrics {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::uint64_t support = 0;
  bool defined = true;  // false for classes with zero support
};

/// Fractions in [0, 1]. Aggregates average the per-class metrics over
/// classes with non-zero support, weighted by support or uniformly.
struct MetricsSummary {
  double accuracy = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  Averaging averaging = Averaging::kWeighted;
  std::vector<ClassMetrics> per_class;
  std::vector<std::string> warnings;
};

/// Throws std::invalid_argument on an empty matrix.
MetricsSummary summarize(const ConfusionMatrix& cm, Averaging averaging = Averaging::kWeighted);

/// Each row as percentages of its sum, rounded to two decimals. Rows with no
/// samples are all zero.
std::vector<std::vector<double>> row_normalize(const ConfusionMatrix& cm);

std::string summary_to_json(const MetricsSummary& weighted, const MetricsSummary& macro,
                            const ConfusionMatrix& cm);
void write_confusion_csv(const std::filesystem::path& counts_path,
                         const std::filesystem::path& percent_path, const ConfusionMatrix& cm);
/// Heatmap of the row-normalised percentages as a standalone SVG.
void write_confusion_svg(const std::filesystem::path& path, const ConfusionMatrix& cm);

}  // namespace ffcnet
