#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hrsar/raster.hpp"

namespace hrsar {

/// counts[i][j]: pixels with target class i predicted as j. Unlabeled targets are never counted.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int classes = 3);

  int classes() const noexcept { return classes_; }
  std::uint64_t& at(int target, int pred) { return counts_[static_cast<std::size_t>(target) * classes_ + pred]; }
  std::uint64_t at(int target, int pred) const { return counts_[static_cast<std::size_t>(target) * classes_ + pred]; }
  std::uint64_t total() const noexcept;
  std::uint64_t row_sum(int i) const;
  std::uint64_t col_sum(int j) const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  int classes_;
  std::vector<std::uint64_t> counts_;
};

ConfusionMatrix confusion(const LabelRaster& pred, const LabelRaster& target, int classes = 3);
ConfusionMatrix merge(const ConfusionMatrix& a, const ConfusionMatrix& b);

struct ClassScore {
  int cls = 0;
  bool present = false;  // at least one target pixel
  double precision = 0.0;
  double recall = 0.0;
  double iou = 0.0;
};

struct Metrics {
  double pa = 0.0;
  double ma = 0.0;
  double miou = 0.0;
  std::vector<ClassScore> per_class;
};

/// PA, MA and mIoU with union = row + column - diagonal. Classes absent from the target are
/// left out of the MA and mIoU means. Throws NumericError on an empty matrix.
Metrics metrics(const ConfusionMatrix& m);

std::string metrics_csv(const Metrics& m);
void write_metrics_csv(const Metrics& m, const std::filesystem::path& path);

}  // namespace hrsar
