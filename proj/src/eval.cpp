#include "hrsar/eval.hpp"

#include <fstream>
#include <sstream>

namespace hrsar {

ConfusionMatrix::ConfusionMatrix(int classes) : classes_(classes) {
  if (classes < 1 || classes > 255) throw ConfigError("confusion matrix needs between 1 and 255 classes");
  counts_.assign(static_cast<std::size_t>(classes) * classes, 0);
}

std::uint64_t ConfusionMatrix::total() const noexcept {
  std::uint64_t n = 0;
  for (auto v : counts_) n += v;
  return n;
}

std::uint64_t ConfusionMatrix::row_sum(int i) const {
  std::uint64_t n = 0;
  for (int j = 0; j < classes_; ++j) n += at(i, j);
  return n;
}

std::uint64_t ConfusionMatrix::col_sum(int j) const {
  std::uint64_t n = 0;
  for (int i = 0; i < classes_; ++i) n += at(i, j);
  return n;
}

ConfusionMatrix confusion(const LabelRaster& pred, const LabelRaster& target, int classes) {
  if (!pred.same_dims(target))
    throw ShapeError("confusion: prediction is " + std::to_string(pred.width) + "x" + std::to_string(pred.height) +
                     ", target is " + std::to_string(target.width) + "x" + std::to_string(target.height));
  ConfusionMatrix m(classes);
  for (std::size_t i = 0; i < target.data.size(); ++i) {
    const int t = target.data[i];
    if (t == kUnlabeled) continue;
    const int p = pred.data[i];
    if (p >= classes) throw ShapeError("confusion: predicted code " + std::to_string(p) + " at pixel " + std::to_string(i));
    if (t >= classes) throw ShapeError("confusion: target code " + std::to_string(t) + " at pixel " + std::to_string(i));
    ++m.at(t, p);
  }
  return m;
}

ConfusionMatrix merge(const ConfusionMatrix& a, const ConfusionMatrix& b) {
  if (a.classes() != b.classes()) throw ShapeError("merge: matrices have different class counts");
  ConfusionMatrix m(a.classes());
  for (int i = 0; i < a.classes(); ++i)
    for (int j = 0; j < a.classes(); ++j) m.at(i, j) = a.at(i, j) + b.at(i, j);
  return m;
}

Metrics metrics(const ConfusionMatrix& m) {
  const auto total = m.total();
  if (total == 0) throw NumericError("metrics: confusion matrix is empty");
  Metrics r;
  std::uint64_t diag = 0;
  int present = 0;
  for (int i = 0; i < m.classes(); ++i) {
    ClassScore s;
    s.cls = i;
    const auto nii = m.at(i, i);
    const auto row = m.row_sum(i);
    const auto col = m.col_sum(i);
    diag += nii;
    s.present = row > 0;
    s.precision = col > 0 ? static_cast<double>(nii) / static_cast<double>(col) : 0.0;
    if (s.present) {
      s.recall = static_cast<double>(nii) / static_cast<double>(row);
      s.iou = static_cast<double>(nii) / static_cast<double>(row + col - nii);
      r.ma += s.recall;
      r.miou += s.iou;
      ++present;
    }
    r.per_class.push_back(s);
  }
  r.pa = static_cast<double>(diag) / static_cast<double>(total);
  r.ma /= present;
  r.miou /= present;
  return r;
}

std::string metrics_csv(const Metrics& m) {
  static const char* const kNames[] = {"other", "building", "road"};
  std::ostringstream os;
  os.precision(6);
  os << std::fixed;
  os << "class,precision,recall,IoU\n";
  for (const auto& s : m.per_class) {
    const std::string name = s.cls < 3 ? kNames[s.cls] : "class" + std::to_string(s.cls);
    os << name << ',' << s.precision << ',';
    if (s.present)
      os << s.recall << ',' << s.iou << '\n';
    else
      os << "NA,NA\n";
  }
  // Footer rows carry the summary value in the first numeric column.
  os << "PA," << m.pa << ",,\n";
  os << "MA," << m.ma << ",,\n";
  os << "mIoU," << m.miou << ",,\n";
  return os.str();
}

void write_metrics_csv(const Metrics& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << metrics_csv(m);
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace hrsar
