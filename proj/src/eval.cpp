#include "formula/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "formula/error.hpp"

namespace formula::eval {

double iou(const Box& a, const Box& b) {
  if (!(a.width() > 0.0) || !(a.height() > 0.0) || !(b.width() > 0.0) || !(b.height() > 0.0)) {
    throw Error(ErrorCode::InvalidBox, "IoU needs boxes with positive area");
  }
  const double iw = std::max(0.0, std::min(a.xmax, b.xmax) - std::max(a.xmin, b.xmin));
  const double ih = std::max(0.0, std::min(a.ymax, b.ymax) - std::max(a.ymin, b.ymin));
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

EvalReport corloc(const std::map<std::string, Box>& predictions, const std::map<std::string, io::GroundTruth>& truth) {
  for (const auto& [id, _] : predictions) {
    if (!truth.contains(id)) throw Error(ErrorCode::UnknownImageId, "prediction for unknown image " + id);
  }
  if (truth.empty()) throw Error(ErrorCode::MissingPrediction, "no ground-truth images to evaluate");

  EvalReport report;
  for (const auto& [id, gt] : truth) {
    const auto it = predictions.find(id);
    if (it == predictions.end()) throw Error(ErrorCode::MissingPrediction, "no prediction for image " + id);
    ImageResult row{id, 0.0, false};
    for (const auto& box : gt.boxes) row.best_iou = std::max(row.best_iou, iou(it->second, box));
    row.correct = row.best_iou > kCorLocThreshold;
    report.num_correct += row.correct ? 1 : 0;
    report.per_image.push_back(std::move(row));
  }
  report.num_images = report.per_image.size();
  report.corloc = static_cast<double>(report.num_correct) / static_cast<double>(report.num_images);
  return report;
}

std::map<std::string, Box> predictions_by_image(std::span<const io::DetectionRecord> records) {
  std::map<std::string, Box> out;
  for (const auto& r : records) {
    if (!out.emplace(r.image_id, r.box).second) {
      throw Error(ErrorCode::DuplicatePrediction, "more than one prediction for image " + r.image_id);
    }
  }
  return out;
}

std::string EvalReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : per_image) rows.push_back({{"image_id", r.image_id}, {"best_iou", r.best_iou}, {"correct", r.correct}});
  const nlohmann::json j = {
      {"corloc", corloc}, {"num_images", num_images}, {"num_correct", num_correct}, {"per_image", rows}};
  return j.dump(2);
}

std::string EvalReport::to_table() const {
  std::size_t id_width = 8;
  for (const auto& r : per_image) id_width = std::max(id_width, r.image_id.size());
  std::ostringstream out;
  char buf[64];
  out << std::string(id_width - 8, ' ') << "image_id  best_iou  correct\n";
  for (const auto& r : per_image) {
    std::snprintf(buf, sizeof buf, "  %8.4f  %7s", r.best_iou, r.correct ? "yes" : "no");
    out << std::string(id_width - r.image_id.size(), ' ') << r.image_id << buf << '\n';
  }
  std::snprintf(buf, sizeof buf, "%.4f", corloc);
  out << "CorLoc " << buf << " (" << num_correct << "/" << num_images << ")\n";
  return out.str();
}

}  // namespace formula::eval
