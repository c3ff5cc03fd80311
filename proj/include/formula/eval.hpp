#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "formula/feature_io.hpp"
#include "formula/types.hpp"

namespace formula::eval {

/// Intersection over union with plain widths (xmax - xmin). Throws InvalidBox
/// for boxes without positive area.
double iou(const Box& a, const Box& b);

struct ImageResult {
  std::string image_id;
  double best_iou = 0.0;
  bool correct = false;
};

struct EvalReport {
  double corloc = 0.0;
  std::size_t num_images = 0;
  std::size_t num_correct = 0;
  std::vector<ImageResult> per_image;  // sorted by image_id

  std::string to_json() const;
  std::string to_table() const;
};

/// An image is correct iff its best IoU against any ground-truth box is
/// strictly greater than 0.5.
inline constexpr double kCorLocThreshold = 0.5;

EvalReport corloc(const std::map<std::string, Box>& predictions, const std::map<std::string, io::GroundTruth>& truth);

/// Collects one box per image; a repeated image_id is a DuplicatePrediction.
std::map<std::string, Box> predictions_by_image(std::span<const io::DetectionRecord> records);

}  // namespace formula::eval
