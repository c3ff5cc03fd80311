#include <doctest.h>

#include <random>

#include "formula/error.hpp"
#include "formula/eval.hpp"
#include "oracle.hpp"
#include "test_util.hpp"

using namespace formula;
using testutil::code_of;

namespace {

io::GroundTruth gt(const std::string& id, Box box) { return {id, 100, 100, {box}}; }

}  // namespace

TEST_CASE("iou cases") {
  CHECK(eval::iou({0, 0, 10, 10}, {0, 0, 10, 10}) == 1.0);
  CHECK(eval::iou({0, 0, 10, 10}, {20, 20, 30, 30}) == 0.0);
  CHECK(std::abs(eval::iou({0, 0, 10, 10}, {5, 0, 15, 10}) - 1.0 / 3.0) < 1e-12);
  CHECK(eval::iou({0, 0, 10, 10}, {0, 0, 10, 5}) == 0.5);
  CHECK(code_of([] { eval::iou({0, 0, 0, 10}, {0, 0, 1, 1}); }) == ErrorCode::InvalidBox);
}

TEST_CASE("iou against the oracle, symmetric and translation invariant") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 50.0);
  for (int i = 0; i < 200; ++i) {
    const double ax = u(rng), ay = u(rng), bx = u(rng), by = u(rng);
    const Box a{ax, ay, ax + 1 + u(rng), ay + 1 + u(rng)};
    const Box b{bx, by, bx + 1 + u(rng), by + 1 + u(rng)};
    const double ref = oracle::iou(a.xmin, a.ymin, a.xmax, a.ymax, b.xmin, b.ymin, b.xmax, b.ymax);
    CHECK(std::abs(eval::iou(a, b) - ref) < 1e-12);
    CHECK(eval::iou(a, b) == eval::iou(b, a));
    const Box at{a.xmin + 8, a.ymin - 4, a.xmax + 8, a.ymax - 4};
    const Box bt{b.xmin + 8, b.ymin - 4, b.xmax + 8, b.ymax - 4};
    CHECK(std::abs(eval::iou(at, bt) - ref) < 1e-9);
  }
}

TEST_CASE("corloc counts strictly above one half") {
  std::map<std::string, io::GroundTruth> truth;
  truth["a"] = gt("a", {0, 0, 100, 100});
  truth["b"] = gt("b", {0, 0, 100, 100});
  truth["c"] = gt("c", {0, 0, 100, 100});
  std::map<std::string, Box> pred = {{"a", {0, 0, 100, 90}}, {"b", {0, 0, 100, 51}}, {"c", {0, 0, 100, 20}}};
  auto report = eval::corloc(pred, truth);
  CHECK(report.num_correct == 2);
  CHECK(report.corloc == doctest::Approx(2.0 / 3.0));

  truth["d"] = gt("d", {0, 0, 100, 100});
  pred["d"] = {0, 0, 100, 50};
  report = eval::corloc(pred, truth);
  CHECK(report.per_image[3].best_iou == 0.5);
  CHECK_FALSE(report.per_image[3].correct);
  CHECK(report.corloc == 0.5);
}

TEST_CASE("best box among several ground-truth boxes") {
  std::map<std::string, io::GroundTruth> truth;
  truth["a"] = {"a", 100, 100, {{50, 50, 60, 60}, {0, 0, 10, 10}}};
  const auto report = eval::corloc({{"a", {0, 0, 10, 10}}}, truth);
  CHECK(report.per_image[0].best_iou == 1.0);
}

TEST_CASE("corloc errors") {
  std::map<std::string, io::GroundTruth> truth;
  truth["a"] = gt("a", {0, 0, 10, 10});
  CHECK(code_of([&] { eval::corloc({}, truth); }) == ErrorCode::MissingPrediction);
  CHECK(code_of([&] { eval::corloc({{"a", {0, 0, 1, 1}}, {"zz", {0, 0, 1, 1}}}, truth); }) ==
        ErrorCode::UnknownImageId);
  const std::vector<io::DetectionRecord> dup = {{"a", {0, 0, 1, 1}, 0, false, {}}, {"a", {0, 0, 2, 2}, 0, false, {}}};
  CHECK(code_of([&] { eval::predictions_by_image(dup); }) == ErrorCode::DuplicatePrediction);
}

TEST_CASE("report rendering") {
  std::map<std::string, io::GroundTruth> truth;
  truth["only"] = gt("only", {0, 0, 10, 10});
  const auto report = eval::corloc({{"only", {0, 0, 10, 10}}}, truth);
  CHECK(report.to_table().find("CorLoc 1.0000 (1/1)") != std::string::npos);
  CHECK(report.to_json().find("\"corloc\": 1.0") != std::string::npos);
}
