#pragma once

#include <array>
#include <vector>

#include "osb/mask.hpp"

namespace osb {

// Axis-aligned box in corner form, pixel coordinates.
struct Box {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  double cx() const { return 0.5 * (x1 + x2); }
  double cy() const { return 0.5 * (y1 + y2); }

  bool operator==(const Box& o) const = default;
};

inline Box box_from_xywh(double x, double y, double w, double h) {
  return Box{x, y, x + w, y + h};
}

double box_iou(const Box& a, const Box& b);

// Intersection-over-union of the detection box against a crowd region:
// the denominator is the detection's own area (COCO crowd semantics).
double box_iou_crowd(const Box& det, const Box& crowd);

// IoU of two run-length masks of equal dimensions, computed by merging the
// run lists without decoding. 0 when both masks are empty.
double mask_iou(const RleMask& a, const RleMask& b);
double mask_iou_crowd(const RleMask& det, const RleMask& crowd);

// Greedy non-maximum suppression, descending score, ties broken by lower
// index. Returns kept indices sorted by score descending.
std::vector<int> nms(const std::vector<Box>& boxes,
                     const std::vector<double>& scores, double iou_threshold);

// Anchor grid over pyramid levels 2..6. Ordering contract: level-major,
// then row-major over feature map locations, then aspect ratio, fixed so
// that externally produced weights stay aligned.
struct AnchorSet {
  std::vector<Box> boxes;
  std::vector<int> level_of;              // pyramid level per anchor, 2..6
  std::array<int, 5> level_offset{};      // first anchor index per level
  std::array<int, 5> grid_size{};         // feature map side per level
  int image_size = 0;

  int count() const { return int(boxes.size()); }
};

struct AnchorSpec {
  std::array<double, 3> ratios{0.5, 1.0, 2.0};
  std::array<double, 5> scales{32, 64, 128, 256, 512};
  std::array<int, 5> strides{4, 8, 16, 32, 64};
};

// One anchor triple per feature-map location, centered at half-stride
// offsets; (w, h) = (scale * sqrt(ratio), scale / sqrt(ratio)). image_size
// must be divisible by the largest stride.
AnchorSet generate_anchors(int image_size, const AnchorSpec& spec = {});

// Standard R-CNN center/log box coding.
struct BoxDeltas {
  double dx = 0, dy = 0, dw = 0, dh = 0;
};

BoxDeltas encode_deltas(const Box& anchor, const Box& target);
Box apply_deltas(const Box& anchor, const BoxDeltas& d);

// Intersects a box with the image rectangle; a fully outside box collapses
// to a zero-area box at the nearest edge.
Box clip_box(const Box& b, double image_w, double image_h);

enum class SizeBin { small, medium, large };

// COCO size convention: small < 32^2, medium in [32^2, 96^2), large >= 96^2.
SizeBin area_bin(double area);

}  // namespace osb
