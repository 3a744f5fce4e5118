#include "osb/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "osb/errors.hpp"

namespace osb {

namespace {

double intersection_area(const Box& a, const Box& b) {
  const double w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  if (w <= 0) return 0;
  const double h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (h <= 0) return 0;
  return w * h;
}

// Walks two column-major run lists in lockstep and accumulates the
// intersection and union pixel counts.
void rle_overlap(const RleMask& a, const RleMask& b, std::int64_t& inter,
                 std::int64_t& uni) {
  inter = 0;
  uni = 0;
  size_t ia = 0, ib = 0;
  std::uint64_t ra = ia < a.counts.size() ? a.counts[ia] : 0;
  std::uint64_t rb = ib < b.counts.size() ? b.counts[ib] : 0;
  bool va = false, vb = false;
  const std::uint64_t total = std::uint64_t(a.height) * a.width;
  std::uint64_t consumed = 0;
  while (consumed < total) {
    while (ra == 0 && ia + 1 < a.counts.size()) {
      ++ia;
      ra = a.counts[ia];
      va = (ia % 2) == 1;
    }
    while (rb == 0 && ib + 1 < b.counts.size()) {
      ++ib;
      rb = b.counts[ib];
      vb = (ib % 2) == 1;
    }
    const std::uint64_t step = std::min(ra, rb);
    if (step == 0) throw ParseError("mask_iou: run lengths do not cover the mask");
    if (va && vb) inter += step;
    if (va || vb) uni += step;
    ra -= step;
    rb -= step;
    consumed += step;
  }
}

}  // namespace

double box_iou(const Box& a, const Box& b) {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

double box_iou_crowd(const Box& det, const Box& crowd) {
  const double inter = intersection_area(det, crowd);
  const double denom = det.area();
  return denom > 0 ? inter / denom : 0.0;
}

double mask_iou(const RleMask& a, const RleMask& b) {
  if (a.height != b.height || a.width != b.width) {
    throw ParseError("mask_iou: dimension mismatch");
  }
  std::int64_t inter = 0, uni = 0;
  rle_overlap(a, b, inter, uni);
  return uni > 0 ? double(inter) / double(uni) : 0.0;
}

double mask_iou_crowd(const RleMask& det, const RleMask& crowd) {
  if (det.height != crowd.height || det.width != crowd.width) {
    throw ParseError("mask_iou: dimension mismatch");
  }
  std::int64_t inter = 0, uni = 0;
  rle_overlap(det, crowd, inter, uni);
  const std::int64_t denom = rle_area(det);
  return denom > 0 ? double(inter) / double(denom) : 0.0;
}

std::vector<int> nms(const std::vector<Box>& boxes,
                     const std::vector<double>& scores, double iou_threshold) {
  if (boxes.size() != scores.size()) {
    throw ParseError("nms: boxes and scores differ in length");
  }
  std::vector<int> order(boxes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });
  std::vector<char> suppressed(boxes.size(), 0);
  std::vector<int> kept;
  for (size_t i = 0; i < order.size(); ++i) {
    const int a = order[i];
    if (suppressed[a]) continue;
    kept.push_back(a);
    for (size_t j = i + 1; j < order.size(); ++j) {
      const int b = order[j];
      if (suppressed[b]) continue;
      if (box_iou(boxes[a], boxes[b]) > iou_threshold) suppressed[b] = 1;
    }
  }
  return kept;
}

AnchorSet generate_anchors(int image_size, const AnchorSpec& spec) {
  const int max_stride = *std::max_element(spec.strides.begin(), spec.strides.end());
  if (image_size <= 0 || image_size % max_stride != 0) {
    throw ParseError("generate_anchors: image size " + std::to_string(image_size) +
                     " not divisible by stride " + std::to_string(max_stride));
  }
  AnchorSet out;
  out.image_size = image_size;
  for (int li = 0; li < 5; ++li) {
    const int stride = spec.strides[li];
    const double scale = spec.scales[li];
    const int grid = image_size / stride;
    out.level_offset[li] = out.count();
    out.grid_size[li] = grid;
    for (int r = 0; r < grid; ++r) {
      for (int c = 0; c < grid; ++c) {
        const double cx = (c + 0.5) * stride;
        const double cy = (r + 0.5) * stride;
        for (double ratio : spec.ratios) {
          const double w = scale * std::sqrt(ratio);
          const double h = scale / std::sqrt(ratio);
          out.boxes.push_back(Box{cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2});
          out.level_of.push_back(li + 2);
        }
      }
    }
  }
  return out;
}

BoxDeltas encode_deltas(const Box& anchor, const Box& target) {
  const double wa = anchor.width(), ha = anchor.height();
  if (wa <= 0 || ha <= 0) throw ParseError("encode_deltas: zero-size anchor");
  BoxDeltas d;
  d.dx = (target.cx() - anchor.cx()) / wa;
  d.dy = (target.cy() - anchor.cy()) / ha;
  d.dw = std::log(target.width() / wa);
  d.dh = std::log(target.height() / ha);
  return d;
}

Box apply_deltas(const Box& anchor, const BoxDeltas& d) {
  const double wa = anchor.width(), ha = anchor.height();
  if (wa <= 0 || ha <= 0) throw ParseError("apply_deltas: zero-size anchor");
  const double cx = anchor.cx() + d.dx * wa;
  const double cy = anchor.cy() + d.dy * ha;
  const double w = wa * std::exp(d.dw);
  const double h = ha * std::exp(d.dh);
  return Box{cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
}

Box clip_box(const Box& b, double image_w, double image_h) {
  Box out;
  out.x1 = std::clamp(b.x1, 0.0, image_w);
  out.y1 = std::clamp(b.y1, 0.0, image_h);
  out.x2 = std::clamp(b.x2, out.x1, image_w);
  out.y2 = std::clamp(b.y2, out.y1, image_h);
  return out;
}

SizeBin area_bin(double area) {
  if (area < 32.0 * 32.0) return SizeBin::small;
  if (area < 96.0 * 96.0) return SizeBin::medium;
  return SizeBin::large;
}

}  // namespace osb
