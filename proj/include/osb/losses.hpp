#pragma once

#include <cstdint>
#include <vector>

#include "osb/geometry.hpp"
#include "osb/tensor.hpp"

namespace osb {

inline constexpr double kRpnClsWeight = 2.0;
inline constexpr double kRpnBoxWeight = 0.1;
inline constexpr double kRoiClsWeight = 2.0;
inline constexpr double kRoiBoxWeight = 0.5;
inline constexpr double kMaskWeight = 1.0;

struct LossBreakdown {
    double rpn_cls = 0, rpn_box = 0, roi_cls = 0, roi_box = 0, mask = 0;
    double total = 0;
};

enum class AnchorLabel : std::uint8_t { positive, negative, ignore };

struct RpnTargets {
    std::vector<AnchorLabel> labels;
    std::vector<int> matched_gt;  // gt index for positives, -1 otherwise
};

// Anchor labeling with the usual two rules: IoU >= pos_iou makes an anchor
// positive, and every gt recruits its highest-IoU anchors (all ties) even
// below the threshold. Anchors with max IoU < neg_iou are negative, the rest
// ignored. The batch is then sampled down to `sample` anchors with at most
// pos_fraction positives; surplus labels flip to ignore, chosen by the seeded
// stream so the result is order-independent. A positive anchor's matched_gt
// is the gt of highest IoU (lowest index on ties).
RpnTargets assign_rpn_targets(const std::vector<Box>& anchors,
                              const std::vector<Box>& gt_boxes,
                              double pos_iou = 0.7, double neg_iou = 0.3,
                              int sample = 256, double pos_fraction = 0.5,
                              std::uint64_t seed = 0);

// Binary cross-entropy of one probability against a 0/1 target, with p
// clamped to [1e-7, 1 - 1e-7].
double bce(double p, int target);

// Mean bce over aligned vectors. Empty input gives 0.
double bce_mean(const std::vector<double>& p, const std::vector<int>& targets);

// Elementwise Huber with delta = 1, averaged over all 4*N delta components.
// Empty input (no positives) gives 0.
double smooth_l1(const std::vector<BoxDeltas>& pred,
                 const std::vector<BoxDeltas>& target);
double smooth_l1(const BoxDeltas& pred, const BoxDeltas& target);

// Mean bce over a predicted probability map against a binary mask of the
// same shape (rank-2 tensors).
double mask_bce(const Tensor& pred, const Tensor& target);

// Weighted sum 2*rpn_cls + 0.1*rpn_box + 2*roi_cls + 0.5*roi_box + 1*mask.
// Components must be non-negative.
LossBreakdown total_loss(double rpn_cls, double rpn_box, double roi_cls,
                         double roi_box, double mask);

}  // namespace osb
