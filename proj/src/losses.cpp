#include "osb/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "osb/rng.hpp"

namespace osb {

namespace {

constexpr double kProbClamp = 1e-7;

// Flips all but `keep` of the listed labels to ignore, selection drawn from
// the stream via a partial Fisher-Yates shuffle.
void subsample(std::vector<int>& candidates, std::size_t keep, Rng& rng,
               std::vector<AnchorLabel>& labels) {
    if (candidates.size() <= keep) return;
    for (std::size_t i = 0; i < keep; ++i) {
        const std::size_t j =
            i + static_cast<std::size_t>(rng.below(candidates.size() - i));
        std::swap(candidates[i], candidates[j]);
    }
    for (std::size_t i = keep; i < candidates.size(); ++i)
        labels[static_cast<std::size_t>(candidates[i])] = AnchorLabel::ignore;
}

}  // namespace

RpnTargets assign_rpn_targets(const std::vector<Box>& anchors,
                              const std::vector<Box>& gt_boxes, double pos_iou,
                              double neg_iou, int sample, double pos_fraction,
                              std::uint64_t seed) {
    const std::size_t n = anchors.size();
    RpnTargets out;
    out.labels.assign(n, AnchorLabel::ignore);
    out.matched_gt.assign(n, -1);

    std::vector<double> best_iou(n, 0.0);
    if (!gt_boxes.empty()) {
        std::vector<double> gt_best(gt_boxes.size(), 0.0);
        for (std::size_t a = 0; a < n; ++a) {
            for (std::size_t g = 0; g < gt_boxes.size(); ++g) {
                const double iou = box_iou(anchors[a], gt_boxes[g]);
                if (iou > best_iou[a]) {
                    best_iou[a] = iou;
                    out.matched_gt[a] = static_cast<int>(g);
                }
                gt_best[g] = std::max(gt_best[g], iou);
            }
        }
        for (std::size_t a = 0; a < n; ++a) {
            bool positive = best_iou[a] >= pos_iou;
            for (std::size_t g = 0; g < gt_boxes.size() && !positive; ++g)
                if (gt_best[g] > 0.0 && box_iou(anchors[a], gt_boxes[g]) == gt_best[g])
                    positive = true;
            if (positive)
                out.labels[a] = AnchorLabel::positive;
            else if (best_iou[a] < neg_iou)
                out.labels[a] = AnchorLabel::negative;
        }
    } else {
        std::fill(out.labels.begin(), out.labels.end(), AnchorLabel::negative);
    }
    for (std::size_t a = 0; a < n; ++a)
        if (out.labels[a] != AnchorLabel::positive) out.matched_gt[a] = -1;

    Rng rng = make_rng(seed, RngDomain::rpn_target_sampling, {});
    std::vector<int> pos, neg;
    for (std::size_t a = 0; a < n; ++a) {
        if (out.labels[a] == AnchorLabel::positive) pos.push_back(static_cast<int>(a));
        if (out.labels[a] == AnchorLabel::negative) neg.push_back(static_cast<int>(a));
    }
    const std::size_t max_pos =
        static_cast<std::size_t>(std::floor(sample * pos_fraction));
    subsample(pos, max_pos, rng, out.labels);
    const std::size_t kept_pos = std::min(pos.size(), max_pos);
    subsample(neg, static_cast<std::size_t>(sample) - kept_pos, rng, out.labels);
    for (std::size_t a = 0; a < n; ++a)
        if (out.labels[a] != AnchorLabel::positive) out.matched_gt[a] = -1;
    return out;
}

double bce(double p, int target) {
    if (target != 0 && target != 1)
        throw std::invalid_argument("bce: target must be 0 or 1");
    p = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
    return target ? -std::log(p) : -std::log(1.0 - p);
}

double bce_mean(const std::vector<double>& p, const std::vector<int>& targets) {
    if (p.size() != targets.size())
        throw std::invalid_argument("bce_mean: length mismatch");
    if (p.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) acc += bce(p[i], targets[i]);
    return acc / static_cast<double>(p.size());
}

namespace {

double huber(double d) {
    const double a = std::abs(d);
    return a < 1.0 ? 0.5 * d * d : a - 0.5;
}

}  // namespace

double smooth_l1(const std::vector<BoxDeltas>& pred,
                 const std::vector<BoxDeltas>& target) {
    if (pred.size() != target.size())
        throw std::invalid_argument("smooth_l1: length mismatch");
    if (pred.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        acc += huber(pred[i].dx - target[i].dx);
        acc += huber(pred[i].dy - target[i].dy);
        acc += huber(pred[i].dw - target[i].dw);
        acc += huber(pred[i].dh - target[i].dh);
    }
    return acc / (4.0 * static_cast<double>(pred.size()));
}

double smooth_l1(const BoxDeltas& pred, const BoxDeltas& target) {
    return smooth_l1(std::vector<BoxDeltas>{pred}, std::vector<BoxDeltas>{target});
}

double mask_bce(const Tensor& pred, const Tensor& target) {
    if (pred.rank() != 2 || target.rank() != 2 || !pred.same_shape(target))
        throw std::invalid_argument("mask_bce: shapes differ: " + shape_string(pred) +
                                    " vs " + shape_string(target));
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const float t = target.data[i];
        if (t != 0.0f && t != 1.0f)
            throw std::invalid_argument("mask_bce: target mask must be binary");
        acc += bce(pred.data[i], t == 1.0f ? 1 : 0);
    }
    return acc / static_cast<double>(pred.data.size());
}

LossBreakdown total_loss(double rpn_cls, double rpn_box, double roi_cls,
                         double roi_box, double mask) {
    for (double v : {rpn_cls, rpn_box, roi_cls, roi_box, mask})
        if (v < 0.0 || !std::isfinite(v))
            throw std::invalid_argument("total_loss: components must be non-negative");
    LossBreakdown b;
    b.rpn_cls = rpn_cls;
    b.rpn_box = rpn_box;
    b.roi_cls = roi_cls;
    b.roi_box = roi_box;
    b.mask = mask;
    b.total = kRpnClsWeight * rpn_cls + kRpnBoxWeight * rpn_box +
              kRoiClsWeight * roi_cls + kRoiBoxWeight * roi_box +
              kMaskWeight * mask;
    return b;
}

}  // namespace osb
