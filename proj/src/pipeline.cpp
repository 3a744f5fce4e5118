#include "osb/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "osb/errors.hpp"

namespace osb {

namespace {

constexpr int kAnchorsPerLocation = 3;
constexpr int kRoiChannels = 4 * kMatchedChannels;  // P2..P5 concatenated

// Softmax over a logit pair, second component, in double precision.
double pair_softmax(double l0, double l1) {
    return 1.0 / (1.0 + std::exp(l0 - l1));
}

Tensor flatten(const Tensor& t) {
    Tensor out({static_cast<int>(t.numel())});
    out.data = t.data;
    return out;
}

}  // namespace

RpnOutput rpn_forward(const PyramidFeatures& matched, const WeightBundle& w,
                      const AnchorSet& anchors) {
    const Tensor& conv_w = w.tensor("rpn.conv.weight", 4);
    const Tensor& conv_b = w.tensor("rpn.conv.bias", 1);
    const Tensor& cls_w = w.tensor("rpn.cls.weight", 4);
    const Tensor& cls_b = w.tensor("rpn.cls.bias", 1);
    const Tensor& box_w = w.tensor("rpn.box.weight", 4);
    const Tensor& box_b = w.tensor("rpn.box.bias", 1);
    if (cls_w.dim(3) != 2 * kAnchorsPerLocation)
        throw std::invalid_argument("rpn.cls.weight must output one logit pair per ratio");
    if (box_w.dim(3) != 4 * kAnchorsPerLocation)
        throw std::invalid_argument("rpn.box.weight must output four deltas per ratio");

    RpnOutput out;
    out.objectness.resize(static_cast<std::size_t>(anchors.count()));
    out.deltas.resize(static_cast<std::size_t>(anchors.count()));

    int idx = 0;
    for (int l = 0; l < kPyramidLevels; ++l) {
        const Tensor& p = matched.p[l];
        if (p.dim(0) != anchors.grid_size[l] || p.dim(1) != anchors.grid_size[l])
            throw std::invalid_argument(
                "rpn_forward: level " + std::to_string(l + 2) + " is " +
                shape_string(p) + " but the anchor grid expects side " +
                std::to_string(anchors.grid_size[l]));

        const Tensor hidden = relu(conv2d(p, conv_w, conv_b, 1, Padding::same));
        const Tensor cls = conv2d(hidden, cls_w, cls_b, 1, Padding::same);
        const Tensor box = conv2d(hidden, box_w, box_b, 1, Padding::same);

        const int grid = anchors.grid_size[l];
        for (int r = 0; r < grid; ++r)
            for (int c = 0; c < grid; ++c)
                for (int a = 0; a < kAnchorsPerLocation; ++a, ++idx) {
                    out.objectness[idx] = pair_softmax(cls(r, c, 2 * a), cls(r, c, 2 * a + 1));
                    out.deltas[idx] = BoxDeltas{box(r, c, 4 * a), box(r, c, 4 * a + 1),
                                                box(r, c, 4 * a + 2), box(r, c, 4 * a + 3)};
                }
    }
    if (idx != anchors.count())
        throw std::invalid_argument("rpn_forward: output count does not cover the anchor set");
    return out;
}

std::vector<Proposal> select_proposals(const std::vector<double>& scores,
                                       const std::vector<BoxDeltas>& deltas,
                                       const AnchorSet& anchors, int pre_nms,
                                       double nms_thr, int post_nms) {
    const std::size_t n = static_cast<std::size_t>(anchors.count());
    if (scores.size() != n || deltas.size() != n)
        throw std::invalid_argument("select_proposals: inputs not aligned with anchors");

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return scores[a] > scores[b]; });
    if (static_cast<int>(order.size()) > pre_nms) order.resize(static_cast<std::size_t>(pre_nms));

    const double side = anchors.image_size;
    std::vector<Box> boxes;
    std::vector<double> kept_scores;
    for (int i : order) {
        Box b = clip_box(apply_deltas(anchors.boxes[static_cast<std::size_t>(i)],
                                      deltas[static_cast<std::size_t>(i)]),
                         side, side);
        if (b.width() <= 0 || b.height() <= 0) continue;
        boxes.push_back(b);
        kept_scores.push_back(scores[static_cast<std::size_t>(i)]);
    }

    std::vector<Proposal> out;
    for (int i : nms(boxes, kept_scores, nms_thr)) {
        if (static_cast<int>(out.size()) >= post_nms) break;
        out.push_back(Proposal{boxes[static_cast<std::size_t>(i)],
                               kept_scores[static_cast<std::size_t>(i)]});
    }
    return out;
}

std::vector<Tensor> roi_features(const PyramidFeatures& matched,
                                 const std::vector<Box>& boxes, int out_size,
                                 int frame) {
    if (out_size != 7 && out_size != 14)
        throw std::invalid_argument("roi_features: out_size must be 7 or 14");
    if (frame < 1) throw std::invalid_argument("roi_features: bad frame size");
    for (int l = 0; l < 4; ++l)
        if (matched.p[l].rank() != 3 || matched.p[l].dim(2) != kMatchedChannels)
            throw std::invalid_argument("roi_features: matched level must carry " +
                                        std::to_string(kMatchedChannels) + " channels");

    std::vector<Tensor> out;
    out.reserve(boxes.size());
    for (const Box& b : boxes) {
        const float y1 = static_cast<float>(std::clamp(b.y1 / frame, 0.0, 1.0));
        const float x1 = static_cast<float>(std::clamp(b.x1 / frame, 0.0, 1.0));
        const float y2 = static_cast<float>(std::clamp(b.y2 / frame, 0.0, 1.0));
        const float x2 = static_cast<float>(std::clamp(b.x2 / frame, 0.0, 1.0));
        Tensor roi = bilinear_crop(matched.p[0], y1, x1, y2, x2, out_size, out_size);
        for (int l = 1; l < 4; ++l)
            roi = concat_channels(roi, bilinear_crop(matched.p[l], y1, x1, y2, x2,
                                                     out_size, out_size));
        out.push_back(std::move(roi));
    }
    return out;
}

RoiScore classify_and_regress(const Tensor& roi, const WeightBundle& w) {
    if (roi.rank() != 3 || roi.dim(0) != 7 || roi.dim(1) != 7 ||
        roi.dim(2) != kRoiChannels)
        throw std::invalid_argument("classify_and_regress: input must be 7x7x" +
                                    std::to_string(kRoiChannels) + ", got " +
                                    shape_string(roi));

    const Tensor h1 = relu(dense(flatten(roi), w.tensor("head.cls.fc1.weight", 2),
                                 w.tensor("head.cls.fc1.bias", 1)));
    const Tensor h2 = relu(dense(h1, w.tensor("head.cls.fc2.weight", 2),
                                 w.tensor("head.cls.fc2.bias", 1)));

    const Tensor& logit_w = w.tensor("head.cls.logits.weight", 2);
    if (logit_w.dim(1) != 2)
        throw std::invalid_argument("head.cls.logits.weight must output 2 logits");
    const Tensor logits = dense(h2, logit_w, w.tensor("head.cls.logits.bias", 1));

    const Tensor& box_w = w.tensor("head.cls.box.weight", 2);
    if (box_w.dim(1) != 4)
        throw std::invalid_argument("head.cls.box.weight must output 4 deltas");
    const Tensor d = dense(h2, box_w, w.tensor("head.cls.box.bias", 1));

    RoiScore rs;
    rs.match_prob = pair_softmax(logits(0), logits(1));
    rs.deltas = BoxDeltas{d(0), d(1), d(2), d(3)};
    return rs;
}

Tensor mask_head(const Tensor& roi, const WeightBundle& w) {
    if (roi.rank() != 3 || roi.dim(0) != 14 || roi.dim(1) != 14 ||
        roi.dim(2) != kRoiChannels)
        throw std::invalid_argument("mask_head: input must be 14x14x" +
                                    std::to_string(kRoiChannels) + ", got " +
                                    shape_string(roi));

    Tensor x = roi;
    for (int i = 1; i <= 4; ++i) {
        const std::string conv = "head.mask.conv" + std::to_string(i);
        const std::string bn = "head.mask.bn" + std::to_string(i);
        x = conv2d(x, w.tensor(conv + ".weight", 4), w.tensor(conv + ".bias", 1), 1,
                   Padding::same);
        x = batchnorm_inference(x, w.tensor(bn + ".mean", 1), w.tensor(bn + ".var", 1),
                                w.tensor(bn + ".gamma", 1), w.tensor(bn + ".beta", 1));
        x = relu(x);
    }
    x = conv_transpose_2x2_s2(x, w.tensor("head.mask.deconv.weight", 4),
                              w.tensor("head.mask.deconv.bias", 1));
    const Tensor& logit_w = w.tensor("head.mask.logits.weight", 4);
    if (logit_w.dim(3) != 2)
        throw std::invalid_argument("head.mask.logits.weight must output 2 maps");
    x = conv2d(x, logit_w, w.tensor("head.mask.logits.bias", 1), 1, Padding::same);

    Tensor fg({x.dim(0), x.dim(1)});
    for (int r = 0; r < x.dim(0); ++r)
        for (int c = 0; c < x.dim(1); ++c)
            fg(r, c) = static_cast<float>(pair_softmax(x(r, c, 0), x(r, c, 1)));
    return fg;
}

RleMask paste_mask(const Tensor& map, const Box& box, int image_h, int image_w,
                   double binarize) {
    if (map.rank() != 2) throw std::invalid_argument("paste_mask: map must be rank 2");
    if (image_h < 1 || image_w < 1)
        throw std::invalid_argument("paste_mask: bad image size");

    BinaryMask canvas(image_h, image_w);
    const int x0 = std::max(0, static_cast<int>(std::floor(box.x1)));
    const int y0 = std::max(0, static_cast<int>(std::floor(box.y1)));
    const int x1 = std::min(image_w, static_cast<int>(std::ceil(box.x2)));
    const int y1 = std::min(image_h, static_cast<int>(std::ceil(box.y2)));
    const int tw = x1 - x0, th = y1 - y0;
    if (tw > 0 && th > 0) {
        Tensor src({map.dim(0), map.dim(1), 1});
        src.data = map.data;
        const Tensor sized = bilinear_crop(src, 0.0f, 0.0f, 1.0f, 1.0f, th, tw);
        for (int r = 0; r < th; ++r)
            for (int c = 0; c < tw; ++c)
                if (sized(r, c, 0) > binarize) canvas.set(y0 + r, x0 + c, true);
    }
    return rle_encode(canvas);
}

std::vector<Detection> detect(const BackboneFeatures& query,
                              const std::vector<BackboneFeatures>& references,
                              const WeightBundle& w, const PipelineConfig& cfg,
                              const FrameTransform& frame) {
    if (references.empty())
        throw std::invalid_argument("detect: at least one reference is required");
    if (query.c2.rank() != 3 || query.c2.dim(0) * 4 != cfg.frame ||
        query.c2.dim(1) * 4 != cfg.frame)
        throw std::invalid_argument("detect: query features do not match frame " +
                                    std::to_string(cfg.frame));

    const PyramidFeatures scene = fpn_compose(query, w);
    std::vector<ReferenceEmbedding> embeddings;
    embeddings.reserve(references.size());
    for (const BackboneFeatures& ref : references)
        embeddings.push_back(pool_reference(fpn_compose(ref, w)));
    const ReferenceEmbedding proto = prototype(embeddings);

    const PyramidFeatures matched = match_features(scene, proto, w);
    const AnchorSet anchors = generate_anchors(cfg.frame);
    const RpnOutput rpn = rpn_forward(matched, w, anchors);
    const std::vector<Proposal> proposals = select_proposals(
        rpn.objectness, rpn.deltas, anchors, cfg.pre_nms, cfg.rpn_nms, cfg.post_nms);
    if (proposals.empty()) return {};

    std::vector<Box> prop_boxes;
    prop_boxes.reserve(proposals.size());
    for (const Proposal& p : proposals) prop_boxes.push_back(p.box);
    const std::vector<Tensor> rois = roi_features(matched, prop_boxes, 7, cfg.frame);

    std::vector<Box> refined;
    std::vector<double> scores;
    for (std::size_t i = 0; i < proposals.size(); ++i) {
        const RoiScore rs = classify_and_regress(rois[i], w);
        if (rs.match_prob <= cfg.score_threshold) continue;
        const Box b = clip_box(apply_deltas(proposals[i].box, rs.deltas),
                               cfg.frame, cfg.frame);
        if (b.width() <= 0 || b.height() <= 0) continue;
        refined.push_back(b);
        scores.push_back(rs.match_prob);
    }

    std::vector<Box> final_boxes;
    std::vector<double> final_scores;
    for (int i : nms(refined, scores, cfg.final_nms)) {
        if (static_cast<int>(final_boxes.size()) >= cfg.max_detections) break;
        final_boxes.push_back(refined[static_cast<std::size_t>(i)]);
        final_scores.push_back(scores[static_cast<std::size_t>(i)]);
    }
    if (final_boxes.empty()) return {};

    const std::vector<Tensor> mask_rois = roi_features(matched, final_boxes, 14, cfg.frame);

    std::vector<Detection> out;
    for (std::size_t i = 0; i < final_boxes.size(); ++i) {
        // Map from the padded frame back to original image pixels.
        const Box& fb = final_boxes[i];
        Box ob{(fb.x1 - frame.pad_left) / frame.scale,
               (fb.y1 - frame.pad_top) / frame.scale,
               (fb.x2 - frame.pad_left) / frame.scale,
               (fb.y2 - frame.pad_top) / frame.scale};
        ob = clip_box(ob, frame.orig_w, frame.orig_h);
        if (ob.width() <= 0 || ob.height() <= 0) continue;

        Detection d;
        d.box = ob;
        d.score = final_scores[i];
        d.mask = paste_mask(mask_head(mask_rois[i], w), ob, frame.orig_h,
                            frame.orig_w, cfg.mask_binarize);
        out.push_back(std::move(d));
    }
    return out;
}

}  // namespace osb
