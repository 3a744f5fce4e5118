#pragma once

#include <vector>

#include "osb/geometry.hpp"
#include "osb/mask.hpp"
#include "osb/matching.hpp"
#include "osb/tensor.hpp"

namespace osb {

struct Proposal {
    Box box;            // frame pixels, clipped
    double objectness = 0.0;
};

// One detected instance in original-image coordinates. The episode key is
// attached by the caller that runs the episode.
struct Detection {
    Box box;
    double score = 0.0;
    RleMask mask;       // full-image frame
    int image_id = 0;
    int category_id = 0;
    int run = 0;
};

struct PipelineConfig {
    int frame = 1024;              // preprocessed square side
    int pre_nms = 6000;            // top anchors fed to proposal NMS
    double rpn_nms = 0.7;
    int post_nms = 1000;           // proposals kept after NMS
    double score_threshold = 0.05; // detections must score strictly above
    double final_nms = 0.5;
    int max_detections = 100;
    double mask_binarize = 0.5;
};

// Per-anchor RPN outputs, aligned index-for-index with generate_anchors
// ordering (level-major, row-major, ratio-minor).
struct RpnOutput {
    std::vector<double> objectness;  // softmax over each logit pair
    std::vector<BoxDeltas> deltas;
};

// 3x3 shared conv + ReLU, then 1x1 heads. Objectness for ratio slot a at a
// location comes from logit channels (2a, 2a+1); deltas from (4a..4a+3).
RpnOutput rpn_forward(const PyramidFeatures& matched, const WeightBundle& w,
                      const AnchorSet& anchors);

// Top pre_nms by objectness, decode deltas, clip to the frame, drop
// degenerate boxes, NMS, keep top post_nms.
std::vector<Proposal> select_proposals(const std::vector<double>& scores,
                                       const std::vector<BoxDeltas>& deltas,
                                       const AnchorSet& anchors,
                                       int pre_nms = 6000, double nms_thr = 0.7,
                                       int post_nms = 1000);

// Bilinear crop from each of P2..P5 (384 channels each), channel-concatenated
// into out_size x out_size x 1536. Boxes are in frame pixels.
std::vector<Tensor> roi_features(const PyramidFeatures& matched,
                                 const std::vector<Box>& boxes, int out_size,
                                 int frame);

struct RoiScore {
    double match_prob = 0.0;  // second softmax component
    BoxDeltas deltas;         // class-agnostic refinement
};

RoiScore classify_and_regress(const Tensor& roi, const WeightBundle& w);

// Returns the 28x28 foreground probability map (rank-2 tensor).
Tensor mask_head(const Tensor& roi, const WeightBundle& w);

// Bilinear-resize the probability map to the box, threshold strictly above
// `binarize`, paste into a zero canvas of the image size, RLE-encode.
RleMask paste_mask(const Tensor& map, const Box& box, int image_h, int image_w,
                   double binarize = 0.5);

// Full inference for one episode: backbone features in, detections out in
// original-image coordinates. Invariant to the order of the k references.
std::vector<Detection> detect(const BackboneFeatures& query,
                              const std::vector<BackboneFeatures>& references,
                              const WeightBundle& w, const PipelineConfig& cfg,
                              const FrameTransform& frame);

}  // namespace osb
