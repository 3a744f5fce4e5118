#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "osb/coco.hpp"
#include "osb/image.hpp"
#include "osb/tensor.hpp"

namespace osb {

inline constexpr int kPyramidLevels = 5;  // P2..P6
inline constexpr int kPyramidChannels = 256;
inline constexpr int kMatchedChannels = 384;
inline constexpr std::array<int, kPyramidLevels> kLevelStrides = {4, 8, 16, 32, 64};
inline constexpr std::array<int, 4> kBackboneChannels = {256, 512, 1024, 2048};

// Backbone stage outputs for one preprocessed frame. Spatial sizes are
// frame/4, frame/8, frame/16, frame/32.
struct BackboneFeatures {
    Tensor c2, c3, c4, c5;
};

// p[0]=P2 .. p[4]=P6, 256 channels each, spatial size halving per level.
struct PyramidFeatures {
    std::array<Tensor, kPyramidLevels> p;
};

// Per-level pooled vectors e2..e6 plus the number of references averaged.
struct ReferenceEmbedding {
    std::array<Tensor, kPyramidLevels> e;
    int shots = 1;
};

// Named tensor store shared by all weight-parameterized ops.
//
// Expected entries (shapes use kernel layout kh x kw x c_in x c_out and
// dense layout in x out):
//   fpn.lateral.c{2,3,4,5}.{weight,bias}   1x1 convs onto 256 channels
//   match.reduce.p{2,3,4,5,6}.{weight,bias} 1x1x512x384 reducers
//   rpn.conv.{weight,bias}                 3x3x384xW shared conv
//   rpn.cls.{weight,bias}                  1x1xWx6 objectness logit pairs
//   rpn.box.{weight,bias}                  1x1xWx12 per-ratio deltas
//   head.cls.fc1.{weight,bias}             75264xN
//   head.cls.fc2.{weight,bias}             NxM
//   head.cls.logits.{weight,bias}          Mx2
//   head.cls.box.{weight,bias}             Mx4
//   head.mask.conv{1..4}.{weight,bias}     3x3 convs
//   head.mask.bn{1..4}.{mean,var,gamma,beta}
//   head.mask.deconv.{weight,bias}         2x2 transposed conv
//   head.mask.logits.{weight,bias}         1x1 conv onto 2 maps
//
// Hidden widths (W, N, M, mask conv channels) are taken from the stored
// shapes; channel contracts that the method fixes (256, 384, 1536) are
// enforced by the consuming ops.
struct WeightBundle {
    std::map<std::string, Tensor> tensors;

    bool has(const std::string& name) const;
    const Tensor& tensor(const std::string& name) const;  // throws ParseError
    const Tensor& tensor(const std::string& name, int rank) const;
};

// P5 = 1x1conv(C5); P_i = 1x1conv(C_i) + upsample2x(P_{i+1}) for i=4,3,2;
// P6 = subsample2x(P5). Backbone channel counts are enforced.
PyramidFeatures fpn_compose(const BackboneFeatures& c, const WeightBundle& w);

// e_i = global average pool of P_i, shots = 1.
ReferenceEmbedding pool_reference(const PyramidFeatures& ref);

// Element-wise mean per level; shots = list size. Exactly permutation
// invariant (values are accumulated in sorted order) and exact on identical
// inputs.
ReferenceEmbedding prototype(const std::vector<ReferenceEmbedding>& embeddings);

// Per level: D = |P - e| broadcast over space, concat(P, D) -> 512 channels,
// 1x1 conv -> 384 channels.
PyramidFeatures match_features(const PyramidFeatures& scene,
                               const ReferenceEmbedding& e,
                               const WeightBundle& w);

// Geometry of a preprocessed frame: content placement and scale, used to map
// frame-space boxes back to original image pixels.
struct FrameTransform {
    int frame = 0;        // output side length
    int orig_h = 0, orig_w = 0;
    int content_h = 0, content_w = 0;
    int pad_top = 0, pad_left = 0;
    double scale = 1.0;   // content = original * scale
};

// Transform for an original size without touching pixels: longer side scaled
// to `frame`, shorter side rounded, content centered with the extra padding
// pixel at bottom/right.
FrameTransform compute_frame_transform(int orig_h, int orig_w, int frame);

struct PreprocessResult {
    Tensor tensor;  // frame x frame x 3
    FrameTransform transform;
};

inline constexpr std::array<float, 3> kDefaultMeanRgb = {123.68f, 116.78f, 103.94f};

// Aspect-preserving bilinear resize of the longer side to `frame`, content
// centered with the extra padding pixel at bottom/right. The per-channel mean
// is subtracted from the content only; padding stays exactly zero.
PreprocessResult preprocess_to_frame(const RgbImage& image, int frame,
                                     const std::array<float, 3>& mean_rgb);

PreprocessResult preprocess_query(const RgbImage& image,
                                  const std::array<float, 3>& mean_rgb = kDefaultMeanRgb);
PreprocessResult preprocess_reference(const RgbImage& image,
                                      const std::array<float, 3>& mean_rgb = kDefaultMeanRgb);

// Bounding-box pixel crop of an annotation; no mask is applied. Crowd
// annotations and zero-area boxes are rejected.
RgbImage reference_crop(const Dataset& dataset, int ann_id, const RgbImage& image);

}  // namespace osb
