#include "osb/matching.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "osb/errors.hpp"

namespace osb {

namespace {

const Tensor& check_backbone_stage(const Tensor& c, int channels, const char* name) {
    if (c.rank() != 3 || c.dim(2) != channels)
        throw std::invalid_argument(std::string("fpn_compose: ") + name +
                                    " must be HxWx" + std::to_string(channels) +
                                    ", got " + shape_string(c));
    return c;
}

Tensor lateral_1x1(const Tensor& c, const WeightBundle& w, const std::string& key) {
    const Tensor& kernel = w.tensor(key + ".weight", 4);
    if (kernel.dim(0) != 1 || kernel.dim(1) != 1)
        throw std::invalid_argument(key + ".weight must be a 1x1 kernel");
    if (kernel.dim(3) != kPyramidChannels)
        throw std::invalid_argument(key + ".weight must output " +
                                    std::to_string(kPyramidChannels) + " channels");
    return conv2d(c, kernel, w.tensor(key + ".bias", 1), 1, Padding::same);
}

Tensor add_tensors(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw std::invalid_argument("fpn_compose: level shapes do not chain: " +
                                    shape_string(a) + " vs " + shape_string(b));
    Tensor out = a;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
    return out;
}

}  // namespace

bool WeightBundle::has(const std::string& name) const {
    return tensors.count(name) != 0;
}

const Tensor& WeightBundle::tensor(const std::string& name) const {
    const auto it = tensors.find(name);
    if (it == tensors.end()) throw ParseError("weight tensor missing: " + name);
    return it->second;
}

const Tensor& WeightBundle::tensor(const std::string& name, int rank) const {
    const Tensor& t = tensor(name);
    if (t.rank() != rank)
        throw ParseError("weight tensor " + name + " has shape " + shape_string(t) +
                         ", expected rank " + std::to_string(rank));
    return t;
}

PyramidFeatures fpn_compose(const BackboneFeatures& c, const WeightBundle& w) {
    check_backbone_stage(c.c2, kBackboneChannels[0], "C2");
    check_backbone_stage(c.c3, kBackboneChannels[1], "C3");
    check_backbone_stage(c.c4, kBackboneChannels[2], "C4");
    check_backbone_stage(c.c5, kBackboneChannels[3], "C5");

    PyramidFeatures out;
    out.p[3] = lateral_1x1(c.c5, w, "fpn.lateral.c5");                       // P5
    out.p[2] = add_tensors(lateral_1x1(c.c4, w, "fpn.lateral.c4"),
                           upsample2x_nearest(out.p[3]));                    // P4
    out.p[1] = add_tensors(lateral_1x1(c.c3, w, "fpn.lateral.c3"),
                           upsample2x_nearest(out.p[2]));                    // P3
    out.p[0] = add_tensors(lateral_1x1(c.c2, w, "fpn.lateral.c2"),
                           upsample2x_nearest(out.p[1]));                    // P2
    out.p[4] = subsample2x(out.p[3]);                                        // P6
    return out;
}

ReferenceEmbedding pool_reference(const PyramidFeatures& ref) {
    ReferenceEmbedding e;
    for (int l = 0; l < kPyramidLevels; ++l) e.e[l] = global_avg_pool(ref.p[l]);
    e.shots = 1;
    return e;
}

ReferenceEmbedding prototype(const std::vector<ReferenceEmbedding>& embeddings) {
    if (embeddings.empty())
        throw std::invalid_argument("prototype: empty embedding list");
    const int n = static_cast<int>(embeddings.size());
    for (const auto& e : embeddings) {
        if (e.shots != 1)
            throw std::invalid_argument("prototype: inputs must be single-shot embeddings");
        for (int l = 0; l < kPyramidLevels; ++l)
            if (!e.e[l].same_shape(embeddings[0].e[l]))
                throw std::invalid_argument("prototype: embedding lengths differ");
    }

    ReferenceEmbedding out;
    out.shots = n;
    std::vector<float> vals(static_cast<std::size_t>(n));
    for (int l = 0; l < kPyramidLevels; ++l) {
        out.e[l] = Tensor({embeddings[0].e[l].dim(0)});
        for (int i = 0; i < out.e[l].dim(0); ++i) {
            for (int k = 0; k < n; ++k) vals[k] = embeddings[k].e[l](i);
            // Sorted accumulation keeps the mean independent of input order.
            std::sort(vals.begin(), vals.end());
            if (vals.front() == vals.back()) {
                out.e[l](i) = vals.front();
                continue;
            }
            double acc = 0.0;
            for (float v : vals) acc += v;
            out.e[l](i) = static_cast<float>(acc / n);
        }
    }
    return out;
}

PyramidFeatures match_features(const PyramidFeatures& scene,
                               const ReferenceEmbedding& e,
                               const WeightBundle& w) {
    static const char* kLevelNames[kPyramidLevels] = {"p2", "p3", "p4", "p5", "p6"};
    PyramidFeatures out;
    for (int l = 0; l < kPyramidLevels; ++l) {
        const Tensor& p = scene.p[l];
        if (p.rank() != 3 || p.dim(2) != kPyramidChannels)
            throw std::invalid_argument("match_features: scene level must carry " +
                                        std::to_string(kPyramidChannels) +
                                        " channels, got " + shape_string(p));
        if (e.e[l].rank() != 1 || e.e[l].dim(0) != p.dim(2))
            throw std::invalid_argument("match_features: embedding length does not match scene channels");

        const Tensor diff = abs_diff_channels(p, e.e[l]);
        const Tensor cat = concat_channels(p, diff);

        const std::string key = std::string("match.reduce.") + kLevelNames[l];
        const Tensor& kernel = w.tensor(key + ".weight", 4);
        if (kernel.dim(0) != 1 || kernel.dim(1) != 1)
            throw std::invalid_argument(key + ".weight must be a 1x1 kernel");
        if (kernel.dim(3) != kMatchedChannels)
            throw std::invalid_argument(key + ".weight must output " +
                                        std::to_string(kMatchedChannels) + " channels");
        out.p[l] = conv2d(cat, kernel, w.tensor(key + ".bias", 1), 1, Padding::same);
    }
    return out;
}

FrameTransform compute_frame_transform(int orig_h, int orig_w, int frame) {
    if (orig_h < 1 || orig_w < 1)
        throw std::invalid_argument("preprocess: empty image");
    if (frame < 1) throw std::invalid_argument("preprocess: frame must be positive");

    const int longer = std::max(orig_h, orig_w);
    const double scale = static_cast<double>(frame) / longer;

    FrameTransform t;
    t.frame = frame;
    t.orig_h = orig_h;
    t.orig_w = orig_w;
    t.content_h = orig_h == longer
                      ? frame
                      : std::max(1, static_cast<int>(std::lround(orig_h * scale)));
    t.content_w = orig_w == longer
                      ? frame
                      : std::max(1, static_cast<int>(std::lround(orig_w * scale)));
    t.pad_top = (frame - t.content_h) / 2;
    t.pad_left = (frame - t.content_w) / 2;
    t.scale = scale;
    return t;
}

PreprocessResult preprocess_to_frame(const RgbImage& image, int frame,
                                     const std::array<float, 3>& mean_rgb) {
    const FrameTransform t = compute_frame_transform(image.height, image.width, frame);

    Tensor content = image_to_tensor(image);
    if (t.content_h != image.height || t.content_w != image.width)
        content = bilinear_crop(content, 0.0f, 0.0f, 1.0f, 1.0f, t.content_h, t.content_w);

    Tensor out({frame, frame, 3});
    for (int y = 0; y < t.content_h; ++y)
        for (int x = 0; x < t.content_w; ++x)
            for (int c = 0; c < 3; ++c)
                out(t.pad_top + y, t.pad_left + x, c) = content(y, x, c) - mean_rgb[c];
    return {std::move(out), t};
}

PreprocessResult preprocess_query(const RgbImage& image,
                                  const std::array<float, 3>& mean_rgb) {
    return preprocess_to_frame(image, 1024, mean_rgb);
}

PreprocessResult preprocess_reference(const RgbImage& image,
                                      const std::array<float, 3>& mean_rgb) {
    return preprocess_to_frame(image, 192, mean_rgb);
}

RgbImage reference_crop(const Dataset& dataset, int ann_id, const RgbImage& image) {
    const AnnotationRecord& ann = dataset.annotation(ann_id);
    if (ann.iscrowd)
        throw std::invalid_argument("reference_crop: crowd annotation " +
                                    std::to_string(ann_id) + " is not a valid reference");
    const ImageRecord& rec = dataset.image(ann.image_id);
    if (image.height != rec.height || image.width != rec.width)
        throw MismatchError("reference_crop: pixels are " + std::to_string(image.width) +
                            "x" + std::to_string(image.height) + " but image " +
                            std::to_string(rec.id) + " is " + std::to_string(rec.width) +
                            "x" + std::to_string(rec.height));

    int x0 = static_cast<int>(std::lround(ann.bbox[0]));
    int y0 = static_cast<int>(std::lround(ann.bbox[1]));
    int w = static_cast<int>(std::lround(ann.bbox[2]));
    int h = static_cast<int>(std::lround(ann.bbox[3]));
    x0 = std::clamp(x0, 0, image.width);
    y0 = std::clamp(y0, 0, image.height);
    w = std::min(w, image.width - x0);
    h = std::min(h, image.height - y0);
    if (w < 1 || h < 1)
        throw std::invalid_argument("reference_crop: annotation " +
                                    std::to_string(ann_id) + " has a zero-area box");
    return crop_image(image, x0, y0, w, h);
}

}  // namespace osb
