#include "osb/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace osb {

namespace {

std::size_t checked_numel(const std::vector<int>& dims) {
    if (dims.empty() || dims.size() > 4)
        throw std::invalid_argument("tensor rank must be 1..4");
    std::size_t n = 1;
    for (int d : dims) {
        if (d < 1) throw std::invalid_argument("tensor dims must be positive");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

void require_rank(const Tensor& t, int rank, const char* what) {
    if (t.rank() != rank)
        throw std::invalid_argument(std::string(what) + ": expected rank " +
                                    std::to_string(rank) + ", got shape " +
                                    shape_string(t));
}

void require_len(const Tensor& t, int len, const char* what) {
    require_rank(t, 1, what);
    if (t.dim(0) != len)
        throw std::invalid_argument(std::string(what) + ": expected length " +
                                    std::to_string(len) + ", got " +
                                    std::to_string(t.dim(0)));
}

}  // namespace

Tensor::Tensor(std::vector<int> dims) {
    data.assign(checked_numel(dims), 0.0f);
    shape = std::move(dims);
}

std::size_t Tensor::numel() const {
    return data.size();
}

float& Tensor::operator()(int i) {
    return data[static_cast<std::size_t>(i)];
}
float Tensor::operator()(int i) const {
    return data[static_cast<std::size_t>(i)];
}
float& Tensor::operator()(int a, int b) {
    return data[static_cast<std::size_t>(a) * shape[1] + b];
}
float Tensor::operator()(int a, int b) const {
    return data[static_cast<std::size_t>(a) * shape[1] + b];
}
float& Tensor::operator()(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * shape[1] + x) * shape[2] + c];
}
float Tensor::operator()(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * shape[1] + x) * shape[2] + c];
}
float& Tensor::operator()(int a, int b, int c, int d) {
    return data[((static_cast<std::size_t>(a) * shape[1] + b) * shape[2] + c) *
                    shape[3] +
                d];
}
float Tensor::operator()(int a, int b, int c, int d) const {
    return data[((static_cast<std::size_t>(a) * shape[1] + b) * shape[2] + c) *
                    shape[3] +
                d];
}

Tensor zeros(std::vector<int> dims) {
    return Tensor(std::move(dims));
}

Tensor full(std::vector<int> dims, float value) {
    Tensor t(std::move(dims));
    std::fill(t.data.begin(), t.data.end(), value);
    return t;
}

std::string shape_string(const Tensor& t) {
    std::string s = "(";
    for (std::size_t i = 0; i < t.shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(t.shape[i]);
    }
    return s + ")";
}

Tensor conv2d(const Tensor& x, const Tensor& kernels, const Tensor& bias,
              int stride, Padding padding) {
    require_rank(x, 3, "conv2d input");
    require_rank(kernels, 4, "conv2d kernels");
    const int h = x.dim(0), w = x.dim(1), cin = x.dim(2);
    const int kh = kernels.dim(0), kw = kernels.dim(1);
    if (kh != kw || kh % 2 == 0)
        throw std::invalid_argument("conv2d: kernel must be square with odd size");
    if (kernels.dim(2) != cin)
        throw std::invalid_argument("conv2d: kernel input channels " +
                                    std::to_string(kernels.dim(2)) +
                                    " do not match input channels " +
                                    std::to_string(cin));
    const int cout = kernels.dim(3);
    require_len(bias, cout, "conv2d bias");
    if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");

    int oh, ow, pad_top, pad_left;
    if (padding == Padding::same) {
        oh = (h + stride - 1) / stride;
        ow = (w + stride - 1) / stride;
        pad_top = std::max((oh - 1) * stride + kh - h, 0) / 2;
        pad_left = std::max((ow - 1) * stride + kw - w, 0) / 2;
    } else {
        if (h < kh || w < kw)
            throw std::invalid_argument("conv2d: input smaller than kernel under valid padding");
        oh = (h - kh) / stride + 1;
        ow = (w - kw) / stride + 1;
        pad_top = 0;
        pad_left = 0;
    }

    Tensor out({oh, ow, cout});
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            const int y0 = oy * stride - pad_top;
            const int x0 = ox * stride - pad_left;
            for (int co = 0; co < cout; ++co) {
                float acc = bias(co);
                for (int ky = 0; ky < kh; ++ky) {
                    const int yy = y0 + ky;
                    if (yy < 0 || yy >= h) continue;
                    for (int kx = 0; kx < kw; ++kx) {
                        const int xx = x0 + kx;
                        if (xx < 0 || xx >= w) continue;
                        for (int ci = 0; ci < cin; ++ci)
                            acc += x(yy, xx, ci) * kernels(ky, kx, ci, co);
                    }
                }
                out(oy, ox, co) = acc;
            }
        }
    }
    return out;
}

Tensor conv_transpose_2x2_s2(const Tensor& x, const Tensor& kernels,
                             const Tensor& bias) {
    require_rank(x, 3, "conv_transpose input");
    require_rank(kernels, 4, "conv_transpose kernels");
    const int h = x.dim(0), w = x.dim(1), cin = x.dim(2);
    if (kernels.dim(0) != 2 || kernels.dim(1) != 2)
        throw std::invalid_argument("conv_transpose: kernel must be 2x2");
    if (kernels.dim(2) != cin)
        throw std::invalid_argument("conv_transpose: channel mismatch");
    const int cout = kernels.dim(3);
    require_len(bias, cout, "conv_transpose bias");

    // With a 2x2 kernel and stride 2 each output cell has exactly one source
    // cell, so the transpose reduces to a gather.
    Tensor out({2 * h, 2 * w, cout});
    for (int oy = 0; oy < 2 * h; ++oy) {
        for (int ox = 0; ox < 2 * w; ++ox) {
            const int sy = oy / 2, sx = ox / 2;
            const int ky = oy % 2, kx = ox % 2;
            for (int co = 0; co < cout; ++co) {
                float acc = bias(co);
                for (int ci = 0; ci < cin; ++ci)
                    acc += x(sy, sx, ci) * kernels(ky, kx, ci, co);
                out(oy, ox, co) = acc;
            }
        }
    }
    return out;
}

Tensor dense(const Tensor& x, const Tensor& weights, const Tensor& bias) {
    require_rank(x, 1, "dense input");
    require_rank(weights, 2, "dense weights");
    const int in = x.dim(0);
    if (weights.dim(0) != in)
        throw std::invalid_argument("dense: weight rows " +
                                    std::to_string(weights.dim(0)) +
                                    " do not match input length " +
                                    std::to_string(in));
    const int out_n = weights.dim(1);
    require_len(bias, out_n, "dense bias");

    Tensor out({out_n});
    for (int o = 0; o < out_n; ++o) {
        float acc = bias(o);
        for (int i = 0; i < in; ++i) acc += x(i) * weights(i, o);
        out(o) = acc;
    }
    return out;
}

Tensor relu(const Tensor& x) {
    Tensor out = x;
    for (float& v : out.data) v = std::max(v, 0.0f);
    return out;
}

Tensor sigmoid(const Tensor& x) {
    Tensor out = x;
    for (float& v : out.data) v = 1.0f / (1.0f + std::exp(-v));
    return out;
}

Tensor softmax(const Tensor& x) {
    require_rank(x, 1, "softmax input");
    Tensor out = x;
    const float m = *std::max_element(out.data.begin(), out.data.end());
    float sum = 0.0f;
    for (float& v : out.data) {
        v = std::exp(v - m);
        sum += v;
    }
    for (float& v : out.data) v /= sum;
    return out;
}

Tensor batchnorm_inference(const Tensor& x, const Tensor& mean,
                           const Tensor& var, const Tensor& gamma,
                           const Tensor& beta, float eps) {
    require_rank(x, 3, "batchnorm input");
    const int c = x.dim(2);
    require_len(mean, c, "batchnorm mean");
    require_len(var, c, "batchnorm var");
    require_len(gamma, c, "batchnorm gamma");
    require_len(beta, c, "batchnorm beta");

    std::vector<float> scale(static_cast<std::size_t>(c)), shift(static_cast<std::size_t>(c));
    for (int i = 0; i < c; ++i) {
        scale[i] = gamma(i) / std::sqrt(var(i) + eps);
        shift[i] = beta(i) - mean(i) * scale[i];
    }
    Tensor out = x;
    std::size_t pos = 0;
    for (int y = 0; y < x.dim(0); ++y)
        for (int xx = 0; xx < x.dim(1); ++xx)
            for (int i = 0; i < c; ++i, ++pos)
                out.data[pos] = x.data[pos] * scale[i] + shift[i];
    return out;
}

Tensor global_avg_pool(const Tensor& x) {
    require_rank(x, 3, "global_avg_pool input");
    const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
    Tensor out({c});
    for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx)
            for (int i = 0; i < c; ++i) out(i) += x(y, xx, i);
    const float inv = 1.0f / (static_cast<float>(h) * static_cast<float>(w));
    for (float& v : out.data) v *= inv;
    return out;
}

Tensor upsample2x_nearest(const Tensor& x) {
    require_rank(x, 3, "upsample input");
    const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
    Tensor out({2 * h, 2 * w, c});
    for (int y = 0; y < 2 * h; ++y)
        for (int xx = 0; xx < 2 * w; ++xx)
            for (int i = 0; i < c; ++i) out(y, xx, i) = x(y / 2, xx / 2, i);
    return out;
}

Tensor subsample2x(const Tensor& x) {
    require_rank(x, 3, "subsample input");
    const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
    const int oh = (h + 1) / 2, ow = (w + 1) / 2;
    Tensor out({oh, ow, c});
    for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx)
            for (int i = 0; i < c; ++i) out(y, xx, i) = x(2 * y, 2 * xx, i);
    return out;
}

namespace {

float sample_bilinear(const Tensor& x, float py, float px, int c) {
    const int h = x.dim(0), w = x.dim(1);
    py = std::clamp(py, 0.0f, static_cast<float>(h - 1));
    px = std::clamp(px, 0.0f, static_cast<float>(w - 1));
    const int y0 = static_cast<int>(std::floor(py));
    const int x0 = static_cast<int>(std::floor(px));
    const int y1 = std::min(y0 + 1, h - 1);
    const int x1 = std::min(x0 + 1, w - 1);
    const float wy = py - static_cast<float>(y0);
    const float wx = px - static_cast<float>(x0);
    const float top = x(y0, x0, c) * (1.0f - wx) + x(y0, x1, c) * wx;
    const float bot = x(y1, x0, c) * (1.0f - wx) + x(y1, x1, c) * wx;
    return top * (1.0f - wy) + bot * wy;
}

}  // namespace

Tensor bilinear_crop(const Tensor& x, float y1, float x1, float y2, float x2,
                     int out_h, int out_w) {
    require_rank(x, 3, "bilinear_crop input");
    if (y2 < y1 || x2 < x1)
        throw std::invalid_argument("bilinear_crop: inverted box");
    if (y1 < 0.0f || x1 < 0.0f || y2 > 1.0f || x2 > 1.0f)
        throw std::invalid_argument("bilinear_crop: box outside [0,1]");
    if (out_h < 1 || out_w < 1)
        throw std::invalid_argument("bilinear_crop: output size must be positive");

    const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
    Tensor out({out_h, out_w, c});
    for (int r = 0; r < out_h; ++r) {
        const float yn = y1 + (static_cast<float>(r) + 0.5f) /
                                  static_cast<float>(out_h) * (y2 - y1);
        const float py = yn * static_cast<float>(h) - 0.5f;
        for (int cc = 0; cc < out_w; ++cc) {
            const float xn = x1 + (static_cast<float>(cc) + 0.5f) /
                                      static_cast<float>(out_w) * (x2 - x1);
            const float px = xn * static_cast<float>(w) - 0.5f;
            for (int i = 0; i < c; ++i)
                out(r, cc, i) = sample_bilinear(x, py, px, i);
        }
    }
    return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    require_rank(a, 3, "concat_channels lhs");
    require_rank(b, 3, "concat_channels rhs");
    if (a.dim(0) != b.dim(0) || a.dim(1) != b.dim(1))
        throw std::invalid_argument("concat_channels: spatial dims differ: " +
                                    shape_string(a) + " vs " + shape_string(b));
    const int h = a.dim(0), w = a.dim(1), ca = a.dim(2), cb = b.dim(2);
    Tensor out({h, w, ca + cb});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            for (int i = 0; i < ca; ++i) out(y, x, i) = a(y, x, i);
            for (int i = 0; i < cb; ++i) out(y, x, ca + i) = b(y, x, i);
        }
    return out;
}

Tensor abs_diff_channels(const Tensor& x, const Tensor& v) {
    require_rank(x, 3, "abs_diff_channels input");
    require_len(v, x.dim(2), "abs_diff_channels vector");
    Tensor out = x;
    std::size_t pos = 0;
    const int c = x.dim(2);
    for (int y = 0; y < x.dim(0); ++y)
        for (int xx = 0; xx < x.dim(1); ++xx)
            for (int i = 0; i < c; ++i, ++pos)
                out.data[pos] = std::abs(x.data[pos] - v(i));
    return out;
}

}  // namespace osb
