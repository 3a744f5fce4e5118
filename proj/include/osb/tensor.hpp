#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace osb {

// Dense row-major float32 tensor, rank 1..4.
// Rank-3 tensors are laid out (height, width, channels).
// Rank-4 kernel tensors are laid out (kh, kw, c_in, c_out).
struct Tensor {
    std::vector<int> shape;
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> dims);

    int rank() const { return static_cast<int>(shape.size()); }
    std::size_t numel() const;

    int dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }

    float& operator()(int i);
    float operator()(int i) const;
    float& operator()(int a, int b);
    float operator()(int a, int b) const;
    float& operator()(int y, int x, int c);
    float operator()(int y, int x, int c) const;
    float& operator()(int a, int b, int c, int d);
    float operator()(int a, int b, int c, int d) const;

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

Tensor zeros(std::vector<int> dims);
Tensor full(std::vector<int> dims, float value);

std::string shape_string(const Tensor& t);

enum class Padding { same, valid };

// Direct cross-correlation. x is HxWxC, kernels are kxkxCxC' with k odd,
// bias has length C'. `same` zero-pads so the output is ceil(H/stride) x
// ceil(W/stride); `valid` keeps only fully covered windows.
Tensor conv2d(const Tensor& x, const Tensor& kernels, const Tensor& bias,
              int stride, Padding padding);

// Transposed convolution with a 2x2 kernel and stride 2: output is 2Hx2WxC'.
// kernels are 2x2xCxC', bias has length C'.
Tensor conv_transpose_2x2_s2(const Tensor& x, const Tensor& kernels,
                             const Tensor& bias);

// y = x * W + b with x of length `in`, W of shape (in, out), b of length `out`.
Tensor dense(const Tensor& x, const Tensor& weights, const Tensor& bias);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// Softmax over a rank-1 tensor, max-subtracted for stability.
Tensor softmax(const Tensor& x);

// Per-channel (x - mean) / sqrt(var + eps) * gamma + beta on an HxWxC tensor.
Tensor batchnorm_inference(const Tensor& x, const Tensor& mean,
                           const Tensor& var, const Tensor& gamma,
                           const Tensor& beta, float eps = 1e-5f);

// Spatial mean per channel: HxWxC -> vector of length C.
Tensor global_avg_pool(const Tensor& x);

// Each input cell becomes a 2x2 block: HxWxC -> 2Hx2WxC.
Tensor upsample2x_nearest(const Tensor& x);

// Stride-2 pick of the top-left element: HxWxC -> ceil(H/2) x ceil(W/2) x C.
Tensor subsample2x(const Tensor& x);

// Samples an hxw grid of bin centers inside a normalized (y1,x1,y2,x2) box
// by bilinear interpolation with half-pixel alignment, edge-clamped.
Tensor bilinear_crop(const Tensor& x, float y1, float x1, float y2, float x2,
                     int out_h, int out_w);

// Channel concatenation of two HxWxC tensors with matching spatial dims.
Tensor concat_channels(const Tensor& a, const Tensor& b);

// |x[y][x][c] - v[c]| for an HxWxC tensor and a length-C vector.
Tensor abs_diff_channels(const Tensor& x, const Tensor& v);

}  // namespace osb
