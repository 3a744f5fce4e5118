#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "osb/tensor.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

using namespace osb;
using testutil::max_abs_diff;
using testutil::random_tensor;

TEST_CASE("conv2d matches the naive oracle on 1000 random cases") {
    auto g = testutil::rng(101);
    for (int trial = 0; trial < 1000; ++trial) {
        const int h = 1 + int(g() % 8), w = 1 + int(g() % 8);
        const int cin = 1 + int(g() % 4), cout = 1 + int(g() % 4);
        const int stride = 1 + int(g() % 2);
        const int kmax = std::min(h, w);
        std::vector<int> ks;
        for (int k : {1, 3, 5})
            if (k <= kmax) ks.push_back(k);
        const int k = ks[g() % ks.size()];
        const Padding pad = (g() & 1) ? Padding::same : Padding::valid;

        const Tensor x = random_tensor({h, w, cin}, g);
        const Tensor kern = random_tensor({k, k, cin, cout}, g);
        const Tensor bias = random_tensor({cout}, g);

        const Tensor got = conv2d(x, kern, bias, stride, pad);
        const Tensor want = oracle::conv2d_ref(x, kern, bias, stride, pad == Padding::same);
        REQUIRE(got.shape == want.shape);
        REQUIRE(max_abs_diff(got, want) <= 1e-6);
        for (float v : got.data) REQUIRE(std::isfinite(v));
    }
}

TEST_CASE("conv2d same-padding output size is ceil(n/stride)") {
    auto g = testutil::rng(102);
    const Tensor x = random_tensor({5, 7, 2}, g);
    const Tensor k = random_tensor({3, 3, 2, 4}, g);
    const Tensor b = random_tensor({4}, g);
    const Tensor y = conv2d(x, k, b, 2, Padding::same);
    CHECK(y.shape == std::vector<int>{3, 4, 4});
    const Tensor v = conv2d(x, k, b, 1, Padding::valid);
    CHECK(v.shape == std::vector<int>{3, 5, 4});
    CHECK_THROWS_AS(conv2d(x, random_tensor({2, 2, 2, 4}, g), b, 1, Padding::same),
                    std::invalid_argument);  // even kernel
    CHECK_THROWS_AS(conv2d(x, random_tensor({3, 3, 3, 4}, g), b, 1, Padding::same),
                    std::invalid_argument);  // channel mismatch
}

TEST_CASE("transposed conv matches the scatter oracle on 1000 random cases") {
    auto g = testutil::rng(103);
    for (int trial = 0; trial < 1000; ++trial) {
        const int h = 1 + int(g() % 8), w = 1 + int(g() % 8);
        const int cin = 1 + int(g() % 4), cout = 1 + int(g() % 4);
        const Tensor x = random_tensor({h, w, cin}, g);
        const Tensor k = random_tensor({2, 2, cin, cout}, g);
        const Tensor b = random_tensor({cout}, g);
        const Tensor got = conv_transpose_2x2_s2(x, k, b);
        const Tensor want = oracle::deconv2x2_ref(x, k, b);
        REQUIRE(got.shape == std::vector<int>{2 * h, 2 * w, cout});
        REQUIRE(max_abs_diff(got, want) <= 1e-6);
    }
}

TEST_CASE("dense matches the naive oracle on 1000 random cases") {
    auto g = testutil::rng(104);
    for (int trial = 0; trial < 1000; ++trial) {
        const int in = 1 + int(g() % 32), out = 1 + int(g() % 16);
        const Tensor x = random_tensor({in}, g);
        const Tensor w = random_tensor({in, out}, g);
        const Tensor b = random_tensor({out}, g);
        const Tensor got = dense(x, w, b);
        const Tensor want = oracle::dense_ref(x, w, b);
        REQUIRE(max_abs_diff(got, want) <= 1e-6);
    }
    CHECK_THROWS_AS(dense(random_tensor({3}, g), random_tensor({4, 2}, g),
                          random_tensor({2}, g)),
                    std::invalid_argument);
}

TEST_CASE("batchnorm inference matches the formula on 1000 random cases") {
    auto g = testutil::rng(105);
    for (int trial = 0; trial < 1000; ++trial) {
        const int h = 1 + int(g() % 6), w = 1 + int(g() % 6), c = 1 + int(g() % 5);
        const Tensor x = random_tensor({h, w, c}, g);
        const Tensor mean = random_tensor({c}, g);
        Tensor var = random_tensor({c}, g, 0.25f, 2.0f);
        const Tensor gamma = random_tensor({c}, g);
        const Tensor beta = random_tensor({c}, g);
        const Tensor got = batchnorm_inference(x, mean, var, gamma, beta);
        const Tensor want = oracle::batchnorm_ref(x, mean, var, gamma, beta, 1e-5f);
        REQUIRE(max_abs_diff(got, want) <= 1e-6);
    }
}

TEST_CASE("bilinear crop matches the double-precision oracle on 1000 random cases") {
    auto g = testutil::rng(106);
    std::uniform_real_distribution<float> unit(0.0f, 1.0f);
    for (int trial = 0; trial < 1000; ++trial) {
        const int h = 1 + int(g() % 8), w = 1 + int(g() % 8), c = 1 + int(g() % 3);
        const int oh = 1 + int(g() % 7), ow = 1 + int(g() % 7);
        const Tensor x = random_tensor({h, w, c}, g);
        float y1 = unit(g), y2 = unit(g), x1 = unit(g), x2 = unit(g);
        if (y1 > y2) std::swap(y1, y2);
        if (x1 > x2) std::swap(x1, x2);
        const Tensor got = bilinear_crop(x, y1, x1, y2, x2, oh, ow);
        const Tensor want = oracle::bilinear_crop_ref(x, y1, x1, y2, x2, oh, ow);
        REQUIRE(got.shape == std::vector<int>{oh, ow, c});
        REQUIRE(max_abs_diff(got, want) <= 1e-6);
    }
    const Tensor x = random_tensor({4, 4, 1}, g);
    CHECK_THROWS_AS(bilinear_crop(x, 0.5f, 0.0f, 0.4f, 1.0f, 2, 2),
                    std::invalid_argument);  // inverted box
    CHECK_THROWS_AS(bilinear_crop(x, -0.1f, 0.0f, 1.0f, 1.0f, 2, 2),
                    std::invalid_argument);  // outside [0,1]
}

TEST_CASE("bilinear crop of the full box is a half-pixel-aligned resize") {
    // Upsampling a constant image stays constant; identity box at the same
    // size returns the input exactly.
    auto g = testutil::rng(107);
    const Tensor c = full({3, 3, 2}, 1.25f);
    const Tensor up = bilinear_crop(c, 0, 0, 1, 1, 9, 9);
    for (float v : up.data) CHECK(v == 1.25f);
    const Tensor x = random_tensor({5, 6, 2}, g);
    const Tensor same = bilinear_crop(x, 0, 0, 1, 1, 5, 6);
    CHECK(max_abs_diff(x, same) == 0.0);
}

TEST_CASE("elementwise and pooling helpers") {
    auto g = testutil::rng(108);
    const Tensor x = random_tensor({4, 5, 3}, g);

    const Tensor pooled = global_avg_pool(x);
    const Tensor want_pool = oracle::avgpool_ref(x);
    CHECK(max_abs_diff(pooled, want_pool) <= 1e-6);

    CHECK(max_abs_diff(upsample2x_nearest(x), oracle::upsample_ref(x)) == 0.0);
    CHECK(max_abs_diff(subsample2x(x), oracle::subsample_ref(x)) == 0.0);
    const Tensor odd = random_tensor({5, 5, 2}, g);
    CHECK(subsample2x(odd).shape == std::vector<int>{3, 3, 2});

    const Tensor r = relu(x);
    for (std::size_t i = 0; i < r.data.size(); ++i)
        CHECK(r.data[i] == std::max(0.0f, x.data[i]));

    const Tensor s = sigmoid(x);
    for (std::size_t i = 0; i < s.data.size(); ++i)
        CHECK(s.data[i] == doctest::Approx(1.0f / (1.0f + std::exp(-x.data[i]))));

    Tensor logits({3});
    logits.data = {1000.0f, 1000.0f, -1000.0f};
    const Tensor sm = softmax(logits);  // stable under large magnitudes
    CHECK(sm.data[0] == doctest::Approx(0.5f));
    CHECK(sm.data[1] == doctest::Approx(0.5f));
    CHECK(sm.data[2] == doctest::Approx(0.0f));
    float sum = 0;
    for (float v : sm.data) sum += v;
    CHECK(sum == doctest::Approx(1.0f));

    const Tensor a = random_tensor({2, 2, 2}, g), b2 = random_tensor({2, 2, 3}, g);
    const Tensor cat = concat_channels(a, b2);
    CHECK(cat.shape == std::vector<int>{2, 2, 5});
    CHECK(cat(1, 1, 0) == a(1, 1, 0));
    CHECK(cat(1, 1, 2) == b2(1, 1, 0));

    const Tensor v = random_tensor({2}, g);
    const Tensor d = abs_diff_channels(a, v);
    CHECK(d(0, 1, 1) == std::abs(a(0, 1, 1) - v(1)));
}
