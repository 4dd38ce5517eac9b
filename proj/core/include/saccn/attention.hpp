#pragma once

// Attention blocks. RAM gates shallow features with channel attention
// followed by spatial attention (shared FC pair across the avg/max paths).
// SAM runs spatial self-attention and channel self-attention in parallel on
// deep features, sums the branches and fuses with a 1x1 convolution.

#include <functional>
#include <string>

#include "saccn/layers.hpp"

namespace saccn {

template <class T>
struct RamBlock {
    Linear<T> fc1;       // C -> max(1, C/r), shared between avg and max paths
    Linear<T> fc2;       // max(1, C/r) -> C
    Conv2d<T> spatial;   // 2 -> 1, 3x3, padding (1,1)
    int64_t channels = 0;
    int reduction = 4;
};

template <class T>
RamBlock<T> make_ram(int64_t channels, int reduction = 4) {
    RamBlock<T> b;
    b.channels = channels;
    b.reduction = reduction;
    const int64_t hidden = std::max<int64_t>(1, channels / reduction);
    b.fc1 = make_linear<T>(channels, hidden);
    b.fc2 = make_linear<T>(hidden, channels);
    b.spatial = make_conv2d<T>(2, 1, 3, 3, 1, 1);
    return b;
}

template <class T>
void init_params(RamBlock<T>& b, const Rng& rng) {
    init_params(b.fc1, rng.fork("fc1"));
    init_params(b.fc2, rng.fork("fc2"));
    init_params(b.spatial, rng.fork("spatial"));
}

template <class T, class Fn>
void for_each_param(RamBlock<T>& b, const std::string& prefix, Fn&& fn) {
    fn(prefix + ".fc1.weight", b.fc1.weight);
    fn(prefix + ".fc1.bias", b.fc1.bias);
    fn(prefix + ".fc2.weight", b.fc2.weight);
    fn(prefix + ".fc2.bias", b.fc2.bias);
    fn(prefix + ".spatial.weight", b.spatial.weight);
    fn(prefix + ".spatial.bias", b.spatial.bias);
}

template <class T>
struct RamDetail {
    Tensor<T> s_a;   // N x C x 1 x 1 channel gate
    Tensor<T> x_c;   // channel-weighted features
    Tensor<T> s_b;   // N x 1 x H x W spatial gate
    Tensor<T> out;
};

template <class T>
RamDetail<T> ram_forward_detail(const Tensor<T>& x, const RamBlock<T>& block) {
    if (x.rank() != 4)
        throw ShapeError(msg("ram_forward: input must be N,C,H,W, got ", x.shape().str()));
    if (x.extent(1) != block.channels)
        throw ShapeError(msg("ram_forward: input has ", x.extent(1), " channels, block expects ", block.channels));
    const int64_t n = x.extent(0), c = x.extent(1);

    auto shared_path = [&](const Tensor<T>& pooled) {
        // pooled: N x C x 1 x 1
        Tensor<T> flat = reshape(pooled, Shape{n, c});
        return linear(relu(linear(flat, block.fc1)), block.fc2);
    };

    RamDetail<T> d;
    Tensor<T> f_avg = shared_path(reduce_mean(x, {2, 3}));
    Tensor<T> f_max = shared_path(reduce_max(x, {2, 3}));
    d.s_a = reshape(sigmoid(add(f_avg, f_max)), Shape{n, c, 1, 1});
    d.x_c = mul(x, d.s_a);

    Tensor<T> y_avg = reduce_mean(d.x_c, {1});
    Tensor<T> y_max = reduce_max(d.x_c, {1});
    Tensor<T> y_s = concat({y_avg, y_max}, 1);
    d.s_b = sigmoid(conv2d(y_s, block.spatial));
    d.out = mul(d.x_c, d.s_b);
    return d;
}

template <class T>
Tensor<T> ram_forward(const Tensor<T>& x, const RamBlock<T>& block) {
    return ram_forward_detail(x, block).out;
}

// ---------------------------------------------------------------------------
// semantic attention
// ---------------------------------------------------------------------------

template <class T>
struct SamBlock {
    Conv2d<T> query;   // C -> C1, 1x1
    Conv2d<T> key;     // C -> C1, 1x1
    Conv2d<T> value;   // C -> C, 1x1
    Conv2d<T> fusion;  // C -> C, 1x1
    int64_t channels = 0;
    int reduction = 8;
};

template <class T>
SamBlock<T> make_sam(int64_t channels, int reduction = 8) {
    SamBlock<T> b;
    b.channels = channels;
    b.reduction = reduction;
    const int64_t c1 = std::max<int64_t>(1, channels / reduction);
    b.query = make_conv2d<T>(channels, c1, 1, 1, 0, 0);
    b.key = make_conv2d<T>(channels, c1, 1, 1, 0, 0);
    b.value = make_conv2d<T>(channels, channels, 1, 1, 0, 0);
    b.fusion = make_conv2d<T>(channels, channels, 1, 1, 0, 0);
    return b;
}

template <class T>
void init_params(SamBlock<T>& b, const Rng& rng) {
    init_params(b.query, rng.fork("query"));
    init_params(b.key, rng.fork("key"));
    init_params(b.value, rng.fork("value"));
    init_params(b.fusion, rng.fork("fusion"));
}

template <class T, class Fn>
void for_each_param(SamBlock<T>& b, const std::string& prefix, Fn&& fn) {
    fn(prefix + ".query.weight", b.query.weight);
    fn(prefix + ".query.bias", b.query.bias);
    fn(prefix + ".key.weight", b.key.weight);
    fn(prefix + ".key.bias", b.key.bias);
    fn(prefix + ".value.weight", b.value.weight);
    fn(prefix + ".value.bias", b.value.bias);
    fn(prefix + ".fusion.weight", b.fusion.weight);
    fn(prefix + ".fusion.bias", b.fusion.bias);
}

template <class T>
struct SsaDetail {
    Tensor<T> attn;  // HW x HW per item, columns sum to 1 (batch concatenated on axis 0)
    Tensor<T> out;
};

// Spatial self-attention in residual mode. The attention matrix is
// normalized over source positions, so every output position receives a
// convex combination of value features; zero value weights make the block an
// exact identity.
template <class T>
SsaDetail<T> ssa_forward_detail(const Tensor<T>& x, const SamBlock<T>& block) {
    if (x.rank() != 4)
        throw ShapeError(msg("ssa_forward: input must be N,C,H,W, got ", x.shape().str()));
    const int64_t n = x.extent(0), c = x.extent(1), h = x.extent(2), w = x.extent(3);
    const int64_t hw = h * w;
    const int64_t c1 = block.query.out_channels();

    Tensor<T> q = conv2d(x, block.query);
    Tensor<T> k = conv2d(x, block.key);
    Tensor<T> v = conv2d(x, block.value);

    std::vector<Tensor<T>> outs, attns;
    for (int64_t i = 0; i < n; ++i) {
        Tensor<T> x1 = transpose2d(reshape(batch_slice(q, i), Shape{c1, hw}));  // HW x C1
        Tensor<T> x2 = reshape(batch_slice(k, i), Shape{c1, hw});               // C1 x HW
        Tensor<T> ws = softmax(matmul(x1, x2), 0);                              // HW x HW, columns sum to 1
        Tensor<T> x3 = reshape(batch_slice(v, i), Shape{c, hw});                // C x HW
        Tensor<T> mixed = reshape(matmul(x3, ws), Shape{1, c, h, w});
        outs.push_back(add(batch_slice(x, i), mixed));
        attns.push_back(ws);
    }
    SsaDetail<T> d;
    d.out = n == 1 ? outs[0] : concat(std::span<const Tensor<T>>(outs.data(), outs.size()), 0);
    d.attn = n == 1 ? attns[0] : concat(std::span<const Tensor<T>>(attns.data(), attns.size()), 0);
    return d;
}

template <class T>
Tensor<T> ssa_forward(const Tensor<T>& x, const SamBlock<T>& block) {
    return ssa_forward_detail(x, block).out;
}

template <class T>
struct CsaDetail {
    Tensor<T> attn;  // C x C per item, rows sum to 1 (batch concatenated on axis 0)
    Tensor<T> out;
};

// Channel self-attention in residual mode; parameter-free. Rows of the C x C
// attention matrix are softmax-normalized, each output channel mixes a
// convex combination of input channels.
template <class T>
CsaDetail<T> csa_forward_detail(const Tensor<T>& x) {
    if (x.rank() != 4)
        throw ShapeError(msg("csa_forward: input must be N,C,H,W, got ", x.shape().str()));
    const int64_t n = x.extent(0), c = x.extent(1), h = x.extent(2), w = x.extent(3);
    const int64_t hw = h * w;

    std::vector<Tensor<T>> outs, attns;
    for (int64_t i = 0; i < n; ++i) {
        Tensor<T> item = batch_slice(x, i);
        Tensor<T> x4 = reshape(item, Shape{c, hw});
        Tensor<T> x5 = transpose2d(x4);
        Tensor<T> wc = softmax(matmul(x4, x5), 1);  // C x C, rows sum to 1
        Tensor<T> mixed = reshape(matmul(wc, x4), Shape{1, c, h, w});
        outs.push_back(add(item, mixed));
        attns.push_back(wc);
    }
    CsaDetail<T> d;
    d.out = n == 1 ? outs[0] : concat(std::span<const Tensor<T>>(outs.data(), outs.size()), 0);
    d.attn = n == 1 ? attns[0] : concat(std::span<const Tensor<T>>(attns.data(), attns.size()), 0);
    return d;
}

template <class T>
Tensor<T> csa_forward(const Tensor<T>& x) {
    return csa_forward_detail(x).out;
}

// SSA and CSA run in parallel on the same input; branch sum goes through the
// 1x1 fusion convolution.
template <class T>
Tensor<T> sam_forward(const Tensor<T>& x, const SamBlock<T>& block) {
    return conv2d(add(ssa_forward(x, block), csa_forward(x)), block.fusion);
}

}  // namespace saccn
