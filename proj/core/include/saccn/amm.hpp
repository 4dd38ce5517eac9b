#pragma once

// Asymmetric multi-scale module: a 1x1 branch plus two dilated
// asymmetric-pair branches (1x3 + 3x1 and 1x5 + 5x1, dilation 2 along the
// long axis), concatenated and fused by a 1x1 convolution. Paddings keep
// every branch at the input's spatial extent. Branch convolutions carry no
// bias so the asymmetric-vs-square parameter comparison is exact; only the
// fusion has one.

#include <string>

#include "saccn/layers.hpp"

namespace saccn {

template <class T>
struct AmmBlock {
    Conv2d<T> b1;           // C -> C_b, 1x1
    Conv2d<T> b3a, b3b;     // C -> C_b, 1x3 pad (0,2) and 3x1 pad (2,0), dilation 2
    Conv2d<T> b5a, b5b;     // C -> C_b, 1x5 pad (0,4) and 5x1 pad (4,0), dilation 2
    Conv2d<T> fuse;         // 3*C_b -> C_out, 1x1
    int64_t in_channels = 0;
    int64_t branch_channels = 0;
    int64_t out_channels = 0;
};

template <class T>
AmmBlock<T> make_amm(int64_t c_in, int64_t c_out) {
    AmmBlock<T> b;
    b.in_channels = c_in;
    b.branch_channels = c_out;  // fusion preserves the decoder width
    b.out_channels = c_out;
    const int64_t cb = b.branch_channels;
    b.b1 = make_conv2d<T>(c_in, cb, 1, 1, 0, 0, /*bias=*/false);
    b.b3a = make_conv2d<T>(c_in, cb, 1, 3, 0, 2, /*bias=*/false, /*dil_h=*/1, /*dil_w=*/2);
    b.b3b = make_conv2d<T>(c_in, cb, 3, 1, 2, 0, /*bias=*/false, /*dil_h=*/2, /*dil_w=*/1);
    b.b5a = make_conv2d<T>(c_in, cb, 1, 5, 0, 4, /*bias=*/false, /*dil_h=*/1, /*dil_w=*/2);
    b.b5b = make_conv2d<T>(c_in, cb, 5, 1, 4, 0, /*bias=*/false, /*dil_h=*/2, /*dil_w=*/1);
    b.fuse = make_conv2d<T>(3 * cb, c_out, 1, 1, 0, 0);
    return b;
}

template <class T>
void init_params(AmmBlock<T>& b, const Rng& rng) {
    init_params(b.b1, rng.fork("b1"));
    init_params(b.b3a, rng.fork("b3a"));
    init_params(b.b3b, rng.fork("b3b"));
    init_params(b.b5a, rng.fork("b5a"));
    init_params(b.b5b, rng.fork("b5b"));
    init_params(b.fuse, rng.fork("fuse"));
}

template <class T, class Fn>
void for_each_param(AmmBlock<T>& b, const std::string& prefix, Fn&& fn) {
    fn(prefix + ".b1.weight", b.b1.weight);
    fn(prefix + ".b3a.weight", b.b3a.weight);
    fn(prefix + ".b3b.weight", b.b3b.weight);
    fn(prefix + ".b5a.weight", b.b5a.weight);
    fn(prefix + ".b5b.weight", b.b5b.weight);
    fn(prefix + ".fuse.weight", b.fuse.weight);
    fn(prefix + ".fuse.bias", b.fuse.bias);
}

template <class T>
Tensor<T> amm_forward(const Tensor<T>& x, const AmmBlock<T>& block) {
    Tensor<T> p1 = conv2d(x, block.b1);
    Tensor<T> p3 = add(conv2d(x, block.b3a), conv2d(x, block.b3b));
    Tensor<T> p5 = add(conv2d(x, block.b5a), conv2d(x, block.b5b));
    return conv2d(concat({p1, p3, p5}, 1), block.fuse);
}

struct AmmCostReport {
    int64_t params_asymmetric = 0;
    int64_t params_square_equivalent = 0;
    double ratio = 0.0;
};

// Compares the two asymmetric-pair branches against the k x k convolutions
// they stand in for. 2k C C_b vs k^2 C C_b per branch, exact integers.
template <class T>
AmmCostReport amm_cost_report(const AmmBlock<T>& block) {
    AmmCostReport r;
    const int64_t pairs[2][2] = {{param_count(block.b3a), param_count(block.b3b)},
                                 {param_count(block.b5a), param_count(block.b5b)}};
    const int64_t ks[2] = {3, 5};
    for (int i = 0; i < 2; ++i) {
        r.params_asymmetric += pairs[i][0] + pairs[i][1];
        r.params_square_equivalent += ks[i] * ks[i] * block.in_channels * block.branch_channels;
    }
    r.ratio = static_cast<double>(r.params_asymmetric) / static_cast<double>(r.params_square_equivalent);
    return r;
}

}  // namespace saccn
