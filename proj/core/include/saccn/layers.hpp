#pragma once

// Neural layers on top of the tensor core: direct 2-D convolution (strided,
// dilated, asymmetric kernels), pooling, fully-connected, nearest-neighbor
// upsampling, He-uniform initialization and parameter counting.

#include <cstdint>
#include <string>
#include <vector>

#include "saccn/rng.hpp"
#include "saccn/tensor.hpp"

namespace saccn {

inline int64_t conv_out_extent(int64_t in, int64_t pad, int64_t dil, int64_t k, int64_t stride) {
    return (in + 2 * pad - dil * (k - 1) - 1) / stride + 1;
}

template <class T>
struct Conv2d {
    Tensor<T> weight;  // C_out x C_in x k_h x k_w
    Tensor<T> bias;    // C_out, empty when the layer has no bias
    int stride_h = 1, stride_w = 1;
    int pad_h = 0, pad_w = 0;
    int dil_h = 1, dil_w = 1;

    int64_t out_channels() const { return weight.extent(0); }
    int64_t in_channels() const { return weight.extent(1); }
    int64_t kh() const { return weight.extent(2); }
    int64_t kw() const { return weight.extent(3); }
    bool has_bias() const { return !bias.empty(); }
};

template <class T>
Conv2d<T> make_conv2d(int64_t c_in, int64_t c_out, int64_t k_h, int64_t k_w, int pad_h, int pad_w,
                      bool bias = true, int dil_h = 1, int dil_w = 1, int stride_h = 1, int stride_w = 1) {
    Conv2d<T> l;
    l.weight = Tensor<T>(Shape{c_out, c_in, k_h, k_w});
    if (bias) l.bias = Tensor<T>(Shape{c_out});
    l.pad_h = pad_h;
    l.pad_w = pad_w;
    l.dil_h = dil_h;
    l.dil_w = dil_w;
    l.stride_h = stride_h;
    l.stride_w = stride_w;
    return l;
}

template <class T>
struct Linear {
    Tensor<T> weight;  // out x in
    Tensor<T> bias;    // out
    int64_t out_features() const { return weight.extent(0); }
    int64_t in_features() const { return weight.extent(1); }
};

template <class T>
Linear<T> make_linear(int64_t in, int64_t out) {
    Linear<T> l;
    l.weight = Tensor<T>(Shape{out, in});
    l.bias = Tensor<T>(Shape{out});
    return l;
}

namespace detail {

// valid output range for one kernel tap: 0 <= o*stride - pad + k*dil < in
inline void tap_range(int64_t in, int64_t out, int64_t pad, int64_t dil, int64_t k, int64_t stride,
                      int64_t& lo, int64_t& hi) {
    const int64_t off = k * dil - pad;
    lo = 0;
    if (off < 0) lo = (-off + stride - 1) / stride;
    hi = out - 1;
    const int64_t max_num = in - 1 - off;
    if (max_num < 0)
        hi = -1;
    else if (max_num / stride < hi)
        hi = max_num / stride;
}

}  // namespace detail

// Cross-correlation with zero padding (no kernel flip), full backward to
// input, weight and bias.
template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Conv2d<T>& layer) {
    if (x.rank() != 4)
        throw ShapeError(msg("conv2d: input must be N,C,H,W, got ", x.shape().str()));
    const int64_t n = x.extent(0), c_in = x.extent(1), h = x.extent(2), w = x.extent(3);
    if (c_in != layer.in_channels())
        throw ShapeError(msg("conv2d: input has ", c_in, " channels, layer expects ", layer.in_channels()));
    const int64_t kh = layer.kh(), kw = layer.kw();
    const int64_t ph = layer.pad_h, pw = layer.pad_w;
    const int64_t dh = layer.dil_h, dw = layer.dil_w;
    const int64_t sh = layer.stride_h, sw = layer.stride_w;
    if (dh * (kh - 1) + 1 > h + 2 * ph || dw * (kw - 1) + 1 > w + 2 * pw)
        throw ShapeError(msg("conv2d: dilated kernel ", kh, "x", kw, " (dilation ", dh, ",", dw,
                             ") exceeds padded input ", x.shape().str()));
    const int64_t oh = conv_out_extent(h, ph, dh, kh, sh);
    const int64_t ow = conv_out_extent(w, pw, dw, kw, sw);
    const int64_t c_out = layer.out_channels();

    Tensor<T> out(Shape{n, c_out, oh, ow});
    {
        const T* px = x.data().data();
        const T* pwt = layer.weight.data().data();
        const T* pb = layer.has_bias() ? layer.bias.data().data() : nullptr;
        T* po = out.data().data();
        for (int64_t in = 0; in < n; ++in)
            for (int64_t co = 0; co < c_out; ++co) {
                T* plane = po + (in * c_out + co) * oh * ow;
                if (pb) {
                    const T b = pb[co];
                    for (int64_t i = 0; i < oh * ow; ++i) plane[i] = b;
                }
                for (int64_t ci = 0; ci < c_in; ++ci)
                    for (int64_t ki = 0; ki < kh; ++ki) {
                        int64_t olo, ohi;
                        detail::tap_range(h, oh, ph, dh, ki, sh, olo, ohi);
                        for (int64_t kj = 0; kj < kw; ++kj) {
                            const T wv = pwt[((co * c_in + ci) * kh + ki) * kw + kj];
                            if (wv == T(0)) continue;
                            int64_t wlo, whi;
                            detail::tap_range(w, ow, pw, dw, kj, sw, wlo, whi);
                            for (int64_t o = olo; o <= ohi; ++o) {
                                const int64_t ih = o * sh - ph + ki * dh;
                                const T* xrow = px + ((in * c_in + ci) * h + ih) * w - pw + kj * dw;
                                T* orow = plane + o * ow;
                                if (sw == 1) {
                                    for (int64_t q = wlo; q <= whi; ++q) orow[q] += wv * xrow[q];
                                } else {
                                    for (int64_t q = wlo; q <= whi; ++q) orow[q] += wv * xrow[q * sw];
                                }
                            }
                        }
                    }
            }
    }

    auto tape = detail::common_tape<T>({&x, &layer.weight, &layer.bias});
    if (tape) {
        const int nx = x.node_id(), nw = layer.weight.node_id(), nb = layer.bias.node_id();
        const int no = tape->add_node(out.numel());
        Tensor<T> xd = x.detached(), wd = layer.weight.detached();
        tape->record(no, [=](Tape<T>& tp) {
            const auto& g = tp.pass_grad(no);
            const T* px = xd.data().data();
            const T* pwt = wd.data().data();
            std::vector<T>* gx = nx >= 0 ? &tp.pass_grad_buffer(nx) : nullptr;
            std::vector<T>* gw = nw >= 0 ? &tp.pass_grad_buffer(nw) : nullptr;
            std::vector<T>* gb = nb >= 0 ? &tp.pass_grad_buffer(nb) : nullptr;
            for (int64_t in = 0; in < n; ++in)
                for (int64_t co = 0; co < c_out; ++co) {
                    const T* gplane = g.data() + (in * c_out + co) * oh * ow;
                    if (gb) {
                        T acc = T(0);
                        for (int64_t i = 0; i < oh * ow; ++i) acc += gplane[i];
                        (*gb)[static_cast<size_t>(co)] += acc;
                    }
                    if (!gx && !gw) continue;
                    for (int64_t ci = 0; ci < c_in; ++ci)
                        for (int64_t ki = 0; ki < kh; ++ki) {
                            int64_t olo, ohi;
                            detail::tap_range(h, oh, ph, dh, ki, sh, olo, ohi);
                            for (int64_t kj = 0; kj < kw; ++kj) {
                                int64_t wlo, whi;
                                detail::tap_range(w, ow, pw, dw, kj, sw, wlo, whi);
                                const int64_t widx = ((co * c_in + ci) * kh + ki) * kw + kj;
                                const T wv = pwt[widx];
                                T wacc = T(0);
                                for (int64_t o = olo; o <= ohi; ++o) {
                                    const int64_t ih = o * sh - ph + ki * dh;
                                    const int64_t xbase = ((in * c_in + ci) * h + ih) * w - pw + kj * dw;
                                    const T* grow = gplane + o * ow;
                                    for (int64_t q = wlo; q <= whi; ++q) {
                                        const int64_t xi = xbase + q * sw;
                                        if (gw) wacc += px[xi] * grow[q];
                                        if (gx) (*gx)[static_cast<size_t>(xi)] += wv * grow[q];
                                    }
                                }
                                if (gw) (*gw)[static_cast<size_t>(widx)] += wacc;
                            }
                        }
                }
        });
        tape->bind_output(out, no);
    }
    return out;
}

// ---------------------------------------------------------------------------
// pooling
// ---------------------------------------------------------------------------

enum class Pool { Max, Avg };

template <class T>
Tensor<T> pool2d(Pool kind, const Tensor<T>& x, int64_t k_h, int64_t k_w, int64_t s_h, int64_t s_w) {
    if (x.rank() != 4)
        throw ShapeError(msg("pool2d: input must be N,C,H,W, got ", x.shape().str()));
    const int64_t n = x.extent(0), c = x.extent(1), h = x.extent(2), w = x.extent(3);
    if (k_h > h || k_w > w)
        throw ShapeError(msg("pool2d: kernel ", k_h, "x", k_w, " larger than input ", x.shape().str()));
    const int64_t oh = (h - k_h) / s_h + 1;
    const int64_t ow = (w - k_w) / s_w + 1;

    Tensor<T> out(Shape{n, c, oh, ow});
    std::vector<int64_t> argmax;
    if (kind == Pool::Max) argmax.assign(static_cast<size_t>(out.numel()), -1);

    {
        const T* px = x.data().data();
        T* po = out.data().data();
        for (int64_t nc = 0; nc < n * c; ++nc) {
            const T* plane = px + nc * h * w;
            for (int64_t o = 0; o < oh; ++o)
                for (int64_t q = 0; q < ow; ++q) {
                    const int64_t oi = (nc * oh + o) * ow + q;
                    if (kind == Pool::Max) {
                        T best = plane[(o * s_h) * w + q * s_w];
                        int64_t besti = (o * s_h) * w + q * s_w;
                        for (int64_t i = 0; i < k_h; ++i)
                            for (int64_t j = 0; j < k_w; ++j) {
                                const int64_t xi = (o * s_h + i) * w + q * s_w + j;
                                if (plane[xi] > best) {  // keeps first maximizer
                                    best = plane[xi];
                                    besti = xi;
                                }
                            }
                        po[oi] = best;
                        argmax[static_cast<size_t>(oi)] = nc * h * w + besti;
                    } else {
                        T acc = T(0);
                        for (int64_t i = 0; i < k_h; ++i)
                            for (int64_t j = 0; j < k_w; ++j)
                                acc += plane[(o * s_h + i) * w + q * s_w + j];
                        po[oi] = acc / static_cast<T>(k_h * k_w);
                    }
                }
        }
    }

    if (x.on_tape()) {
        auto tape = x.tape();
        const int nx = x.node_id();
        const int no = tape->add_node(out.numel());
        auto am = std::make_shared<std::vector<int64_t>>(std::move(argmax));
        tape->record(no, [=](Tape<T>& tp) {
            const auto& g = tp.pass_grad(no);
            auto& gx = tp.pass_grad_buffer(nx);
            if (kind == Pool::Max) {
                for (size_t oi = 0; oi < g.size(); ++oi) gx[static_cast<size_t>((*am)[oi])] += g[oi];
                return;
            }
            const T inv = T(1) / static_cast<T>(k_h * k_w);
            for (int64_t nc = 0; nc < n * c; ++nc)
                for (int64_t o = 0; o < oh; ++o)
                    for (int64_t q = 0; q < ow; ++q) {
                        const T gv = g[static_cast<size_t>((nc * oh + o) * ow + q)] * inv;
                        for (int64_t i = 0; i < k_h; ++i)
                            for (int64_t j = 0; j < k_w; ++j)
                                gx[static_cast<size_t>(nc * h * w + (o * s_h + i) * w + q * s_w + j)] += gv;
                    }
        });
        tape->bind_output(out, no);
    }
    return out;
}

// m-times downsampling: m x m max-pool with stride m.
template <class T>
Tensor<T> downsample(const Tensor<T>& x, int64_t m) {
    return pool2d(Pool::Max, x, m, m, m, m);
}

// ---------------------------------------------------------------------------
// fully-connected: x (N x in) -> x W^T + b
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> linear(const Tensor<T>& x, const Linear<T>& layer) {
    if (x.rank() != 2)
        throw ShapeError(msg("linear: input must be N x in, got ", x.shape().str()));
    if (x.extent(1) != layer.in_features())
        throw ShapeError(msg("linear: input features ", x.extent(1), " != layer in ", layer.in_features()));
    Tensor<T> out = matmul(x, transpose2d(layer.weight));
    return add(out, reshape(layer.bias, Shape{1, layer.out_features()}));
}

// ---------------------------------------------------------------------------
// nearest-neighbor 2x upsampling
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> upsample2x(const Tensor<T>& x) {
    if (x.rank() != 4)
        throw ShapeError(msg("upsample2x: input must be N,C,H,W, got ", x.shape().str()));
    const int64_t n = x.extent(0), c = x.extent(1), h = x.extent(2), w = x.extent(3);
    Tensor<T> out(Shape{n, c, 2 * h, 2 * w});
    {
        const T* px = x.data().data();
        T* po = out.data().data();
        for (int64_t nc = 0; nc < n * c; ++nc)
            for (int64_t i = 0; i < h; ++i) {
                const T* xrow = px + (nc * h + i) * w;
                T* r0 = po + (nc * 2 * h + 2 * i) * 2 * w;
                T* r1 = r0 + 2 * w;
                for (int64_t j = 0; j < w; ++j) {
                    r0[2 * j] = r0[2 * j + 1] = xrow[j];
                    r1[2 * j] = r1[2 * j + 1] = xrow[j];
                }
            }
    }

    if (x.on_tape()) {
        auto tape = x.tape();
        const int nx = x.node_id();
        const int no = tape->add_node(out.numel());
        tape->record(no, [=](Tape<T>& tp) {
            const auto& g = tp.pass_grad(no);
            auto& gx = tp.pass_grad_buffer(nx);
            for (int64_t nc = 0; nc < n * c; ++nc)
                for (int64_t i = 0; i < h; ++i) {
                    const T* r0 = g.data() + (nc * 2 * h + 2 * i) * 2 * w;
                    const T* r1 = r0 + 2 * w;
                    for (int64_t j = 0; j < w; ++j)
                        gx[static_cast<size_t>((nc * h + i) * w + j)] +=
                            r0[2 * j] + r0[2 * j + 1] + r1[2 * j] + r1[2 * j + 1];
                }
        });
        tape->bind_output(out, no);
    }
    return out;
}

// ---------------------------------------------------------------------------
// initialization and parameter counting
// ---------------------------------------------------------------------------

template <class T>
void he_uniform_fill(Tensor<T>& w, int64_t fan_in, const Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    auto d = w.data();
    for (int64_t i = 0; i < w.numel(); ++i)
        d[static_cast<size_t>(i)] = static_cast<T>(rng.uniform(static_cast<uint64_t>(i), -limit, limit));
}

template <class T>
void init_params(Conv2d<T>& l, const Rng& rng) {
    he_uniform_fill(l.weight, l.in_channels() * l.kh() * l.kw(), rng);
    if (l.has_bias()) std::fill(l.bias.data().begin(), l.bias.data().end(), T(0));
}

template <class T>
void init_params(Linear<T>& l, const Rng& rng) {
    he_uniform_fill(l.weight, l.in_features(), rng);
    std::fill(l.bias.data().begin(), l.bias.data().end(), T(0));
}

template <class T>
int64_t param_count(const Conv2d<T>& l) {
    return l.weight.numel() + (l.has_bias() ? l.bias.numel() : 0);
}

template <class T>
int64_t param_count(const Linear<T>& l) {
    return l.weight.numel() + l.bias.numel();
}

}  // namespace saccn
