#pragma once

// Dense N,C,H,W tensors with reverse-mode differentiation on an explicit
// tape. A tape and the tensors attached to it form a single-owner unit:
// graph construction and backward are single-threaded per tape, independent
// tapes may run concurrently.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "saccn/common.hpp"

namespace saccn {

template <class T>
class Tape;

template <class T>
class Tensor {
  public:
    Tensor() = default;

    explicit Tensor(const Shape& shape)
        : shape_(shape), data_(std::make_shared<std::vector<T>>(static_cast<size_t>(shape.numel()), T(0))) {}

    static Tensor full(const Shape& shape, T value) {
        Tensor t(shape);
        std::fill(t.data_->begin(), t.data_->end(), value);
        return t;
    }

    static Tensor from(const Shape& shape, std::vector<T> values) {
        if (static_cast<int64_t>(values.size()) != shape.numel())
            throw ShapeError(msg("tensor data size ", values.size(), " does not match shape ", shape.str()));
        Tensor t;
        t.shape_ = shape;
        t.data_ = std::make_shared<std::vector<T>>(std::move(values));
        return t;
    }

    bool empty() const { return !data_; }
    const Shape& shape() const { return shape_; }
    int rank() const { return shape_.rank(); }
    int64_t extent(int axis) const { return shape_.extent(axis); }
    int64_t numel() const { return data_ ? static_cast<int64_t>(data_->size()) : 0; }

    std::span<const T> data() const { return {data_->data(), data_->size()}; }
    std::span<T> data() { return {data_->data(), data_->size()}; }

    T scalar() const {
        if (numel() != 1) throw ShapeError(msg("scalar() on tensor of shape ", shape_.str()));
        return (*data_)[0];
    }

    // Deep copy, not attached to any tape.
    Tensor clone() const {
        Tensor t;
        t.shape_ = shape_;
        if (data_) t.data_ = std::make_shared<std::vector<T>>(*data_);
        return t;
    }

    // Same buffer, no tape reference. Backward closures capture these so the
    // tape never owns a handle back to itself.
    Tensor detached() const {
        Tensor t;
        t.shape_ = shape_;
        t.data_ = data_;
        return t;
    }

    bool on_tape() const { return tape_ != nullptr && node_ >= 0; }
    bool requires_grad() const { return on_tape(); }
    int node_id() const { return on_tape() ? node_ : -1; }
    const std::shared_ptr<Tape<T>>& tape() const { return tape_; }

    bool all_finite() const {
        for (T v : *data_)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    // Buffer-sharing view with different extents (row-major order preserved).
    Tensor view_as(const Shape& shape) const {
        if (shape.numel() != numel())
            throw ShapeError(msg("view_as: ", shape_.str(), " -> ", shape.str(), " changes element count"));
        Tensor t;
        t.shape_ = shape;
        t.data_ = data_;
        return t;
    }

  private:
    Shape shape_{};
    std::shared_ptr<std::vector<T>> data_;
    std::shared_ptr<Tape<T>> tape_;
    int node_ = -1;

    friend class Tape<T>;
};

// Recorded computation: ordered list of steps in topological order (inputs
// always precede their consumers). Backward replays the list once, in
// reverse. Node gradients of one backward call are computed into a
// pass-local buffer and folded into the persistent buffers afterwards, so a
// repeated call with accumulate=true adds one full gradient of its loss.
template <class T>
class Tape : public std::enable_shared_from_this<Tape<T>> {
  public:
    static std::shared_ptr<Tape<T>> make(uint64_t rng_seed = 0) {
        return std::shared_ptr<Tape<T>>(new Tape<T>(rng_seed));
    }

    uint64_t seed() const { return seed_; }
    size_t num_nodes() const { return nodes_.size(); }
    size_t num_steps() const { return steps_.size(); }

    // Registers t as a leaf with gradient tracking.
    void attach(Tensor<T>& t) {
        if (t.empty()) throw Error("attach: empty tensor");
        t.tape_ = this->shared_from_this();
        t.node_ = add_node(t.numel());
    }

    Tensor<T> variable(Tensor<T> t) {
        attach(t);
        return t;
    }

    void backward(const Tensor<T>& loss, bool accumulate = false) {
        if (loss.tape_.get() != this || loss.node_ < 0)
            throw Error("backward: loss is not attached to this tape");
        if (loss.numel() != 1)
            throw ShapeError(msg("backward: loss must be scalar, got shape ", loss.shape().str()));
        if (backward_done_ && !accumulate)
            throw Error("backward: already called on this tape (pass accumulate=true to add another pass)");

        pass_.assign(nodes_.size(), {});
        pass_[static_cast<size_t>(loss.node_)].assign(1, T(1));
        for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) {
            if (pass_[static_cast<size_t>(it->output)].empty()) continue;  // branch never fed the loss
            it->fn(*this);
        }
        for (size_t n = 0; n < nodes_.size(); ++n) {
            if (pass_[n].empty()) continue;
            auto& dst = nodes_[n].grad;
            if (dst.empty()) {
                dst = std::move(pass_[n]);
            } else {
                for (size_t i = 0; i < dst.size(); ++i) dst[i] += pass_[n][i];
            }
        }
        pass_.clear();
        backward_done_ = true;
    }

    // Accumulated gradient w.r.t. t; zeros if no backward pass depended on t.
    Tensor<T> grad(const Tensor<T>& t) const {
        if (t.tape_.get() != this || t.node_ < 0)
            throw Error("grad: tensor is not attached to this tape");
        const auto& g = nodes_[static_cast<size_t>(t.node_)].grad;
        Tensor<T> out(t.shape());
        if (!g.empty()) std::copy(g.begin(), g.end(), out.data().begin());
        return out;
    }

    bool backward_done() const { return backward_done_; }

    // --- recording interface, used by the op library ---

    int add_node(int64_t numel) {
        nodes_.push_back(Node{numel, {}});
        return static_cast<int>(nodes_.size()) - 1;
    }

    void record(int output, std::function<void(Tape&)> fn) {
        steps_.push_back(Step{output, std::move(fn)});
    }

    void bind_output(Tensor<T>& t, int node) {
        t.tape_ = this->shared_from_this();
        t.node_ = node;
    }

    // Gradient of `node` within the running backward pass; empty if nothing
    // has flowed into it.
    const std::vector<T>& pass_grad(int node) const { return pass_[static_cast<size_t>(node)]; }

    // Mutable pass gradient buffer, allocated with zeros on first touch.
    std::vector<T>& pass_grad_buffer(int node) {
        auto& g = pass_[static_cast<size_t>(node)];
        if (g.empty()) g.assign(static_cast<size_t>(nodes_[static_cast<size_t>(node)].numel), T(0));
        return g;
    }

  private:
    explicit Tape(uint64_t seed) : seed_(seed) {}

    struct Node {
        int64_t numel;
        std::vector<T> grad;
    };
    struct Step {
        int output;
        std::function<void(Tape&)> fn;
    };

    uint64_t seed_;
    std::vector<Node> nodes_;
    std::vector<Step> steps_;
    std::vector<std::vector<T>> pass_;
    bool backward_done_ = false;
};

namespace detail {

template <class T>
std::shared_ptr<Tape<T>> common_tape(std::initializer_list<const Tensor<T>*> ts) {
    std::shared_ptr<Tape<T>> tape;
    for (const Tensor<T>* t : ts) {
        if (!t->on_tape()) continue;
        if (!tape)
            tape = t->tape();
        else if (tape != t->tape())
            throw Error("operands belong to different tapes");
    }
    return tape;
}

// b broadcasts onto a: equal rank, every axis extent equal or 1 on b's side.
template <class T>
void check_broadcast(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
    bool ok = a.rank() == b.rank();
    if (ok) {
        for (int i = 0; i < a.rank(); ++i)
            if (b.extent(i) != a.extent(i) && b.extent(i) != 1) ok = false;
    }
    if (!ok)
        throw ShapeError(msg(op, ": shapes ", a.shape().str(), " vs ", b.shape().str(), " not broadcastable"));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise add / mul (tensor-tensor with broadcast, tensor-scalar)
// ---------------------------------------------------------------------------

template <class T, class Fwd, class Bwd>
Tensor<T> binary_broadcast_op(const char* name, const Tensor<T>& a, const Tensor<T>& b, Fwd fwd, Bwd bwd) {
    detail::check_broadcast(name, a, b);
    const auto ea = a.shape().padded();
    const auto eb = b.shape().padded();
    const auto sa = detail::row_major_strides(ea);
    const auto sb = detail::broadcast_strides(eb);

    Tensor<T> out(a.shape());
    {
        const T* pa = a.data().data();
        const T* pb = b.data().data();
        T* po = out.data().data();
        for (int64_t i0 = 0; i0 < ea[0]; ++i0)
            for (int64_t i1 = 0; i1 < ea[1]; ++i1)
                for (int64_t i2 = 0; i2 < ea[2]; ++i2) {
                    const int64_t base_a = i0 * sa[0] + i1 * sa[1] + i2 * sa[2];
                    const int64_t base_b = i0 * sb[0] + i1 * sb[1] + i2 * sb[2];
                    for (int64_t i3 = 0; i3 < ea[3]; ++i3)
                        po[base_a + i3] = fwd(pa[base_a + i3], pb[base_b + i3 * sb[3]]);
                }
    }

    auto tape = detail::common_tape<T>({&a, &b});
    if (tape) {
        const int na = a.node_id(), nb = b.node_id();
        const int no = tape->add_node(out.numel());
        Tensor<T> ad = a.detached(), bd = b.detached();
        tape->record(no, [=](Tape<T>& tp) {
            const auto& g = tp.pass_grad(no);
            std::vector<T>* ga = na >= 0 ? &tp.pass_grad_buffer(na) : nullptr;
            std::vector<T>* gb = nb >= 0 ? &tp.pass_grad_buffer(nb) : nullptr;
            const T* pa = ad.data().data();
            const T* pb = bd.data().data();
            for (int64_t i0 = 0; i0 < ea[0]; ++i0)
                for (int64_t i1 = 0; i1 < ea[1]; ++i1)
                    for (int64_t i2 = 0; i2 < ea[2]; ++i2) {
                        const int64_t base_a = i0 * sa[0] + i1 * sa[1] + i2 * sa[2];
                        const int64_t base_b = i0 * sb[0] + i1 * sb[1] + i2 * sb[2];
                        for (int64_t i3 = 0; i3 < ea[3]; ++i3) {
                            const int64_t ia = base_a + i3;
                            const int64_t ib = base_b + i3 * sb[3];
                            T da, db;
                            bwd(pa[ia], pb[ib], g[static_cast<size_t>(ia)], da, db);
                            if (ga) (*ga)[static_cast<size_t>(ia)] += da;
                            if (gb) (*gb)[static_cast<size_t>(ib)] += db;
                        }
                    }
        });
        tape->bind_output(out, no);
    }
    return out;
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    return binary_broadcast_op<T>(
        "add", a, b, [](T x, T y) { return x + y; },
        [](T, T, T g, T& da, T& db) {
            da = g;
            db = g;
        });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    return binary_broadcast_op<T>(
        "mul", a, b, [](T x, T y) { return x * y; },
        [](T x, T y, T g, T& da, T& db) {
            da = g * y;
            db = g * x;
        });
}

template <class T, class Fwd, class Bwd>
Tensor<T> unary_op(const Tensor<T>& a, Fwd fwd, Bwd bwd) {
    Tensor<T> out(a.shape());
    const T* pa = a.data().data();
    T* po = out.data().data();
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) po[i] = fwd(pa[i]);

    if (a.on_tape()) {
        auto tape = a.tape();
        const int na = a.node_id();
        const int no = tape->add_node(n);
        Tensor<T> ad = a.detached(), od = out.detached();
        tape->record(no, [=](Tape<T>& tp) {
            const auto& g = tp.pass_grad(no);
            auto& ga = tp.pass_grad_buffer(na);
            const T* px = ad.data().data();
            const T* py = od.data().data();
            for (int64_t i = 0; i < n; ++i)
                ga[static_cast<size_t>(i)] += bwd(px[i], py[i], g[static_cast<size_t>(i)]);
        });
        tape->bind_output(out, no);
    }
    return out;
}

template <class T>
Tensor<T> add(const Tensor<T>& a, T s) {
    return unary_op(a, [s](T x) { return x + s; }, [](T, T, T g) { return g; });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, T s) {
    return unary_op(a, [s](T x) { return x * s; }, [s](T, T, T g) { return g * s; });
}

template <class T>
Tensor<T> neg(const Tensor<T>& a) {
    return mul(a, T(-1));
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    return add(a, neg(b));
}

// ---------------------------------------------------------------------------
// activations
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> relu(const Tensor<T>& a) {
    return unary_op(
        a, [](T x) { return x > T(0) ? x : T(0); },
        [](T x, T, T g) { return x > T(0) ? g : T(0); });
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& a) {
    return unary_op(
        a,
        [](T x) {
            if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
            const T e = std::exp(x);
            return e / (T(1) + e);
        },
        [](T, T y, T g) { return g * y * (T(1) - y); });
}

// ---------------------------------------------------------------------------
// matmul (rank-2 only)
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw ShapeError(msg("matmul: expected matrices, got ", a.shape().str(), " and ", b.shape().str()));
    const int64_t m = a.extent(0), k = a.extent(1), k2 = b.extent(0), n = b.extent(1);
    if (k != k2)
        throw ShapeError(msg("matmul: inner extents differ, ", a.shape().str(), " vs ", b.shape().str()));

    Tensor<T> out(Shape{m, n});
    {
        const T* pa = a.data().data();
        const T* pb = b.data().data();
        T* po = out.data().data();
        for (int64_t i = 0; i < m; ++i)
            for (int64_t p = 0; p < k; ++p) {
                const T av = pa[i * k + p];
                const T* brow = pb + p * n;
                T* orow = po + i * n;
                for (int64_t j = 0; j < n; ++j) orow[j] += av * brow[j];
            }
    }

    auto tape = detail::common_tape<T>({&a, &b});
    if (tape) {
        const int na = a.node_id(), nb = b.node_id();
        const int no = tape->add_node(out.numel());
        Tensor<T> ad = a.detached(), bd = b.detached();
        tape->record(no, [=](Tape<T>& tp) {
            const auto& g = tp.pass_grad(no);
            const T* pa = ad.data().data();
            const T* pb = bd.data().data();
            if (na >= 0) {  // dA = dC * B^T
                auto& ga = tp.pass_grad_buffer(na);
                for (int64_t i = 0; i < m; ++i)
                    for (int64_t p = 0; p < k; ++p) {
                        T acc = T(0);
                        const T* grow = g.data() + i * n;
                        const T* brow = pb + p * n;
                        for (int64_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                        ga[static_cast<size_t>(i * k + p)] += acc;
                    }
            }
            if (nb >= 0) {  // dB = A^T * dC
                auto& gb = tp.pass_grad_buffer(nb);
                for (int64_t p = 0; p < k; ++p)
                    for (int64_t i = 0; i < m; ++i) {
                        const T av = pa[i * k + p];
                        const T* grow = g.data() + i * n;
                        T* brow = gb.data() + p * n;
                        for (int64_t j = 0; j < n; ++j) brow[j] += av * grow[j];
                    }
            }
        });
        tape->bind_output(out, no);
    }
    return out;
}

// ---------------------------------------------------------------------------
// softmax along one axis, max-subtracted for stability
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> softmax(const Tensor<T>& a, int axis) {
    if (axis < 0 || axis >= a.rank())
        throw ShapeError(msg("softmax: axis ", axis, " invalid for shape ", a.shape().str()));
    const auto ext = a.shape().padded();
    const auto str = detail::row_major_strides(ext);
    const int64_t len = ext[static_cast<size_t>(axis)];
    const int64_t stride = str[static_cast<size_t>(axis)];

    Tensor<T> out(a.shape());
    const T* pa = a.data().data();
    T* po = out.data().data();

    // iterate every index with the softmax axis pinned at 0; value captures so
    // the backward closure can reuse it after this frame is gone
    auto for_each_slice = [ext, str, axis](auto&& body) {
        std::array<int64_t, 4> e = ext;
        e[static_cast<size_t>(axis)] = 1;
        for (int64_t i0 = 0; i0 < e[0]; ++i0)
            for (int64_t i1 = 0; i1 < e[1]; ++i1)
                for (int64_t i2 = 0; i2 < e[2]; ++i2)
                    for (int64_t i3 = 0; i3 < e[3]; ++i3)
                        body(i0 * str[0] + i1 * str[1] + i2 * str[2] + i3 * str[3]);
    };

    for_each_slice([&](int64_t base) {
        T mx = pa[base];
        for (int64_t j = 1; j < len; ++j) mx = std::max(mx, pa[base + j * stride]);
        T sum = T(0);
        for (int64_t j = 0; j < len; ++j) {
            const T e = std::exp(pa[base + j * stride] - mx);
            po[base + j * stride] = e;
            sum += e;
        }
        for (int64_t j = 0; j < len; ++j) po[base + j * stride] /= sum;
    });

    if (a.on_tape()) {
        auto tape = a.tape();
        const int na = a.node_id();
        const int no = tape->add_node(out.numel());
        Tensor<T> od = out.detached();
        tape->record(no, [=](Tape<T>& tp) {
            const auto& g = tp.pass_grad(no);
            auto& ga = tp.pass_grad_buffer(na);
            const T* py = od.data().data();
            for_each_slice([&](int64_t base) {
                T dot = T(0);
                for (int64_t j = 0; j < len; ++j) {
                    const int64_t i = base + j * stride;
                    dot += g[static_cast<size_t>(i)] * py[i];
                }
                for (int64_t j = 0; j < len; ++j) {
                    const int64_t i = base + j * stride;
                    ga[static_cast<size_t>(i)] += py[i] * (g[static_cast<size_t>(i)] - dot);
                }
            });
        });
        tape->bind_output(out, no);
    }
    return out;
}

// ---------------------------------------------------------------------------
// reductions (mean / sum / max over an axis set, reduced extents kept as 1)
// ---------------------------------------------------------------------------

enum class Reduce { Sum, Mean, Max };

template <class T>
Tensor<T> reduce(Reduce kind, const Tensor<T>& a, std::span<const int> axes) {
    if (axes.empty()) throw ShapeError("reduce: empty axis set");
    uint32_t mask = 0;
    for (int ax : axes) {
        if (ax < 0 || ax >= a.rank())
            throw ShapeError(msg("reduce: axis ", ax, " invalid for shape ", a.shape().str()));
        if (mask & (1u << ax)) throw ShapeError(msg("reduce: duplicate axis ", ax));
        mask |= 1u << ax;
    }

    const auto ein = a.shape().padded();
    std::array<int64_t, 4> eout = ein;
    int64_t count = 1;
    for (int i = 0; i < a.rank(); ++i)
        if (mask & (1u << i)) {
            count *= ein[static_cast<size_t>(i)];
            eout[static_cast<size_t>(i)] = 1;
        }

    Shape out_shape = [&] {
        switch (a.rank()) {
            case 1: return Shape{eout[0]};
            case 2: return Shape{eout[0], eout[1]};
            case 3: return Shape{eout[0], eout[1], eout[2]};
            default: return Shape{eout[0], eout[1], eout[2], eout[3]};
        }
    }();

    const auto sin = detail::row_major_strides(ein);
    const auto sout = detail::broadcast_strides(eout);

    Tensor<T> out = kind == Reduce::Max
                        ? Tensor<T>::full(out_shape, -std::numeric_limits<T>::infinity())
                        : Tensor<T>(out_shape);
    std::vector<int64_t> argmax;
    if (kind == Reduce::Max) argmax.assign(static_cast<size_t>(out.numel()), -1);

    {
        const T* pa = a.data().data();
        T* po = out.data().data();
        for (int64_t i0 = 0; i0 < ein[0]; ++i0)
            for (int64_t i1 = 0; i1 < ein[1]; ++i1)
                for (int64_t i2 = 0; i2 < ein[2]; ++i2)
                    for (int64_t i3 = 0; i3 < ein[3]; ++i3) {
                        const int64_t ia = i0 * sin[0] + i1 * sin[1] + i2 * sin[2] + i3 * sin[3];
                        const int64_t io = i0 * sout[0] + i1 * sout[1] + i2 * sout[2] + i3 * sout[3];
                        if (kind == Reduce::Max) {
                            // strict > keeps the first maximizer in scan order
                            if (pa[ia] > po[io]) {
                                po[io] = pa[ia];
                                argmax[static_cast<size_t>(io)] = ia;
                            }
                        } else {
                            po[io] += pa[ia];
                        }
                    }
        if (kind == Reduce::Mean) {
            const T inv = T(1) / static_cast<T>(count);
            for (T& v : out.data()) v *= inv;
        }
    }

    if (a.on_tape()) {
        auto tape = a.tape();
        const int na = a.node_id();
        const int no = tape->add_node(out.numel());
        auto am = std::make_shared<std::vector<int64_t>>(std::move(argmax));
        tape->record(no, [=](Tape<T>& tp) {
            const auto& g = tp.pass_grad(no);
            auto& ga = tp.pass_grad_buffer(na);
            if (kind == Reduce::Max) {
                for (size_t io = 0; io < g.size(); ++io)
                    ga[static_cast<size_t>((*am)[io])] += g[io];
                return;
            }
            const T scale = kind == Reduce::Mean ? T(1) / static_cast<T>(count) : T(1);
            for (int64_t i0 = 0; i0 < ein[0]; ++i0)
                for (int64_t i1 = 0; i1 < ein[1]; ++i1)
                    for (int64_t i2 = 0; i2 < ein[2]; ++i2)
                        for (int64_t i3 = 0; i3 < ein[3]; ++i3) {
                            const int64_t ia = i0 * sin[0] + i1 * sin[1] + i2 * sin[2] + i3 * sin[3];
                            const int64_t io = i0 * sout[0] + i1 * sout[1] + i2 * sout[2] + i3 * sout[3];
                            ga[static_cast<size_t>(ia)] += g[static_cast<size_t>(io)] * scale;
                        }
        });
        tape->bind_output(out, no);
    }
    return out;
}

template <class T>
Tensor<T> reduce(Reduce kind, const Tensor<T>& a, std::initializer_list<int> axes) {
    return reduce(kind, a, std::span<const int>(axes.begin(), axes.size()));
}

template <class T>
Tensor<T> reduce_sum(const Tensor<T>& a, std::initializer_list<int> axes) {
    return reduce(Reduce::Sum, a, axes);
}
template <class T>
Tensor<T> reduce_mean(const Tensor<T>& a, std::initializer_list<int> axes) {
    return reduce(Reduce::Mean, a, axes);
}
template <class T>
Tensor<T> reduce_max(const Tensor<T>& a, std::initializer_list<int> axes) {
    return reduce(Reduce::Max, a, axes);
}

// Sum over every axis; result keeps the rank with all extents 1.
template <class T>
Tensor<T> sum_all(const Tensor<T>& a) {
    std::vector<int> axes(static_cast<size_t>(a.rank()));
    for (int i = 0; i < a.rank(); ++i) axes[static_cast<size_t>(i)] = i;
    return reduce(Reduce::Sum, a, std::span<const int>(axes.data(), axes.size()));
}

// ---------------------------------------------------------------------------
// shape ops: reshape (no-copy view), transpose2d, concat, batch_slice
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> reshape(const Tensor<T>& a, const Shape& shape) {
    if (shape.numel() != a.numel())
        throw ShapeError(msg("reshape: ", a.shape().str(), " has ", a.numel(), " elements, target ",
                             shape.str(), " has ", shape.numel()));
    Tensor<T> out = a.view_as(shape);

    if (a.on_tape()) {
        auto tape = a.tape();
        const int na = a.node_id();
        const int no = tape->add_node(a.numel());
        tape->record(no, [=](Tape<T>& tp) {
            const auto& g = tp.pass_grad(no);
            auto& ga = tp.pass_grad_buffer(na);
            for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        });
        tape->bind_output(out, no);
    }
    return out;
}

template <class T>
Tensor<T> transpose2d(const Tensor<T>& a) {
    if (a.rank() != 2) throw ShapeError(msg("transpose2d: expected a matrix, got ", a.shape().str()));
    const int64_t m = a.extent(0), n = a.extent(1);
    Tensor<T> out(Shape{n, m});
    const T* pa = a.data().data();
    T* po = out.data().data();
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) po[j * m + i] = pa[i * n + j];

    if (a.on_tape()) {
        auto tape = a.tape();
        const int na = a.node_id();
        const int no = tape->add_node(out.numel());
        tape->record(no, [=](Tape<T>& tp) {
            const auto& g = tp.pass_grad(no);
            auto& ga = tp.pass_grad_buffer(na);
            for (int64_t j = 0; j < n; ++j)
                for (int64_t i = 0; i < m; ++i) ga[static_cast<size_t>(i * n + j)] += g[static_cast<size_t>(j * m + i)];
        });
        tape->bind_output(out, no);
    }
    return out;
}

template <class T>
Tensor<T> concat(std::span<const Tensor<T>> parts, int axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    const int rank = parts[0].rank();
    if (axis < 0 || axis >= rank)
        throw ShapeError(msg("concat: axis ", axis, " invalid for rank ", rank));
    int64_t axis_total = 0;
    for (const auto& p : parts) {
        if (p.rank() != rank) throw ShapeError("concat: inputs differ in rank");
        for (int i = 0; i < rank; ++i)
            if (i != axis && p.extent(i) != parts[0].extent(i))
                throw ShapeError(msg("concat: ragged inputs, ", p.shape().str(), " vs ", parts[0].shape().str(),
                                     " on axis ", i));
        axis_total += p.extent(axis);
    }

    auto eout = parts[0].shape().padded();
    eout[static_cast<size_t>(axis)] = axis_total;
    Shape out_shape = [&] {
        switch (rank) {
            case 1: return Shape{eout[0]};
            case 2: return Shape{eout[0], eout[1]};
            case 3: return Shape{eout[0], eout[1], eout[2]};
            default: return Shape{eout[0], eout[1], eout[2], eout[3]};
        }
    }();
    Tensor<T> out(out_shape);
    const auto sout = detail::row_major_strides(eout);

    int64_t offset = 0;
    std::vector<int64_t> offsets;
    for (const auto& p : parts) {
        offsets.push_back(offset);
        const auto ein = p.shape().padded();
        const auto sin = detail::row_major_strides(ein);
        const T* pi = p.data().data();
        T* po = out.data().data();
        for (int64_t i0 = 0; i0 < ein[0]; ++i0)
            for (int64_t i1 = 0; i1 < ein[1]; ++i1)
                for (int64_t i2 = 0; i2 < ein[2]; ++i2)
                    for (int64_t i3 = 0; i3 < ein[3]; ++i3) {
                        std::array<int64_t, 4> idx{i0, i1, i2, i3};
                        idx[static_cast<size_t>(axis)] += offset;
                        po[idx[0] * sout[0] + idx[1] * sout[1] + idx[2] * sout[2] + idx[3] * sout[3]] =
                            pi[i0 * sin[0] + i1 * sin[1] + i2 * sin[2] + i3 * sin[3]];
                    }
        offset += p.extent(axis);
    }

    std::shared_ptr<Tape<T>> tape;
    for (const auto& p : parts) {
        if (!p.on_tape()) continue;
        if (!tape)
            tape = p.tape();
        else if (tape != p.tape())
            throw Error("concat: operands belong to different tapes");
    }
    if (tape) {
        const int no = tape->add_node(out.numel());
        struct PartRef {
            int node;
            std::array<int64_t, 4> ext;
            int64_t offset;
        };
        std::vector<PartRef> refs;
        for (size_t i = 0; i < parts.size(); ++i)
            refs.push_back(PartRef{parts[i].node_id(), parts[i].shape().padded(), offsets[i]});
        tape->record(no, [=](Tape<T>& tp) {
            const auto& g = tp.pass_grad(no);
            for (const auto& r : refs) {
                if (r.node < 0) continue;
                auto& gp = tp.pass_grad_buffer(r.node);
                const auto sin = detail::row_major_strides(r.ext);
                for (int64_t i0 = 0; i0 < r.ext[0]; ++i0)
                    for (int64_t i1 = 0; i1 < r.ext[1]; ++i1)
                        for (int64_t i2 = 0; i2 < r.ext[2]; ++i2)
                            for (int64_t i3 = 0; i3 < r.ext[3]; ++i3) {
                                std::array<int64_t, 4> idx{i0, i1, i2, i3};
                                idx[static_cast<size_t>(axis)] += r.offset;
                                gp[static_cast<size_t>(i0 * sin[0] + i1 * sin[1] + i2 * sin[2] + i3 * sin[3])] +=
                                    g[static_cast<size_t>(idx[0] * sout[0] + idx[1] * sout[1] + idx[2] * sout[2] +
                                                          idx[3] * sout[3])];
                            }
            }
        });
        tape->bind_output(out, no);
    }
    return out;
}

template <class T>
Tensor<T> concat(std::initializer_list<Tensor<T>> parts, int axis) {
    std::vector<Tensor<T>> v(parts);
    return concat(std::span<const Tensor<T>>(v.data(), v.size()), axis);
}

// Extracts item n along axis 0 (keeping a leading extent of 1); the slice is
// contiguous so this is a block copy.
template <class T>
Tensor<T> batch_slice(const Tensor<T>& a, int64_t n) {
    if (n < 0 || n >= a.extent(0))
        throw ShapeError(msg("batch_slice: index ", n, " out of range for shape ", a.shape().str()));
    auto e = a.shape().padded();
    const int64_t item = a.numel() / a.extent(0);
    Shape out_shape = [&] {
        switch (a.rank()) {
            case 1: return Shape{1};
            case 2: return Shape{1, e[1]};
            case 3: return Shape{1, e[1], e[2]};
            default: return Shape{1, e[1], e[2], e[3]};
        }
    }();
    Tensor<T> out(out_shape);
    std::copy_n(a.data().data() + n * item, item, out.data().data());

    if (a.on_tape()) {
        auto tape = a.tape();
        const int na = a.node_id();
        const int no = tape->add_node(item);
        tape->record(no, [=](Tape<T>& tp) {
            const auto& g = tp.pass_grad(no);
            auto& ga = tp.pass_grad_buffer(na);
            for (int64_t i = 0; i < item; ++i) ga[static_cast<size_t>(n * item + i)] += g[static_cast<size_t>(i)];
        });
        tape->bind_output(out, no);
    }
    return out;
}

}  // namespace saccn
