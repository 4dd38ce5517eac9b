#pragma once

// The full gradient-check suite: every differentiable op plus the composite
// blocks (RAM, SSA, CSA, SAM, AMM) and the whole network on a 32x32 input.
// Always runs in 64-bit precision. Inputs are seeded and kept away from
// relu/max tie points so the central differences are meaningful.

#include <string>
#include <vector>

#include "saccn/gradcheck.hpp"
#include "saccn/model.hpp"

namespace saccn {

struct SuiteEntry {
    std::string name;
    GradCheckReport report;
};

namespace detail {

inline Tensor<double> random_tensor(const Shape& s, const Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor<double> t(s);
    auto d = t.data();
    for (int64_t i = 0; i < t.numel(); ++i) d[static_cast<size_t>(i)] = rng.uniform(static_cast<uint64_t>(i), lo, hi);
    return t;
}

}  // namespace detail

// Runs every check; `quick` skips the whole-network entry. Entries are
// appended in a fixed order so two runs produce identical lists.
inline std::vector<SuiteEntry> run_gradient_suite(uint64_t seed = 7, double eps = 1e-5, bool quick = false) {
    using detail::random_tensor;
    std::vector<SuiteEntry> out;
    const Rng rng(seed);
    auto check = [&](const std::string& name, auto&& fn, const Tensor<double>& x0) {
        out.push_back(SuiteEntry{name, grad_check(fn, x0, eps)});
    };

    // --- elementwise ---
    {
        Tensor<double> b = random_tensor(Shape{1, 3, 1, 1}, rng.fork("add.b"));
        check("add.broadcast", [b](const Tensor<double>& x) { return sum_all(add(x, b)); },
              random_tensor(Shape{2, 3, 4, 4}, rng.fork("add.x")));
        check("mul.broadcast", [b](const Tensor<double>& x) { return sum_all(mul(x, b)); },
              random_tensor(Shape{2, 3, 4, 4}, rng.fork("mul.x")));
        check("mul.gate", [](const Tensor<double>& x) {
                  Tensor<double> g = reduce_mean(x, {2, 3});
                  return sum_all(mul(x, g));
              },
              random_tensor(Shape{1, 3, 4, 4}, rng.fork("gate.x")));
        check("mul.scalar", [](const Tensor<double>& x) { return sum_all(mul(x, 0.7)); },
              random_tensor(Shape{2, 5}, rng.fork("sc.x")));
    }

    // --- matmul / softmax / activations ---
    {
        Tensor<double> b = random_tensor(Shape{4, 3}, rng.fork("mm.b"));
        check("matmul.lhs", [b](const Tensor<double>& x) { return sum_all(mul(matmul(x, b), matmul(x, b))); },
              random_tensor(Shape{2, 4}, rng.fork("mm.x")));
        Tensor<double> a = random_tensor(Shape{3, 4}, rng.fork("mm.a"));
        check("matmul.rhs", [a](const Tensor<double>& x) { return sum_all(mul(matmul(a, x), matmul(a, x))); },
              random_tensor(Shape{4, 2}, rng.fork("mm.y")));
        Tensor<double> w = random_tensor(Shape{2, 3, 5}, rng.fork("sm.w"));
        check("softmax.axis1", [w](const Tensor<double>& x) { return sum_all(mul(softmax(x, 1), w)); },
              random_tensor(Shape{2, 3, 5}, rng.fork("sm.x"), -2.0, 2.0));
        check("sigmoid", [](const Tensor<double>& x) { return sum_all(sigmoid(x)); },
              random_tensor(Shape{3, 7}, rng.fork("sig.x"), -3.0, 3.0));
        // keep relu inputs away from the kink
        Tensor<double> rx = random_tensor(Shape{3, 7}, rng.fork("relu.x"));
        for (auto& v : rx.data())
            if (std::abs(v) < 0.05) v += v < 0 ? -0.1 : 0.1;
        check("relu", [](const Tensor<double>& x) { return sum_all(mul(relu(x), relu(x))); }, rx);
    }

    // --- reductions and shape ops ---
    {
        check("reduce.sum", [](const Tensor<double>& x) { return sum_all(mul(reduce_sum(x, {2, 3}), 0.5)); },
              random_tensor(Shape{2, 3, 4, 4}, rng.fork("rs.x")));
        check("reduce.mean", [](const Tensor<double>& x) {
                  Tensor<double> m = reduce_mean(x, {1});
                  return sum_all(mul(m, m));
              },
              random_tensor(Shape{2, 3, 4, 4}, rng.fork("rm.x")));
        check("reduce.max", [](const Tensor<double>& x) { return sum_all(reduce_max(x, {2, 3})); },
              random_tensor(Shape{1, 3, 4, 4}, rng.fork("rx.x")));
        check("reshape.transpose", [](const Tensor<double>& x) {
                  Tensor<double> m = transpose2d(reshape(x, Shape{4, 6}));
                  return sum_all(mul(m, m));
              },
              random_tensor(Shape{2, 3, 2, 2}, rng.fork("rt.x")));
        Tensor<double> side = random_tensor(Shape{1, 2, 3, 3}, rng.fork("cc.side"));
        check("concat.axis1", [side](const Tensor<double>& x) {
                  Tensor<double> c = concat({x, side}, 1);
                  return sum_all(mul(c, c));
              },
              random_tensor(Shape{1, 3, 3, 3}, rng.fork("cc.x")));
        check("batch_slice", [](const Tensor<double>& x) {
                  Tensor<double> s = batch_slice(x, 1);
                  return sum_all(mul(s, s));
              },
              random_tensor(Shape{3, 2, 2, 2}, rng.fork("bs.x")));
    }

    // --- layers ---
    {
        Conv2d<double> conv = make_conv2d<double>(3, 2, 3, 3, 1, 1);
        init_params(conv, rng.fork("conv.w"));
        check("conv2d.input", [conv](const Tensor<double>& x) {
                  Tensor<double> y = conv2d(x, conv);
                  return sum_all(mul(y, y));
              },
              random_tensor(Shape{2, 3, 5, 5}, rng.fork("conv.x")));
        Tensor<double> cx = random_tensor(Shape{1, 2, 5, 5}, rng.fork("convw.x"));
        Conv2d<double> dil = make_conv2d<double>(2, 2, 1, 3, 0, 2, true, 1, 2);
        init_params(dil, rng.fork("dil.w"));
        check("conv2d.weight_dilated", [cx, dil](const Tensor<double>& w) {
                  Conv2d<double> l = dil;
                  l.weight = w;
                  Tensor<double> y = conv2d(cx, l);
                  return sum_all(mul(y, y));
              },
              dil.weight.clone());
        check("pool.max", [](const Tensor<double>& x) { return sum_all(pool2d(Pool::Max, x, 2, 2, 2, 2)); },
              random_tensor(Shape{1, 2, 4, 4}, rng.fork("pm.x")));
        check("pool.avg", [](const Tensor<double>& x) {
                  Tensor<double> y = pool2d(Pool::Avg, x, 2, 2, 2, 2);
                  return sum_all(mul(y, y));
              },
              random_tensor(Shape{1, 2, 4, 4}, rng.fork("pa.x")));
        Linear<double> lin = make_linear<double>(4, 3);
        init_params(lin, rng.fork("lin.w"));
        check("linear", [lin](const Tensor<double>& x) {
                  Tensor<double> y = linear(x, lin);
                  return sum_all(mul(y, y));
              },
              random_tensor(Shape{2, 4}, rng.fork("lin.x")));
        check("upsample2x", [](const Tensor<double>& x) {
                  Tensor<double> y = upsample2x(x);
                  return sum_all(mul(y, y));
              },
              random_tensor(Shape{1, 2, 3, 3}, rng.fork("up.x")));
    }

    // --- blocks ---
    {
        RamBlock<double> ram = make_ram<double>(4, 4);
        init_params(ram, Rng(seed).fork("suite.ram"));
        check("block.ram", [&ram](const Tensor<double>& x) {
                  Tensor<double> y = ram_forward(x, ram);
                  return sum_all(mul(y, y));
              },
              random_tensor(Shape{1, 4, 6, 6}, rng.fork("ram.x"), 0.1, 1.0));

        SamBlock<double> sam = make_sam<double>(4, 2);
        init_params(sam, Rng(seed).fork("suite.sam"));
        check("block.ssa", [&sam](const Tensor<double>& x) {
                  Tensor<double> y = ssa_forward(x, sam);
                  return sum_all(mul(y, y));
              },
              random_tensor(Shape{1, 4, 5, 5}, rng.fork("ssa.x")));
        check("block.csa", [](const Tensor<double>& x) {
                  Tensor<double> y = csa_forward(x);
                  return sum_all(mul(y, y));
              },
              random_tensor(Shape{1, 4, 5, 5}, rng.fork("csa.x")));
        check("block.sam", [&sam](const Tensor<double>& x) {
                  Tensor<double> y = sam_forward(x, sam);
                  return sum_all(mul(y, y));
              },
              random_tensor(Shape{1, 4, 5, 5}, rng.fork("sam.x")));

        AmmBlock<double> amm = make_amm<double>(3, 2);
        init_params(amm, Rng(seed).fork("suite.amm"));
        check("block.amm", [&amm](const Tensor<double>& x) {
                  Tensor<double> y = amm_forward(x, amm);
                  return sum_all(mul(y, y));
              },
              random_tensor(Shape{1, 3, 6, 6}, rng.fork("amm.x")));
    }

    // --- full network on a 32x32 input ---
    if (!quick) {
        NetConfig cfg;
        cfg.base_width = 4;
        cfg.input_channels = 1;
        cfg.seed = seed;
        SaccnModel<double> model = build<double>(cfg);
        check("network.32x32", [&model](const Tensor<double>& x) { return sum_all(forward(model, x)); },
              random_tensor(Shape{1, 1, 32, 32}, rng.fork("net.x"), 0.0, 1.0));
    }

    return out;
}

inline const SuiteEntry& worst_entry(const std::vector<SuiteEntry>& suite) {
    size_t worst = 0;
    for (size_t i = 1; i < suite.size(); ++i)
        if (suite[i].report.max_rel_err > suite[worst].report.max_rel_err) worst = i;
    return suite[worst];
}

}  // namespace saccn
