#pragma once

// Loss, Adam optimizer and the training loop. Training is bit-deterministic
// given (config, seed): batch sampling and augmentation draw from
// counter-based streams keyed by the step index, so a run resumed from a
// checkpoint replays exactly the steps an uninterrupted run would take.

#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "saccn/data.hpp"
#include "saccn/model.hpp"

namespace saccn {

// Mean over all pixels and batch entries of (pred - gt)^2.
template <class T>
Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& gt) {
    if (pred.shape() != gt.shape())
        throw ShapeError(msg("mse_loss: shapes ", pred.shape().str(), " vs ", gt.shape().str()));
    Tensor<T> diff = sub(pred, gt);
    return sum_all(mul(mul(diff, diff), T(1) / static_cast<T>(pred.numel())));
}

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <class T>
struct AdamState {
    AdamConfig cfg;
    int64_t t = 0;
    std::vector<std::vector<T>> m, v;  // aligned with the parameter list
};

template <class T>
AdamState<T> make_adam(const std::vector<ParamRef<T>>& params, const AdamConfig& cfg = {}) {
    AdamState<T> s;
    s.cfg = cfg;
    for (const auto& p : params) {
        s.m.emplace_back(static_cast<size_t>(p.tensor->numel()), T(0));
        s.v.emplace_back(static_cast<size_t>(p.tensor->numel()), T(0));
    }
    return s;
}

// Standard bias-corrected update: p <- p - lr * m_hat / (sqrt(v_hat) + eps).
template <class T>
void adam_step(const std::vector<ParamRef<T>>& params, const std::vector<Tensor<T>>& grads, AdamState<T>& s) {
    if (params.size() != grads.size() || params.size() != s.m.size())
        throw Error(msg("adam_step: ", params.size(), " params vs ", grads.size(), " grads vs ",
                        s.m.size(), " moment buffers"));
    s.t += 1;
    const T b1 = static_cast<T>(s.cfg.beta1), b2 = static_cast<T>(s.cfg.beta2);
    const T corr1 = T(1) - static_cast<T>(std::pow(s.cfg.beta1, static_cast<double>(s.t)));
    const T corr2 = T(1) - static_cast<T>(std::pow(s.cfg.beta2, static_cast<double>(s.t)));
    const T lr = static_cast<T>(s.cfg.lr), eps = static_cast<T>(s.cfg.eps);

    for (size_t i = 0; i < params.size(); ++i) {
        if (grads[i].empty())
            throw Error(msg("adam_step: missing gradient for parameter '", params[i].name, "'"));
        if (grads[i].numel() != params[i].tensor->numel())
            throw ShapeError(msg("adam_step: gradient shape mismatch for '", params[i].name, "'"));
        auto p = params[i].tensor->data();
        auto g = grads[i].data();
        auto& m = s.m[i];
        auto& v = s.v[i];
        for (size_t j = 0; j < m.size(); ++j) {
            m[j] = b1 * m[j] + (T(1) - b1) * g[j];
            v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
            const T mh = m[j] / corr1;
            const T vh = v[j] / corr2;
            p[j] -= lr * mh / (std::sqrt(vh) + eps);
        }
    }
}

// ---------------------------------------------------------------------------
// training loop
// ---------------------------------------------------------------------------

struct TrainConfig {
    int64_t steps = 300;
    int64_t batch_size = 4;
    int64_t crop = 64;
    double flip_p = 0.5;
    double sigma = 4.0;
    AdamConfig adam;
    uint64_t seed = 0;
    int64_t log_every = 10;
};

struct TrainResult {
    std::vector<std::pair<int64_t, double>> loss_curve;  // (step, loss)
    double initial_loss = 0.0;
    double final_loss = 0.0;
    int64_t steps_run = 0;
};

template <class T>
Tensor<T> scene_to_tensor(const Scene& s) {
    Tensor<T> t(Shape{1, s.channels, s.height, s.width});
    auto d = t.data();
    for (int64_t c = 0; c < s.channels; ++c)
        for (int64_t y = 0; y < s.height; ++y)
            for (int64_t x = 0; x < s.width; ++x)
                d[static_cast<size_t>((c * s.height + y) * s.width + x)] =
                    static_cast<T>(s.at(y, x, c));
    return t;
}

template <class T>
Tensor<T> density_to_tensor(const DensityMap& d) {
    Tensor<T> t(Shape{1, 1, d.height, d.width});
    auto out = t.data();
    for (size_t i = 0; i < d.values.size(); ++i) out[i] = static_cast<T>(d.values[i]);
    return t;
}

// Runs steps [start_step, start_step + cfg.steps). Aborts with NumericError
// if the loss goes non-finite; no silent clipping.
template <class T>
TrainResult train(SaccnModel<T>& model, const std::vector<Scene>& scenes, const TrainConfig& cfg,
                  AdamState<T>& opt, int64_t start_step = 0,
                  const std::function<void(int64_t, double)>& on_log = {}) {
    if (scenes.empty()) throw Error("train: dataset is empty");
    for (const auto& s : scenes)
        if (s.channels != model.cfg.input_channels)
            throw Error(msg("train: scene '", s.id, "' has ", s.channels, " channels, model expects ",
                            model.cfg.input_channels));

    const Rng batch_rng = Rng(cfg.seed).fork("batch");
    const Rng aug_rng = Rng(cfg.seed).fork("augment");
    auto params = params_of(model);

    TrainResult res;
    for (int64_t step = start_step; step < start_step + cfg.steps; ++step) {
        std::vector<Tensor<T>> images, targets;
        for (int64_t b = 0; b < cfg.batch_size; ++b) {
            const uint64_t draw = static_cast<uint64_t>(step * cfg.batch_size + b);
            const auto& scene = scenes[static_cast<size_t>(batch_rng.word(draw) % static_cast<uint64_t>(scenes.size()))];
            Scene patch = augment(scene, cfg.crop, cfg.crop, cfg.flip_p, aug_rng.fork(draw));
            images.push_back(scene_to_tensor<T>(patch));
            targets.push_back(density_to_tensor<T>(gt_density(patch.points, patch.height, patch.width, cfg.sigma)));
        }
        Tensor<T> x = images.size() == 1 ? images[0] : concat(std::span<const Tensor<T>>(images.data(), images.size()), 0);
        Tensor<T> y = targets.size() == 1 ? targets[0] : concat(std::span<const Tensor<T>>(targets.data(), targets.size()), 0);

        auto tape = Tape<T>::make(cfg.seed);
        bind_params(model, tape);
        Tensor<T> loss = mse_loss(forward(model, x), y);
        const double loss_val = static_cast<double>(loss.scalar());
        if (!std::isfinite(loss_val))
            throw NumericError(msg("train: loss diverged to ", loss_val, " at step ", step));

        tape->backward(loss);
        std::vector<Tensor<T>> grads;
        grads.reserve(params.size());
        for (const auto& p : params) grads.push_back(tape->grad(*p.tensor));
        adam_step(params, grads, opt);

        if (step == start_step) res.initial_loss = loss_val;
        res.final_loss = loss_val;
        res.steps_run += 1;
        if (step % cfg.log_every == 0 || step == start_step + cfg.steps - 1) {
            res.loss_curve.emplace_back(step, loss_val);
            if (on_log) on_log(step, loss_val);
        }
    }
    return res;
}

// Checkpoint helpers carrying optimizer state: moments are stored as extra
// tensors named opt.m.<param> / opt.v.<param>, the step count in the config
// block. f32 on disk, so an f32 resume is bit-exact.
template <class T>
void save_training_checkpoint(SaccnModel<T>& model, const std::string& path, const AdamState<T>& opt,
                              int64_t next_step) {
    auto params = params_of(model);
    std::vector<std::pair<std::string, Tensor<T>>> extra;
    for (size_t i = 0; i < params.size(); ++i) {
        const Shape& s = params[i].tensor->shape();
        extra.emplace_back("opt.m." + params[i].name, Tensor<T>::from(s, std::vector<T>(opt.m[i])));
        extra.emplace_back("opt.v." + params[i].name, Tensor<T>::from(s, std::vector<T>(opt.v[i])));
    }
    std::vector<std::pair<std::string, std::string>> extra_cfg;
    extra_cfg.emplace_back("opt", "adam");
    extra_cfg.emplace_back("opt_step", std::to_string(opt.t));
    extra_cfg.emplace_back("next_step", std::to_string(next_step));
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", opt.cfg.lr);
    extra_cfg.emplace_back("opt_lr", buf);
    std::snprintf(buf, sizeof(buf), "%.17g", opt.cfg.beta1);
    extra_cfg.emplace_back("opt_beta1", buf);
    std::snprintf(buf, sizeof(buf), "%.17g", opt.cfg.beta2);
    extra_cfg.emplace_back("opt_beta2", buf);
    std::snprintf(buf, sizeof(buf), "%.17g", opt.cfg.eps);
    extra_cfg.emplace_back("opt_eps", buf);
    save_checkpoint(model, path, extra_cfg, extra);
}

template <class T>
struct ResumeState {
    SaccnModel<T> model;
    AdamState<T> opt;
    int64_t next_step = 0;
    bool has_opt = false;
};

template <class T>
ResumeState<T> load_training_checkpoint(const std::string& path) {
    LoadedCheckpoint<T> lc = load_checkpoint<T>(path);
    ResumeState<T> rs;
    rs.model = std::move(lc.model);

    auto params = params_of(rs.model);
    rs.opt = make_adam(params);
    if (lc.file.has_config("opt")) {
        rs.has_opt = true;
        rs.opt.cfg.lr = std::stod(lc.file.config_value("opt_lr"));
        rs.opt.cfg.beta1 = std::stod(lc.file.config_value("opt_beta1"));
        rs.opt.cfg.beta2 = std::stod(lc.file.config_value("opt_beta2"));
        rs.opt.cfg.eps = std::stod(lc.file.config_value("opt_eps"));
        rs.opt.t = std::stoll(lc.file.config_value("opt_step"));
        rs.next_step = std::stoll(lc.file.config_value("next_step"));
        for (size_t i = 0; i < params.size(); ++i) {
            auto mi = lc.extra_tensors.find("opt.m." + params[i].name);
            auto vi = lc.extra_tensors.find("opt.v." + params[i].name);
            if (mi == lc.extra_tensors.end() || vi == lc.extra_tensors.end())
                throw DataError(msg("checkpoint ", path, ": missing optimizer state for '", params[i].name, "'"));
            auto md = mi->second.data();
            auto vd = vi->second.data();
            rs.opt.m[i].assign(md.begin(), md.end());
            rs.opt.v[i].assign(vd.begin(), vd.end());
        }
    }
    return rs;
}

inline void write_loss_csv(const std::string& path, const std::vector<std::pair<int64_t, double>>& curve) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError(msg("cannot open '", path, "' for writing"));
    os << "step,loss\n";
    char buf[80];
    for (const auto& [step, loss] : curve) {
        std::snprintf(buf, sizeof(buf), "%lld,%.9e\n", static_cast<long long>(step), loss);
        os << buf;
    }
}

}  // namespace saccn
