#pragma once

// Counting metrics: MAE, MSE (root of the mean squared count error) and
// GAME. GAME at level L partitions each map into a 2^L x 2^L grid (cell
// boundaries at floor(i*H/2^L), so partitions nest and no pixel is dropped)
// and sums per-cell absolute count errors; a literal mode with 2^L column
// bands is available for comparison.

#include <atomic>
#include <cmath>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "saccn/data.hpp"
#include "saccn/train.hpp"

namespace saccn {

inline double count(const DensityMap& d) { return d.sum(); }

struct Metrics {
    double mae = 0.0;
    double mse = 0.0;
};

inline Metrics compute_metrics(const std::vector<double>& pred_counts, const std::vector<double>& gt_counts) {
    if (pred_counts.empty() || pred_counts.size() != gt_counts.size())
        throw Error(msg("compute_metrics: need equal-length nonempty lists, got ", pred_counts.size(),
                        " and ", gt_counts.size()));
    double abs_sum = 0.0, sq_sum = 0.0;
    for (size_t i = 0; i < pred_counts.size(); ++i) {
        const double e = std::abs(pred_counts[i] - gt_counts[i]);
        abs_sum += e;
        sq_sum += e * e;
    }
    const double n = static_cast<double>(pred_counts.size());
    return Metrics{abs_sum / n, std::sqrt(sq_sum / n)};
}

// Per-image GAME term: sum over grid cells of |pred cell count - gt cell count|.
inline double game_single(const DensityMap& pred, const DensityMap& gt, int level, bool literal_partition = false) {
    if (pred.height != gt.height || pred.width != gt.width)
        throw ShapeError(msg("game: map shapes ", pred.height, "x", pred.width, " vs ", gt.height, "x",
                             gt.width));
    if (level < 0 || level > 3) throw Error(msg("game: level ", level, " outside 0..3"));

    const int64_t bands = int64_t(1) << level;
    const int64_t row_bands = literal_partition ? 1 : bands;
    const int64_t col_bands = bands;

    auto edge = [](int64_t i, int64_t extent, int64_t parts) { return i * extent / parts; };

    double total = 0.0;
    for (int64_t br = 0; br < row_bands; ++br)
        for (int64_t bc = 0; bc < col_bands; ++bc) {
            double p = 0.0, g = 0.0;
            const int64_t y0 = edge(br, pred.height, row_bands), y1 = edge(br + 1, pred.height, row_bands);
            const int64_t x0 = edge(bc, pred.width, col_bands), x1 = edge(bc + 1, pred.width, col_bands);
            for (int64_t y = y0; y < y1; ++y)
                for (int64_t x = x0; x < x1; ++x) {
                    p += pred.at(y, x);
                    g += gt.at(y, x);
                }
            total += std::abs(p - g);
        }
    return total;
}

inline double game(const std::vector<DensityMap>& preds, const std::vector<DensityMap>& gts, int level,
                   bool literal_partition = false) {
    if (preds.empty() || preds.size() != gts.size())
        throw Error("game: need equal-length nonempty lists of maps");
    double total = 0.0;
    for (size_t i = 0; i < preds.size(); ++i) total += game_single(preds[i], gts[i], level, literal_partition);
    return total / static_cast<double>(preds.size());
}

// ---------------------------------------------------------------------------
// evaluation over a dataset
// ---------------------------------------------------------------------------

struct PerImageCounts {
    std::string id;
    double predicted = 0.0;
    double ground_truth = 0.0;
};

struct EvalReport {
    int64_t n_images = 0;
    double mae = 0.0;
    double mse = 0.0;
    std::array<double, 4> game{0.0, 0.0, 0.0, 0.0};
    std::string game_partition = "grid";  // "grid" (2^L x 2^L) or "literal" (2^L columns)
    std::vector<PerImageCounts> per_image;
};

struct EvalConfig {
    double sigma = 4.0;
    int jobs = 1;
    bool literal_game = false;
    bool strict_order = false;  // forces sequential evaluation
    bool oracle_gt = false;     // evaluate the ground truth against itself
};

template <class T>
DensityMap tensor_to_density(const Tensor<T>& t) {
    if (t.rank() != 4 || t.extent(0) != 1 || t.extent(1) != 1)
        throw ShapeError(msg("tensor_to_density: expected 1x1xHxW, got ", t.shape().str()));
    DensityMap d;
    d.height = t.extent(2);
    d.width = t.extent(3);
    d.values.reserve(static_cast<size_t>(d.height * d.width));
    for (T v : t.data()) d.values.push_back(static_cast<double>(v));
    return d;
}

// Per-image work fans out across threads (each image is its own tape unit);
// results land in an index-ordered vector and every reduction runs over that
// order, so the report does not depend on the thread count.
template <class T>
EvalReport evaluate(SaccnModel<T>* model, const std::vector<Scene>& scenes, const EvalConfig& cfg) {
    if (scenes.empty()) throw Error("evaluate: dataset is empty");
    if (!cfg.oracle_gt && model == nullptr) throw Error("evaluate: no model and oracle mode off");

    const size_t n = scenes.size();
    std::vector<DensityMap> preds(n), gts(n);

    auto eval_one = [&](size_t i) {
        const Scene& s = scenes[i];
        gts[i] = gt_density(s.points, s.height, s.width, cfg.sigma);
        if (cfg.oracle_gt) {
            preds[i] = gts[i];
        } else {
            Tensor<T> x = scene_to_tensor<T>(s);
            preds[i] = tensor_to_density(forward(*model, x));
        }
    };

    const int jobs = cfg.strict_order ? 1 : std::max(1, cfg.jobs);
    if (jobs == 1) {
        for (size_t i = 0; i < n; ++i) eval_one(i);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> workers;
        std::vector<std::exception_ptr> errors(static_cast<size_t>(jobs));
        for (int t = 0; t < jobs; ++t)
            workers.emplace_back([&, t] {
                try {
                    for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) eval_one(i);
                } catch (...) {
                    errors[static_cast<size_t>(t)] = std::current_exception();
                }
            });
        for (auto& w : workers) w.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    EvalReport rep;
    rep.n_images = static_cast<int64_t>(n);
    rep.game_partition = cfg.literal_game ? "literal" : "grid";
    std::vector<double> pc, gc;
    for (size_t i = 0; i < n; ++i) {
        // the report's gt count is the density-map mass, so GAME level 0 and
        // MAE are the same sum over the same partitions
        rep.per_image.push_back(PerImageCounts{scenes[i].id, preds[i].sum(), gts[i].sum()});
        pc.push_back(rep.per_image.back().predicted);
        gc.push_back(rep.per_image.back().ground_truth);
    }
    const Metrics m = compute_metrics(pc, gc);
    rep.mae = m.mae;
    rep.mse = m.mse;
    for (int level = 0; level <= 3; ++level)
        rep.game[static_cast<size_t>(level)] = game(preds, gts, level, cfg.literal_game);
    return rep;
}

inline nlohmann::ordered_json report_to_json(const EvalReport& r) {
    nlohmann::ordered_json j;
    j["n_images"] = r.n_images;
    j["mae"] = r.mae;
    j["mse"] = r.mse;
    j["game"] = {r.game[0], r.game[1], r.game[2], r.game[3]};
    j["game_partition"] = r.game_partition;
    auto imgs = nlohmann::ordered_json::array();
    for (const auto& p : r.per_image) {
        nlohmann::ordered_json e;
        e["id"] = p.id;
        e["predicted"] = p.predicted;
        e["ground_truth"] = p.ground_truth;
        imgs.push_back(e);
    }
    j["per_image"] = imgs;
    return j;
}

}  // namespace saccn
