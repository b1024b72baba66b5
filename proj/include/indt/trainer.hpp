#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "indt/augment.hpp"
#include "indt/core.hpp"
#include "indt/detector/anchors.hpp"
#include "indt/detector/boxes.hpp"
#include "indt/detector/loss.hpp"
#include "indt/detector/network.hpp"
#include "indt/random.hpp"

namespace indt {

enum class SplitMode { Source, Crop };

struct SplitResult {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Train/test partition. In Source mode whole source groups are shuffled and
/// assigned to train until the train fraction reaches `ratio` (at least one
/// group always lands in test). Crop mode shuffles individual items and puts
/// round(ratio * n) of them in train. Both index lists come back sorted.
inline SplitResult split_dataset(std::span<const std::string> source_ids, double ratio, std::uint64_t seed,
                                 SplitMode mode = SplitMode::Source) {
    require(ratio > 0.0 && ratio < 1.0, "split_dataset: 0 < ratio < 1 violated");
    const std::size_t n = source_ids.size();
    Rng rng(derive_seed(seed, 0x5917));
    SplitResult out;
    if (mode == SplitMode::Crop) {
        require(n >= 2, "split_dataset: need at least 2 items");
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        rng.shuffle(idx);
        auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
        n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
        out.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
        out.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    } else {
        std::vector<std::string> order;
        std::map<std::string, std::vector<std::size_t>> groups;
        for (std::size_t i = 0; i < n; ++i) {
            auto& g = groups[source_ids[i]];
            if (g.empty()) order.push_back(source_ids[i]);
            g.push_back(i);
        }
        require(order.size() >= 2, "split_dataset: fewer than 2 source groups");
        rng.shuffle(order);
        std::size_t k = 0;
        for (; k + 1 < order.size(); ++k) {
            if (static_cast<double>(out.train.size()) >= ratio * static_cast<double>(n) - 1e-9) break;
            const auto& g = groups[order[k]];
            out.train.insert(out.train.end(), g.begin(), g.end());
        }
        for (; k < order.size(); ++k) {
            const auto& g = groups[order[k]];
            out.test.insert(out.test.end(), g.begin(), g.end());
        }
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

inline std::vector<std::string> source_ids_of(std::span<const LabeledImage> items) {
    std::vector<std::string> ids;
    ids.reserve(items.size());
    for (const auto& li : items) ids.push_back(li.source_id);
    return ids;
}

struct TrainConfig {
    int epochs = 30;
    int batch_size = 8;
    double learning_rate = 1e-2;
    double momentum = 0.9;
    std::uint64_t seed = 0;  // shuffling
    double split_ratio = 0.9;
    int eval_every = 0;      // 0 = never
    double pos_thresh = 0.5;
    LossConfig loss{};
    int jobs = 1;

    void validate() const {
        require(epochs >= 0, "TrainConfig: epochs >= 0 violated");
        require(batch_size >= 1, "TrainConfig: batch_size >= 1 violated");
        require(learning_rate >= 0.0 && std::isfinite(learning_rate), "TrainConfig: learning_rate >= 0 violated");
        require(momentum >= 0.0 && momentum < 1.0, "TrainConfig: momentum in [0,1) violated");
        require(split_ratio > 0.0 && split_ratio < 1.0, "TrainConfig: split_ratio in (0,1) violated");
        require(eval_every >= 0, "TrainConfig: eval_every >= 0 violated");
        require(pos_thresh > 0.0 && pos_thresh < 1.0, "TrainConfig: pos_thresh in (0,1) violated");
        require(jobs >= 1, "TrainConfig: jobs >= 1 violated");
    }
};

/// Raised when the loss or a gradient stops being finite.
class TrainingDiverged : public RuntimeError {
public:
    TrainingDiverged(int epoch, std::size_t batch, std::string tensor)
        : RuntimeError("non-finite value at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) +
                       ", tensor '" + tensor + "'"),
          epoch_(epoch), batch_(batch), tensor_(std::move(tensor)) {}
    [[nodiscard]] int epoch() const { return epoch_; }
    [[nodiscard]] std::size_t batch() const { return batch_; }
    [[nodiscard]] const std::string& tensor() const { return tensor_; }

private:
    int epoch_;
    std::size_t batch_;
    std::string tensor_;
};

struct ItemGradient {
    double loss = 0.0;
    Gradients grads;
};

/// Loss and parameter gradients for one labelled image.
inline ItemGradient item_gradient(const LabeledImage& item, const DetectorParams& params, std::span<const BBox> anchors,
                                  const TrainConfig& cfg) {
    ForwardCache cache;
    const Predictions pred = forward(item.image, params, &cache);
    const MatchResult m = match_anchors(item.boxes, anchors, cfg.pos_thresh);
    const LossResult lr = multibox_loss(pred, m, item.boxes, anchors, params.config.variances, cfg.loss);
    ItemGradient g{lr.loss, zero_gradients(params)};
    if (lr.num_pos > 0) backward(params, cache, lr.grad_loc, lr.grad_logits, g.grads);
    return g;
}

struct EpochReport {
    int epoch = 0;  // 1-based
    double mean_loss = 0.0;
};

using EpochCallback = std::function<void(const EpochReport&, const DetectorParams&)>;

struct TrainResult {
    DetectorParams params;
    std::vector<double> epoch_losses;
};

/// Mini-batch SGD with momentum:  v <- mu v + g;  w <- w - lr v.
/// The batch gradient is the mean of per-item gradients summed in item order,
/// so results do not depend on cfg.jobs.
inline TrainResult train(std::span<const LabeledImage> items, std::span<const std::size_t> subset,
                         const ModelConfig& model, const TrainConfig& cfg, std::uint64_t init_seed,
                         const EpochCallback& on_epoch = {}) {
    cfg.validate();
    model.validate();
    require(!subset.empty(), "train: empty training set");
    for (std::size_t i : subset) require(i < items.size(), "train: subset index out of range");

    TrainResult res{init_params(model, init_seed), {}};
    DetectorParams& params = res.params;
    const std::vector<BBox> anchors = build_anchors(model.layout);
    Gradients velocity = zero_gradients(params);
    std::vector<std::size_t> order(subset.begin(), subset.end());
    Rng shuffler(derive_seed(cfg.seed, 0x7EA1));

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        shuffler.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t batch_no = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size), ++batch_no) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const std::size_t bn = end - start;
            std::vector<ItemGradient> per(bn);
            auto work = [&](std::size_t worker, std::size_t n_workers) {
                for (std::size_t j = worker; j < bn; j += n_workers)
                    per[j] = item_gradient(items[order[start + j]], params, anchors, cfg);
            };
            const auto n_workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.jobs), bn);
            if (n_workers <= 1) {
                work(0, 1);
            } else {
                std::vector<std::jthread> pool;
                for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(work, w, n_workers);
                work(0, n_workers);
            }

            Gradients sum = zero_gradients(params);
            for (std::size_t j = 0; j < bn; ++j) {
                if (!std::isfinite(per[j].loss)) throw TrainingDiverged(epoch, batch_no, "loss");
                epoch_loss += per[j].loss;
                for (std::size_t t = 0; t < sum.size(); ++t)
                    for (std::size_t e = 0; e < sum[t].size(); ++e) sum[t][e] += per[j].grads[t][e];
            }
            const double inv = 1.0 / static_cast<double>(bn);
            for (std::size_t t = 0; t < sum.size(); ++t) {
                auto& w = params.tensors[t].data;
                auto& v = velocity[t];
                for (std::size_t e = 0; e < w.size(); ++e) {
                    const double g = sum[t][e] * inv;
                    if (!std::isfinite(g)) throw TrainingDiverged(epoch, batch_no, params.tensors[t].name);
                    v[e] = cfg.momentum * v[e] + g;
                    w[e] -= cfg.learning_rate * v[e];
                    if (!std::isfinite(w[e])) throw TrainingDiverged(epoch, batch_no, params.tensors[t].name);
                }
            }
        }
        const double mean = epoch_loss / static_cast<double>(order.size());
        res.epoch_losses.push_back(mean);
        if (on_epoch) on_epoch(EpochReport{epoch, mean}, params);
    }
    return res;
}

inline TrainResult train(std::span<const LabeledImage> items, const ModelConfig& model, const TrainConfig& cfg,
                         std::uint64_t init_seed, const EpochCallback& on_epoch = {}) {
    std::vector<std::size_t> all(items.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return train(items, all, model, cfg, init_seed, on_epoch);
}

// ---------------------------------------------------------------------------
// Gradient verification

/// Two-block network on a 16x16 input with heads on both maps.
inline ModelConfig gradcheck_model_config() {
    ModelConfig c;
    c.layout.input_size = 16;
    c.layout.scales = {ScaleSpec{8, 0.3, {1.0, 2.0}}, ScaleSpec{4, 0.6, {1.0}}};
    c.stage_channels = {3, 4};
    return c;
}

struct GradCheckOptions {
    double epsilon = 1e-4;
    double tolerance = 1e-4;
    double abs_floor = 1e-6;  // denominators below this are clamped
    bool zero_case = false;   // all-zero image, no ground truth
    std::function<void(Gradients&)> corrupt;  // test hook applied to the analytic gradients
};

struct TensorCheck {
    std::string name;
    double max_rel_error = 0.0;
    double max_abs_grad = 0.0;
};

struct GradCheckReport {
    double loss = 0.0;
    std::vector<TensorCheck> tensors;
    double tolerance = 0.0;
    bool passed = false;
};

struct GradCheckCase {
    DetectorParams params;
    GrayImage image;
    std::vector<BBox> gts;
};

inline GradCheckCase make_gradcheck_case(std::uint64_t params_seed, std::uint64_t case_seed, bool zero_case) {
    const ModelConfig cfg = gradcheck_model_config();
    GradCheckCase c{init_params(cfg, params_seed), GrayImage(16, 16, 0.0), {}};
    Rng prng(derive_seed(params_seed, 0xB1A5));
    for (auto& t : c.params.tensors)
        if (t.dims.size() == 1)
            for (double& v : t.data) v = prng.uniform(-0.1, 0.1);
    if (zero_case) return c;
    Rng rng(derive_seed(case_seed, 0xCA5E));
    for (double& v : c.image.pixels()) v = rng.uniform();
    for (int g = 0; g < 2; ++g) {
        const double w = rng.uniform(3.0, 8.0);
        const double h = rng.uniform(3.0, 8.0);
        const double x = rng.uniform(0.0, 16.0 - w);
        const double y = rng.uniform(0.0, 16.0 - h);
        c.gts.push_back(BBox{x, y, x + w, y + h, 0, {}});
    }
    return c;
}

/// Central finite differences against backprop for every parameter of the
/// two-block configuration. The matching and the mined negative set are
/// computed once at the unperturbed point; both are piecewise constant in the
/// parameters, so the analytic gradient treats them as fixed too.
inline GradCheckReport grad_check(std::uint64_t params_seed, std::uint64_t case_seed, const GradCheckOptions& opt = {}) {
    GradCheckCase c = make_gradcheck_case(params_seed, case_seed, opt.zero_case);
    const auto anchors = build_anchors(c.params.config.layout);
    const MatchResult m = match_anchors(c.gts, anchors, 0.5);
    const Variances var = c.params.config.variances;

    ForwardCache cache;
    const Predictions pred = forward(c.image, c.params, &cache);
    const LossResult base = multibox_loss(pred, m, c.gts, anchors, var);
    Gradients analytic = zero_gradients(c.params);
    if (base.num_pos > 0) backward(c.params, cache, base.grad_loc, base.grad_logits, analytic);
    if (opt.corrupt) opt.corrupt(analytic);

    auto loss_at = [&](const DetectorParams& p) {
        return multibox_loss(forward(c.image, p), m, c.gts, anchors, var, {}, &base.mined_negatives).loss;
    };

    GradCheckReport rep;
    rep.loss = base.loss;
    rep.tolerance = opt.tolerance;
    rep.passed = true;
    DetectorParams probe = c.params;
    for (std::size_t t = 0; t < probe.tensors.size(); ++t) {
        TensorCheck tc{probe.tensors[t].name, 0.0, 0.0};
        for (std::size_t e = 0; e < probe.tensors[t].data.size(); ++e) {
            double& w = probe.tensors[t].data[e];
            const double orig = w;
            w = orig + opt.epsilon;
            const double lp = loss_at(probe);
            w = orig - opt.epsilon;
            const double lm = loss_at(probe);
            w = orig;
            const double numeric = (lp - lm) / (2.0 * opt.epsilon);
            const double a = analytic[t][e];
            const double denom = std::max({std::abs(a), std::abs(numeric), opt.abs_floor});
            tc.max_rel_error = std::max(tc.max_rel_error, std::abs(a - numeric) / denom);
            tc.max_abs_grad = std::max(tc.max_abs_grad, std::abs(a));
        }
        if (!(tc.max_rel_error < opt.tolerance)) rep.passed = false;
        rep.tensors.push_back(tc);
    }
    return rep;
}

}  // namespace indt
