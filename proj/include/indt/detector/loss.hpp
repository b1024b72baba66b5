#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "indt/core.hpp"
#include "indt/detector/boxes.hpp"
#include "indt/detector/network.hpp"

namespace indt {

struct LossConfig {
    double neg_pos_ratio = 3.0;
    double alpha = 1.0;  // localisation weight
};

struct LossResult {
    double loss = 0.0;
    double conf_loss = 0.0;  // already divided by N
    double loc_loss = 0.0;   // already divided by N, before alpha
    std::size_t num_pos = 0;
    std::vector<std::size_t> mined_negatives;  // ascending anchor index
    std::vector<double> grad_loc;              // same layout as Predictions::loc
    std::vector<double> grad_logits;           // same layout as Predictions::logits
};

namespace detail {

inline double log_sum_exp(std::span<const double> z) {
    const double m = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z) s += std::exp(v - m);
    return m + std::log(s);
}

inline double smooth_l1(double d) { return std::abs(d) < 1.0 ? 0.5 * d * d : std::abs(d) - 0.5; }
inline double smooth_l1_grad(double d) { return std::abs(d) < 1.0 ? d : (d > 0.0 ? 1.0 : -1.0); }

}  // namespace detail

/// SSD multibox loss: (softmax cross-entropy over positives and mined
/// negatives + alpha * smooth-L1 over positive offsets) / N, N = #positives.
/// Negatives are ranked by background cross-entropy (descending, lower anchor
/// index first on ties) and the top neg_pos_ratio * N are kept. N = 0 gives a
/// zero loss and zero gradients. `fixed_negatives` overrides the mining step.
inline LossResult multibox_loss(const Predictions& pred, const MatchResult& match, std::span<const BBox> gts,
                                std::span<const BBox> anchors, const Variances& variances, const LossConfig& cfg = {},
                                const std::vector<std::size_t>* fixed_negatives = nullptr) {
    const std::size_t na = pred.n_anchors;
    require(match.anchor_to_gt.size() == na && anchors.size() == na,
            "multibox_loss: match/anchor count must equal prediction count");
    const auto nl = static_cast<std::size_t>(pred.n_logits);
    LossResult r;
    r.grad_loc.assign(na * 4, 0.0);
    r.grad_logits.assign(na * nl, 0.0);
    r.num_pos = match.positive_count();
    if (r.num_pos == 0) return r;
    const double inv_n = 1.0 / static_cast<double>(r.num_pos);

    auto conf_term = [&](std::size_t a, std::size_t target) {
        auto z = pred.logits_of(a);
        const double lse = detail::log_sum_exp(z);
        r.conf_loss += (lse - z[target]) * inv_n;
        for (std::size_t c = 0; c < nl; ++c) {
            const double p = std::exp(z[c] - lse);
            r.grad_logits[a * nl + c] += (p - (c == target ? 1.0 : 0.0)) * inv_n;
        }
    };

    std::vector<std::size_t> negatives;
    for (std::size_t a = 0; a < na; ++a) {
        const int g = match.anchor_to_gt[a];
        if (g == kBackground) {
            negatives.push_back(a);
            continue;
        }
        const BBox& gt = gts[static_cast<std::size_t>(g)];
        require(gt.class_id >= 0 && gt.class_id + 1 < pred.n_logits, "multibox_loss: gt class id out of range");
        conf_term(a, static_cast<std::size_t>(gt.class_id + 1));
        const BoxOffsets t = encode_box(gt, anchors[a], variances);
        for (std::size_t d = 0; d < 4; ++d) {
            const double diff = pred.loc[a * 4 + d] - t[d];
            r.loc_loss += detail::smooth_l1(diff) * inv_n;
            r.grad_loc[a * 4 + d] = cfg.alpha * detail::smooth_l1_grad(diff) * inv_n;
        }
    }

    if (fixed_negatives) {
        r.mined_negatives = *fixed_negatives;
    } else {
        const auto keep = std::min(negatives.size(),
                                   static_cast<std::size_t>(std::floor(cfg.neg_pos_ratio * static_cast<double>(r.num_pos))));
        std::vector<double> bg_loss(na, 0.0);
        for (std::size_t a : negatives) {
            auto z = pred.logits_of(a);
            bg_loss[a] = detail::log_sum_exp(z) - z[0];
        }
        std::partial_sort(negatives.begin(), negatives.begin() + static_cast<std::ptrdiff_t>(keep), negatives.end(),
                          [&](std::size_t a, std::size_t b) {
                              return bg_loss[a] > bg_loss[b] || (bg_loss[a] == bg_loss[b] && a < b);
                          });
        negatives.resize(keep);
        std::sort(negatives.begin(), negatives.end());
        r.mined_negatives = std::move(negatives);
    }
    for (std::size_t a : r.mined_negatives) conf_term(a, 0);

    r.loss = r.conf_loss + cfg.alpha * r.loc_loss;
    return r;
}

}  // namespace indt
