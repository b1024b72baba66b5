#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "indt/core.hpp"

namespace indt {

struct Variances {
    double center = 0.1;
    double size = 0.2;

    void validate() const { require(center > 0.0 && size > 0.0, "Variances: must be positive"); }
    friend bool operator==(const Variances&, const Variances&) = default;
};

using BoxOffsets = std::array<double, 4>;

/// Centre-size offsets of `gt` relative to `anchor`.
inline BoxOffsets encode_box(const BBox& gt, const BBox& anchor, const Variances& v = {}) {
    const double aw = anchor.width();
    const double ah = anchor.height();
    return {(gt.center_x() - anchor.center_x()) / aw / v.center, (gt.center_y() - anchor.center_y()) / ah / v.center,
            std::log(gt.width() / aw) / v.size, std::log(gt.height() / ah) / v.size};
}

/// Inverse of encode_box.
inline BBox decode_box(std::span<const double, 4> t, const BBox& anchor, const Variances& v = {}) {
    const double aw = anchor.width();
    const double ah = anchor.height();
    const double cx = anchor.center_x() + t[0] * v.center * aw;
    const double cy = anchor.center_y() + t[1] * v.center * ah;
    const double w = aw * std::exp(t[2] * v.size);
    const double h = ah * std::exp(t[3] * v.size);
    return BBox{cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h, 0, {}};
}

inline BBox decode_box(const BoxOffsets& t, const BBox& anchor, const Variances& v = {}) {
    return decode_box(std::span<const double, 4>(t), anchor, v);
}

inline constexpr int kBackground = -1;

struct MatchResult {
    std::vector<int> anchor_to_gt;     // kBackground or gt index, per anchor
    std::vector<int> gt_best_anchor;   // per gt

    [[nodiscard]] std::size_t positive_count() const {
        return static_cast<std::size_t>(
            std::count_if(anchor_to_gt.begin(), anchor_to_gt.end(), [](int g) { return g != kBackground; }));
    }
    friend bool operator==(const MatchResult&, const MatchResult&) = default;
};

/// Two-step SSD matching. Step 1 is a greedy bipartite pass: the (gt, anchor)
/// pair with the highest IoU among unassigned gts and unclaimed anchors is
/// fixed, repeatedly, so every gt owns a distinct anchor. Ties go to the lower
/// anchor index, then the lower gt index. Step 2 gives each remaining anchor
/// to its highest-IoU gt (lowest index on ties) when that IoU >= pos_thresh.
inline MatchResult match_anchors(std::span<const BBox> gts, std::span<const BBox> anchors, double pos_thresh = 0.5) {
    require(pos_thresh > 0.0 && pos_thresh < 1.0, "match_anchors: pos_thresh in (0,1) violated");
    require(!anchors.empty(), "match_anchors: anchors must be non-empty");
    require(gts.size() <= anchors.size(), "match_anchors: more ground-truth boxes than anchors");
    const std::size_t ng = gts.size();
    const std::size_t na = anchors.size();
    MatchResult m;
    m.anchor_to_gt.assign(na, kBackground);
    m.gt_best_anchor.assign(ng, -1);
    if (ng == 0) return m;

    std::vector<double> ov(ng * na);
    for (std::size_t g = 0; g < ng; ++g)
        for (std::size_t a = 0; a < na; ++a) ov[g * na + a] = iou(gts[g], anchors[a]);

    // per-gt best over unclaimed anchors, refreshed only when its anchor is taken
    std::vector<std::size_t> best(ng);
    auto refresh = [&](std::size_t g) {
        std::size_t arg = na;
        double bv = -1.0;
        for (std::size_t a = 0; a < na; ++a) {
            if (m.anchor_to_gt[a] != kBackground) continue;
            if (ov[g * na + a] > bv) {
                bv = ov[g * na + a];
                arg = a;
            }
        }
        best[g] = arg;
    };
    for (std::size_t g = 0; g < ng; ++g) refresh(g);
    std::vector<bool> done(ng, false);
    for (std::size_t round = 0; round < ng; ++round) {
        std::size_t pick = ng;
        for (std::size_t g = 0; g < ng; ++g) {
            if (done[g]) continue;
            if (m.anchor_to_gt[best[g]] != kBackground) refresh(g);
            if (pick == ng) {
                pick = g;
                continue;
            }
            const double cur = ov[g * na + best[g]];
            const double top = ov[pick * na + best[pick]];
            if (cur > top || (cur == top && best[g] < best[pick])) pick = g;
        }
        const std::size_t a = best[pick];
        m.anchor_to_gt[a] = static_cast<int>(pick);
        m.gt_best_anchor[pick] = static_cast<int>(a);
        done[pick] = true;
    }

    for (std::size_t a = 0; a < na; ++a) {
        if (m.anchor_to_gt[a] != kBackground) continue;
        std::size_t arg = 0;
        double bv = ov[a];
        for (std::size_t g = 1; g < ng; ++g) {
            if (ov[g * na + a] > bv) {
                bv = ov[g * na + a];
                arg = g;
            }
        }
        if (bv >= pos_thresh) m.anchor_to_gt[a] = static_cast<int>(arg);
    }
    return m;
}

/// Greedy per-class NMS. Boxes are visited by descending score (lower input
/// index first on ties); a box is dropped when it overlaps an already kept
/// box of the same class with IoU >= iou_thresh. Returns the input indices
/// of kept boxes in visit order.
inline std::vector<std::size_t> nms_indices(std::span<const BBox> dets, double iou_thresh) {
    require(iou_thresh > 0.0 && iou_thresh < 1.0, "nms: iou_thresh in (0,1) violated");
    for (const auto& d : dets) require(d.score.has_value(), "nms: every detection needs a score");
    std::vector<std::size_t> order(dets.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return *dets[a].score > *dets[b].score; });
    std::vector<std::size_t> kept;
    for (std::size_t i : order) {
        const BBox& d = dets[i];
        bool suppressed = false;
        for (std::size_t k : kept) {
            if (dets[k].class_id == d.class_id && iou(dets[k], d) >= iou_thresh) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) kept.push_back(i);
    }
    return kept;
}

inline std::vector<BBox> nms(std::span<const BBox> dets, double iou_thresh) {
    std::vector<BBox> kept;
    for (std::size_t i : nms_indices(dets, iou_thresh)) kept.push_back(dets[i]);
    return kept;
}

}  // namespace indt
