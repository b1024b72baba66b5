#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "indt/core.hpp"

namespace indt {

struct MatchedPair {
    std::size_t pred = 0;  // index into the image's prediction list
    std::size_t gt = 0;
    double iou = 0.0;
};

struct ImageEval {
    std::string image_id;
    std::size_t n_preds = 0;
    std::size_t n_gts = 0;
    std::vector<MatchedPair> matches;
    std::vector<std::size_t> unmatched_gts;
    std::vector<std::size_t> unmatched_preds;
};

struct EvalReport {
    double miou = 0.0;          // over every gt, misses count as 0
    double matched_miou = 0.0;  // over matched pairs only (0 without matches)
    double precision = 1.0;
    double recall = 0.0;
    bool precision_undefined = false;  // no predictions: precision reported as 1
    std::size_t total_preds = 0;
    std::size_t total_gts = 0;
    std::size_t total_matches = 0;
    std::vector<ImageEval> per_image;  // ascending image id
};

/// Greedy matching of one image. Predictions are visited in descending score
/// (lower index first on ties); each targets the same-class gt of highest IoU
/// (lower gt index on ties) and matches it when the IoU reaches the threshold
/// and no earlier prediction already claimed it. Because a prediction's target
/// does not depend on earlier claims, duplicates can never add matches.
inline ImageEval evaluate_image(const std::string& id, const std::vector<BBox>& preds, const std::vector<BBox>& gts,
                                double iou_thresh) {
    ImageEval e{id, preds.size(), gts.size(), {}, {}, {}};
    std::vector<std::size_t> order(preds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return preds[a].score.value_or(0.0) > preds[b].score.value_or(0.0);
    });
    std::vector<bool> taken(gts.size(), false);
    std::vector<bool> pred_matched(preds.size(), false);
    for (std::size_t p : order) {
        double best = -1.0;
        std::size_t best_g = 0;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (gts[g].class_id != preds[p].class_id) continue;
            const double v = iou(preds[p], gts[g]);
            if (v > best) {
                best = v;
                best_g = g;
            }
        }
        if (best >= iou_thresh && best > 0.0 && !taken[best_g]) {
            taken[best_g] = true;
            pred_matched[p] = true;
            e.matches.push_back(MatchedPair{p, best_g, best});
        }
    }
    for (std::size_t g = 0; g < gts.size(); ++g)
        if (!taken[g]) e.unmatched_gts.push_back(g);
    for (std::size_t p = 0; p < preds.size(); ++p)
        if (!pred_matched[p]) e.unmatched_preds.push_back(p);
    return e;
}

using BoxesByImage = std::map<std::string, std::vector<BBox>>;

inline EvalReport evaluate(const BoxesByImage& preds, const BoxesByImage& gts, double iou_thresh = 0.5) {
    require(iou_thresh > 0.0 && iou_thresh <= 1.0, "evaluate: iou_match_thresh in (0,1] violated");
    require(preds.size() == gts.size(), "evaluate: prediction and ground-truth image sets differ");
    for (const auto& [id, _] : preds)
        require(gts.count(id) == 1, "evaluate: image '" + id + "' has predictions but no ground-truth entry");

    EvalReport r;
    double iou_sum = 0.0;
    for (const auto& [id, g] : gts) {
        ImageEval e = evaluate_image(id, preds.at(id), g, iou_thresh);
        r.total_preds += e.n_preds;
        r.total_gts += e.n_gts;
        r.total_matches += e.matches.size();
        for (const auto& m : e.matches) iou_sum += m.iou;
        r.per_image.push_back(std::move(e));
    }
    const auto nm = static_cast<double>(r.total_matches);
    r.miou = r.total_gts ? iou_sum / static_cast<double>(r.total_gts) : 0.0;
    r.matched_miou = r.total_matches ? iou_sum / nm : 0.0;
    r.recall = r.total_gts ? nm / static_cast<double>(r.total_gts) : 0.0;
    if (r.total_preds == 0) {
        r.precision = 1.0;
        r.precision_undefined = true;
    } else {
        r.precision = nm / static_cast<double>(r.total_preds);
    }
    return r;
}

enum class Grade { Pass, Review, Reject };

inline const char* grade_name(Grade g) {
    switch (g) {
        case Grade::Pass: return "PASS";
        case Grade::Review: return "REVIEW";
        case Grade::Reject: return "REJECT";
    }
    return "?";
}

struct GradingRules {
    std::size_t max_defect_count = 5;
    double max_defect_area = 400.0;  // pixels^2

    void validate() const {
        require(max_defect_count >= 1, "GradingRules: max_defect_count >= 1 violated");
        require(max_defect_area > 0.0, "GradingRules: max_defect_area > 0 violated");
    }
};

struct QualityGrade {
    Grade grade = Grade::Pass;
    std::string reason;
};

inline QualityGrade grade_quality(const std::vector<BBox>& dets, const GradingRules& rules) {
    for (const auto& d : dets)
        if (d.area() >= rules.max_defect_area) return {Grade::Reject, "max_defect_area"};
    if (dets.size() >= rules.max_defect_count) return {Grade::Reject, "max_defect_count"};
    if (!dets.empty()) return {Grade::Review, "defects_present"};
    return {Grade::Pass, "no_defects"};
}

}  // namespace indt
