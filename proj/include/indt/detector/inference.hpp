#pragma once

#include <cmath>
#include <vector>

#include "indt/core.hpp"
#include "indt/detector/anchors.hpp"
#include "indt/detector/boxes.hpp"
#include "indt/detector/network.hpp"

namespace indt {

struct DetectConfig {
    double score_thresh = 0.5;
    double nms_thresh = 0.45;

    void validate() const {
        require(score_thresh >= 0.0 && score_thresh <= 1.0, "DetectConfig: score_thresh in [0,1] violated");
        require(nms_thresh > 0.0 && nms_thresh < 1.0, "DetectConfig: nms_thresh in (0,1) violated");
    }
};

/// Softmax class probabilities of one anchor.
inline std::vector<double> softmax(std::span<const double> z) {
    const double m = *std::max_element(z.begin(), z.end());
    std::vector<double> p(z.size());
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) s += (p[i] = std::exp(z[i] - m));
    for (double& v : p) v /= s;
    return p;
}

/// Decodes raw predictions into scored boxes (clipped to the input square),
/// thresholds them and applies per-class NMS.
inline std::vector<BBox> postprocess(const Predictions& pred, std::span<const BBox> anchors, const ModelConfig& cfg,
                                     const DetectConfig& dc) {
    dc.validate();
    std::vector<BBox> cands;
    const double side = cfg.layout.input_size;
    for (std::size_t a = 0; a < pred.n_anchors; ++a) {
        const auto p = softmax(pred.logits_of(a));
        for (int c = 1; c < pred.n_logits; ++c) {
            const double score = p[static_cast<std::size_t>(c)];
            if (score < dc.score_thresh) continue;
            BBox b = clip_box(decode_box(pred.loc_of(a), anchors[a], cfg.variances), side, side);
            if (!(b.x_min < b.x_max && b.y_min < b.y_max)) continue;
            b.class_id = c - 1;
            b.score = score;
            cands.push_back(b);
        }
    }
    return nms(cands, dc.nms_thresh);
}

/// Detector bound to one parameter set; callable on single tiles.
class TileDetector {
public:
    TileDetector(const DetectorParams& params, DetectConfig dc)
        : params_(&params), anchors_(build_anchors(params.config.layout)), dc_(dc) {
        params.validate();
        dc_.validate();
    }

    [[nodiscard]] int input_size() const { return params_->config.layout.input_size; }

    std::vector<BBox> operator()(const GrayImage& tile) const {
        return postprocess(forward(tile, *params_), anchors_, params_->config, dc_);
    }

private:
    const DetectorParams* params_;
    std::vector<BBox> anchors_;
    DetectConfig dc_;
};

}  // namespace indt
