#pragma once

#include <cmath>
#include <vector>

#include "indt/core.hpp"

namespace indt {

/// One feature-map scale: a grid x grid lattice of anchor centres.
struct ScaleSpec {
    int grid = 1;
    double scale = 0.5;  // anchor side as a fraction of the input size
    std::vector<double> aspect_ratios{1.0};

    friend bool operator==(const ScaleSpec&, const ScaleSpec&) = default;
};

struct AnchorLayout {
    int input_size = 128;
    std::vector<ScaleSpec> scales;

    void validate() const {
        require(input_size > 0, "AnchorLayout: input_size > 0 violated");
        require(!scales.empty(), "AnchorLayout: at least one scale required");
        for (std::size_t k = 0; k < scales.size(); ++k) {
            const auto& s = scales[k];
            require(s.grid >= 1, "AnchorLayout: feature_grid >= 1 violated");
            require(s.scale > 0.0 && s.scale <= 1.0, "AnchorLayout: 0 < s_k <= 1 violated");
            require(!s.aspect_ratios.empty(), "AnchorLayout: each scale needs at least one aspect ratio");
            for (double ar : s.aspect_ratios)
                require(ar > 0.0 && std::isfinite(ar), "AnchorLayout: aspect ratios must be positive");
            if (k > 0)
                require(s.grid < scales[k - 1].grid, "AnchorLayout: feature grids must strictly decrease with depth");
        }
    }

    [[nodiscard]] std::size_t anchor_count() const {
        std::size_t n = 0;
        for (const auto& s : scales)
            n += static_cast<std::size_t>(s.grid) * static_cast<std::size_t>(s.grid) * s.aspect_ratios.size();
        return n;
    }

    friend bool operator==(const AnchorLayout&, const AnchorLayout&) = default;
};

/// Anchors before clipping, in scale-major, row-major, ratio-minor order.
inline std::vector<BBox> build_anchors_unclipped(const AnchorLayout& layout) {
    layout.validate();
    std::vector<BBox> out;
    out.reserve(layout.anchor_count());
    const double n = layout.input_size;
    for (const auto& s : layout.scales) {
        for (int row = 0; row < s.grid; ++row) {
            for (int col = 0; col < s.grid; ++col) {
                const double cx = (col + 0.5) / s.grid * n;
                const double cy = (row + 0.5) / s.grid * n;
                for (double ar : s.aspect_ratios) {
                    const double w = s.scale * n * std::sqrt(ar);
                    const double h = s.scale * n / std::sqrt(ar);
                    out.push_back(BBox{cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h, 0, {}});
                }
            }
        }
    }
    return out;
}

/// Default boxes clipped to the input square.
inline std::vector<BBox> build_anchors(const AnchorLayout& layout) {
    auto out = build_anchors_unclipped(layout);
    for (auto& b : out) b = clip_box(b, layout.input_size, layout.input_size);
    return out;
}

}  // namespace indt
