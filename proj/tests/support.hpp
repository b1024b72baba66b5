#pragma once

// Independent reference implementations and random generators shared by the
// unit tests and the acceptance runner. The oracles follow the textbook
// definitions directly and are deliberately slow.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "indt/indt.hpp"

namespace indt::testkit {

inline double ref_iou(const BBox& a, const BBox& b) {
    const double ix0 = std::max(a.x_min, b.x_min), iy0 = std::max(a.y_min, b.y_min);
    const double ix1 = std::min(a.x_max, b.x_max), iy1 = std::min(a.y_max, b.y_max);
    const double inter = (ix1 > ix0 && iy1 > iy0) ? (ix1 - ix0) * (iy1 - iy0) : 0.0;
    const double ua = (a.x_max - a.x_min) * (a.y_max - a.y_min) + (b.x_max - b.x_min) * (b.y_max - b.y_min) - inter;
    return ua > 0.0 ? inter / ua : 0.0;
}

/// Keep-set (input indices, visit order) by repeated selection of the best
/// remaining box.
inline std::vector<std::size_t> ref_nms(const std::vector<BBox>& d, double thresh) {
    std::vector<bool> alive(d.size(), true);
    std::vector<std::size_t> kept;
    for (;;) {
        std::size_t best = d.size();
        for (std::size_t i = 0; i < d.size(); ++i)
            if (alive[i] && (best == d.size() || *d[i].score > *d[best].score)) best = i;
        if (best == d.size()) return kept;
        kept.push_back(best);
        alive[best] = false;
        for (std::size_t j = 0; j < d.size(); ++j)
            if (alive[j] && d[j].class_id == d[best].class_id && ref_iou(d[best], d[j]) >= thresh) alive[j] = false;
    }
}

/// Exhaustive two-step matcher: step 1 scans every (gt, anchor) pair per round.
inline MatchResult ref_match(const std::vector<BBox>& gts, const std::vector<BBox>& anchors, double thresh) {
    const std::size_t ng = gts.size(), na = anchors.size();
    MatchResult m;
    m.anchor_to_gt.assign(na, kBackground);
    m.gt_best_anchor.assign(ng, -1);
    std::vector<bool> gt_done(ng, false);
    for (std::size_t round = 0; round < ng; ++round) {
        double bv = -1.0;
        std::size_t bg = ng, ba = na;
        for (std::size_t a = 0; a < na; ++a) {
            if (m.anchor_to_gt[a] != kBackground) continue;
            for (std::size_t g = 0; g < ng; ++g) {
                if (gt_done[g]) continue;
                const double v = ref_iou(gts[g], anchors[a]);
                if (v > bv) {  // strict: earlier (lower anchor, then lower gt) wins ties
                    bv = v;
                    bg = g;
                    ba = a;
                }
            }
        }
        m.anchor_to_gt[ba] = static_cast<int>(bg);
        m.gt_best_anchor[bg] = static_cast<int>(ba);
        gt_done[bg] = true;
    }
    for (std::size_t a = 0; a < na; ++a) {
        if (m.anchor_to_gt[a] != kBackground || ng == 0) continue;
        double bv = -1.0;
        std::size_t bg = 0;
        for (std::size_t g = 0; g < ng; ++g) {
            const double v = ref_iou(gts[g], anchors[a]);
            if (v > bv) {
                bv = v;
                bg = g;
            }
        }
        if (bv >= thresh) m.anchor_to_gt[a] = static_cast<int>(bg);
    }
    return m;
}

/// Box with integer-ish coordinates in [0, extent) so ties are common when
/// `grid` is true.
inline BBox random_box(Rng& rng, double extent, bool grid, double min_side = 1.0) {
    auto coord = [&](double lo, double hi) { return grid ? std::floor(rng.uniform(lo, hi)) : rng.uniform(lo, hi); };
    const double w = std::max(min_side, coord(min_side, extent / 3));
    const double h = std::max(min_side, coord(min_side, extent / 3));
    const double x = coord(0.0, extent - w);
    const double y = coord(0.0, extent - h);
    return BBox{x, y, x + w, y + h, 0, {}};
}

/// Box with coordinates on the 0.01 grid, as stored in tabular files.
inline BBox random_box_2dp(Rng& rng, double extent, int n_classes) {
    auto q = [](double v) { return std::round(v * 100.0) / 100.0; };
    const double w = q(rng.uniform(0.5, extent / 4));
    const double h = q(rng.uniform(0.5, extent / 4));
    const double x = q(rng.uniform(0.0, extent - w));
    const double y = q(rng.uniform(0.0, extent - h));
    BBox b{x, y, q(x + w), q(y + h), static_cast<int>(rng.below(static_cast<std::uint64_t>(n_classes))), {}};
    if (!(b.x_min < b.x_max)) b.x_max = b.x_min + 0.01;
    if (!(b.y_min < b.y_max)) b.y_max = b.y_min + 0.01;
    return b;
}

inline double ncc(const GrayImage& a, const GrayImage& b) {
    const auto pa = a.pixels(), pb = b.pixels();
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        ma += pa[i];
        mb += pb[i];
    }
    ma /= static_cast<double>(pa.size());
    mb /= static_cast<double>(pb.size());
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        sab += (pa[i] - ma) * (pb[i] - mb);
        saa += (pa[i] - ma) * (pa[i] - ma);
        sbb += (pb[i] - mb) * (pb[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& s) {
    std::ofstream os(p, std::ios::binary);
    os << s;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto d = std::filesystem::temp_directory_path() / ("indt_test_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(d);
    std::filesystem::create_directories(d);
    return d;
}

}  // namespace indt::testkit
