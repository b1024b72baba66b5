#pragma once

#include <algorithm>
#include <concepts>
#include <cstddef>
#include <functional>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "indt/core.hpp"
#include "indt/detector/boxes.hpp"
#include "indt/detector/inference.hpp"

namespace indt {

struct Tile {
    int row = 0;
    int col = 0;
    int x = 0;  // offset of the tile's top-left pixel
    int y = 0;
    int width = 0;
    int height = 0;

    friend bool operator==(const Tile&, const Tile&) = default;
};

struct TileGrid {
    int tile = 0;
    int overlap = 0;
    int rows = 0;
    int cols = 0;
    std::vector<Tile> tiles;  // row-major
};

namespace detail {

// True when `b` (tile-local) reaches within `band` of a tile edge that is not
// also an image edge.
inline bool touches_inner_edge(const BBox& b, const Tile& t, int width, int height, double band) {
    return (t.x > 0 && b.x_min < band) || (t.y > 0 && b.y_min < band) ||
           (t.x + t.width < width && b.x_max > t.width - band) ||
           (t.y + t.height < height && b.y_max > t.height - band);
}

// Offsets stepping by `step`; the last one is pulled inward to end at `extent`.
inline std::vector<int> tile_offsets(int extent, int tile, int step) {
    std::vector<int> off{0};
    while (off.back() + tile < extent) off.push_back(std::min(off.back() + step, extent - tile));
    return off;
}

}  // namespace detail

/// Row-major full-size tiles stepping by (tile - overlap).
inline TileGrid make_tile_grid(int width, int height, int tile, int overlap) {
    require(tile > 0, "tile_image: tile must be positive");
    require(overlap >= 0 && overlap < tile, "tile_image: tile > overlap >= 0 violated");
    require(width >= tile && height >= tile, "tile_image: image " + std::to_string(width) + "x" +
                                                 std::to_string(height) + " is smaller than tile " +
                                                 std::to_string(tile));
    TileGrid g;
    g.tile = tile;
    g.overlap = overlap;
    const auto xs = detail::tile_offsets(width, tile, tile - overlap);
    const auto ys = detail::tile_offsets(height, tile, tile - overlap);
    g.rows = static_cast<int>(ys.size());
    g.cols = static_cast<int>(xs.size());
    for (int r = 0; r < g.rows; ++r)
        for (int c = 0; c < g.cols; ++c)
            g.tiles.push_back(Tile{r, c, xs[static_cast<std::size_t>(c)], ys[static_cast<std::size_t>(r)], tile, tile});
    return g;
}

struct TiledImage {
    TileGrid grid;
    std::vector<GrayImage> images;  // parallel to grid.tiles
};

inline TiledImage tile_image(const GrayImage& image, int tile, int overlap) {
    TiledImage t{make_tile_grid(image.width(), image.height(), tile, overlap), {}};
    t.images.reserve(t.grid.tiles.size());
    for (const Tile& tl : t.grid.tiles) t.images.push_back(extract_region(image, tl.x, tl.y, tl.width, tl.height));
    return t;
}

struct PipelineConfig {
    int tile = 512;
    int overlap = 0;
    double merge_nms_thresh = 0.45;
    // With overlap, boxes within this band of a tile edge that lies inside the
    // image are dropped: they are fragments of an object some neighbouring
    // tile sees whole (any object smaller than overlap - 2 * edge_band).
    double edge_band = 2.0;
    int jobs = 1;

    void validate() const {
        require(tile > 0, "PipelineConfig: tile must be positive");
        require(overlap >= 0 && overlap < tile, "PipelineConfig: tile > overlap >= 0 violated");
        require(merge_nms_thresh > 0.0 && merge_nms_thresh < 1.0, "PipelineConfig: merge_nms_thresh in (0,1) violated");
        require(edge_band >= 0.0, "PipelineConfig: edge_band >= 0 violated");
        require(jobs >= 1, "PipelineConfig: jobs >= 1 violated");
    }
};

struct TiledDetection {
    BBox box;  // global coordinates, scored
    int tile_row = 0;
    int tile_col = 0;
};

struct FullDetection {
    TileGrid grid;
    std::vector<TiledDetection> detections;  // descending score, ties by (y_min, x_min)
};

/// Runs `detect` (tile image -> tile-local scored boxes) on every tile,
/// remaps to global coordinates and merges across tiles with NMS.
template <class Detect>
    requires std::invocable<const Detect&, const GrayImage&>
FullDetection detect_full(const GrayImage& image, const Detect& detect, const PipelineConfig& cfg) {
    cfg.validate();
    FullDetection out{make_tile_grid(image.width(), image.height(), cfg.tile, cfg.overlap), {}};
    const auto& tiles = out.grid.tiles;
    std::vector<std::vector<BBox>> per_tile(tiles.size());
    auto work = [&](std::size_t first, std::size_t stride) {
        for (std::size_t i = first; i < tiles.size(); i += stride) {
            const Tile& t = tiles[i];
            per_tile[i] = detect(extract_region(image, t.x, t.y, t.width, t.height));
        }
    };
    const auto n_workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.jobs), tiles.size());
    if (n_workers <= 1) {
        work(0, 1);
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(work, w, n_workers);
        work(0, n_workers);
    }

    const bool trim = cfg.overlap > 0 && cfg.overlap > 2.0 * cfg.edge_band;
    std::vector<TiledDetection> merged;
    for (std::size_t i = 0; i < tiles.size(); ++i) {
        for (const BBox& b : per_tile[i]) {
            require(b.score.has_value(), "detect_full: tile detector returned an unscored box");
            if (trim && detail::touches_inner_edge(b, tiles[i], image.width(), image.height(), cfg.edge_band)) continue;
            merged.push_back(TiledDetection{b.translated(tiles[i].x, tiles[i].y), tiles[i].row, tiles[i].col});
        }
    }
    // A total order on the candidates makes the merge independent of the
    // order in which tiles were visited.
    auto key = [](const TiledDetection& d) {
        return std::make_tuple(-*d.box.score, d.box.y_min, d.box.x_min, d.box.y_max, d.box.x_max, d.box.class_id,
                               d.tile_row, d.tile_col);
    };
    std::sort(merged.begin(), merged.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });
    std::vector<BBox> boxes;
    boxes.reserve(merged.size());
    for (const auto& d : merged) boxes.push_back(d.box);
    for (std::size_t i : nms_indices(boxes, cfg.merge_nms_thresh)) out.detections.push_back(merged[i]);
    std::stable_sort(out.detections.begin(), out.detections.end(),
                     [&](const auto& a, const auto& b) { return key(a) < key(b); });
    return out;
}

inline FullDetection detect_full(const GrayImage& image, const DetectorParams& params, const DetectConfig& dc,
                                 PipelineConfig cfg) {
    require(params.config.layout.input_size == cfg.tile,
            "detect_full: model input size " + std::to_string(params.config.layout.input_size) +
                " does not match tile " + std::to_string(cfg.tile));
    const TileDetector det(params, dc);
    return detect_full(image, det, cfg);
}

}  // namespace indt
