#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "indt/core.hpp"
#include "indt/random.hpp"

namespace indt {

/// Synthetic capacitor slice: a rectangular case body carrying a regular grid
/// of welding spots, some of which contain a void.
struct PhantomSpec {
    int width = 512;
    int height = 512;
    int case_margin = 32;
    int spot_rows = 8;
    int spot_cols = 8;
    double spot_radius = 7.0;
    double void_rate = 0.3;
    double void_radius_min = 3.0;
    double void_radius_max = 5.0;
    double background_density = 0.3;
    double spot_density = 1.0;
    double noise_sigma = 0.02;
    std::uint64_t seed = 0;

    [[nodiscard]] double pitch_x() const { return static_cast<double>(width - 2 * case_margin) / spot_cols; }
    [[nodiscard]] double pitch_y() const { return static_cast<double>(height - 2 * case_margin) / spot_rows; }

    void validate() const {
        require(width > 0 && height > 0, "PhantomSpec: width,height > 0 violated");
        require(case_margin >= 0, "PhantomSpec: case_margin >= 0 violated");
        require(spot_rows >= 0 && spot_cols >= 0, "PhantomSpec: spot_rows,spot_cols >= 0 violated");
        require(spot_radius > 0.0, "PhantomSpec: spot_radius > 0 violated");
        require(2 * case_margin < width && 2 * case_margin < height,
                "PhantomSpec: spot grid fits inside margins violated (margins exceed image)");
        if (spot_rows > 0 && spot_cols > 0) {
            require(pitch_x() >= 2.0 * spot_radius && pitch_y() >= 2.0 * spot_radius,
                    "PhantomSpec: spot grid fits inside margins violated (spot pitch < spot diameter)");
        }
        require(void_rate >= 0.0 && void_rate <= 1.0, "PhantomSpec: 0 <= void_rate <= 1 violated");
        require(void_radius_min >= 0.0 && void_radius_min <= void_radius_max,
                "PhantomSpec: void_radius_range.min <= void_radius_range.max violated");
        require(void_radius_max < spot_radius, "PhantomSpec: void_radius_range.max < spot_radius violated");
        require(noise_sigma >= 0.0 && std::isfinite(noise_sigma), "PhantomSpec: noise_sigma >= 0 violated");
        require(std::isfinite(background_density) && std::isfinite(spot_density),
                "PhantomSpec: densities must be finite");
    }
};

/// One welding spot; void_radius == 0 means the spot is intact.
struct Spot {
    double cx = 0.0;
    double cy = 0.0;
    double radius = 0.0;
    double void_radius = 0.0;

    [[nodiscard]] bool voided() const noexcept { return void_radius > 0.0; }
    [[nodiscard]] BBox box() const { return BBox{cx - radius, cy - radius, cx + radius, cy + radius, 0, {}}; }
};

struct Phantom {
    GrayImage image;
    std::vector<BBox> boxes;  // tight boxes around the voided spots, class 0
    std::vector<Spot> spots;
};

/// Grid placement plus the per-spot void draws, row-major.
inline std::vector<Spot> layout_spots(const PhantomSpec& spec) {
    spec.validate();
    Rng rng(derive_seed(spec.seed, 0));
    std::vector<Spot> spots;
    spots.reserve(static_cast<std::size_t>(spec.spot_rows) * static_cast<std::size_t>(spec.spot_cols));
    for (int r = 0; r < spec.spot_rows; ++r) {
        for (int c = 0; c < spec.spot_cols; ++c) {
            Spot s;
            s.cx = spec.case_margin + (c + 0.5) * spec.pitch_x();
            s.cy = spec.case_margin + (r + 0.5) * spec.pitch_y();
            s.radius = spec.spot_radius;
            // Both draws are always consumed so the stream layout does not
            // depend on the outcome.
            const bool voided = rng.bernoulli(spec.void_rate);
            const double vr = rng.uniform(spec.void_radius_min, spec.void_radius_max);
            s.void_radius = voided ? std::max(vr, 1e-6) : 0.0;
            spots.push_back(s);
        }
    }
    return spots;
}

namespace detail {

inline void fill_disk(GrayImage& img, double cx, double cy, double radius, double value) {
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - radius)));
    const int x1 = std::min(img.width() - 1, static_cast<int>(std::ceil(cx + radius)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - radius)));
    const int y1 = std::min(img.height() - 1, static_cast<int>(std::ceil(cy + radius)));
    const double r2 = radius * radius;
    for (int y = y0; y <= y1; ++y) {
        const double dy = y + 0.5 - cy;
        for (int x = x0; x <= x1; ++x) {
            const double dx = x + 0.5 - cx;
            if (dx * dx + dy * dy <= r2) img(x, y) = value;
        }
    }
}

}  // namespace detail

/// Renders an explicit spot list into a phantom image; noise comes from the
/// spec's seed. Boxes are emitted for voided spots only.
inline Phantom render_phantom(const PhantomSpec& spec, std::vector<Spot> spots) {
    spec.validate();
    GrayImage img(spec.width, spec.height, 0.0);
    const int inset = spec.case_margin / 2;
    for (int y = inset; y < spec.height - inset; ++y)
        for (int x = inset; x < spec.width - inset; ++x) img(x, y) = spec.background_density;

    Phantom out;
    for (const Spot& s : spots) {
        detail::fill_disk(img, s.cx, s.cy, s.radius, spec.spot_density);
        if (s.voided()) {
            detail::fill_disk(img, s.cx, s.cy, s.void_radius, spec.background_density);
            BBox b = clip_box(s.box(), spec.width, spec.height);
            if (b.valid()) out.boxes.push_back(b);
        }
    }

    if (spec.noise_sigma > 0.0) {
        Rng noise(derive_seed(spec.seed, 1));
        for (double& v : img.pixels()) v = std::max(0.0, v + noise.normal(0.0, spec.noise_sigma));
    }
    out.image = std::move(img);
    out.spots = std::move(spots);
    return out;
}

/// Deterministic synthetic specimen with exact ground truth.
inline Phantom generate_phantom(const PhantomSpec& spec) { return render_phantom(spec, layout_spots(spec)); }

/// Copy of `image` with 1-pixel box outlines set to `marker`. Boxes are
/// clipped to the image; boxes entirely outside are ignored.
inline GrayImage render_annotations(const GrayImage& image, std::span<const BBox> boxes, double marker) {
    GrayImage out = image;
    const int w = image.width();
    const int h = image.height();
    for (const BBox& b : boxes) {
        int x0 = static_cast<int>(std::floor(b.x_min));
        int y0 = static_cast<int>(std::floor(b.y_min));
        int x1 = static_cast<int>(std::ceil(b.x_max)) - 1;
        int y1 = static_cast<int>(std::ceil(b.y_max)) - 1;
        if (x1 < 0 || y1 < 0 || x0 >= w || y0 >= h || x1 < x0 || y1 < y0) continue;
        x0 = std::max(x0, 0);
        y0 = std::max(y0, 0);
        x1 = std::min(x1, w - 1);
        y1 = std::min(y1, h - 1);
        for (int x = x0; x <= x1; ++x) {
            out(x, y0) = marker;
            out(x, y1) = marker;
        }
        for (int y = y0; y <= y1; ++y) {
            out(x0, y) = marker;
            out(x1, y) = marker;
        }
    }
    return out;
}

}  // namespace indt
