#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "indt/core.hpp"
#include "indt/random.hpp"

namespace indt {

struct Kernel {
    int size = 1;
    std::vector<double> weights{1.0};  // size x size, row-major
    std::string name = "identity";

    [[nodiscard]] double at(int dx, int dy) const {
        return weights[static_cast<std::size_t>(dy) * static_cast<std::size_t>(size) + static_cast<std::size_t>(dx)];
    }

    void validate() const {
        require(size >= 1 && size % 2 == 1, "Kernel: size odd and >= 1 violated");
        require(weights.size() == static_cast<std::size_t>(size) * static_cast<std::size_t>(size),
                "Kernel: weights must be size x size");
        for (double w : weights) require(std::isfinite(w), "Kernel: weights finite violated");
    }

    [[nodiscard]] double sum() const {
        double s = 0.0;
        for (double w : weights) s += w;
        return s;
    }

    static Kernel identity(int size = 1) {
        Kernel k;
        k.size = size;
        k.weights.assign(static_cast<std::size_t>(size) * static_cast<std::size_t>(size), 0.0);
        k.weights[k.weights.size() / 2] = 1.0;
        k.name = "identity";
        return k;
    }

    static Kernel box(int size = 3) {
        Kernel k;
        k.size = size;
        k.weights.assign(static_cast<std::size_t>(size) * static_cast<std::size_t>(size), 1.0 / (size * size));
        k.name = "box" + std::to_string(size);
        return k;
    }

    /// Sampled Gaussian normalised to unit sum.
    static Kernel gaussian(int size = 3, double sigma = 1.0) {
        Kernel k;
        k.size = size;
        k.weights.resize(static_cast<std::size_t>(size) * static_cast<std::size_t>(size));
        const int r = size / 2;
        double total = 0.0;
        for (int y = -r; y <= r; ++y)
            for (int x = -r; x <= r; ++x) {
                const double w = std::exp(-(x * x + y * y) / (2.0 * sigma * sigma));
                k.weights[static_cast<std::size_t>(y + r) * static_cast<std::size_t>(size) + static_cast<std::size_t>(x + r)] = w;
                total += w;
            }
        for (double& w : k.weights) w /= total;
        k.name = "gauss" + std::to_string(size);
        return k;
    }
};

inline std::vector<Kernel> default_kernel_bank() { return {Kernel::identity(), Kernel::gaussian(3, 1.0), Kernel::box(3)}; }

struct LabeledImage {
    GrayImage image;
    std::vector<BBox> boxes;
    std::string source_id;
};

/// 2D cross-correlation with replicate-edge padding; same output size.
inline GrayImage apply_kernel(const GrayImage& image, const Kernel& kernel) {
    kernel.validate();
    const int w = image.width();
    const int h = image.height();
    const int r = kernel.size / 2;
    if (kernel.size == 1) {
        GrayImage out = image;
        for (double& v : out.pixels()) v *= kernel.weights[0];
        return out;
    }
    // replicate-padded copy
    const int pw = w + 2 * r;
    std::vector<double> pad(static_cast<std::size_t>(pw) * static_cast<std::size_t>(h + 2 * r));
    for (int y = 0; y < h + 2 * r; ++y) {
        const int sy = std::clamp(y - r, 0, h - 1);
        for (int x = 0; x < pw; ++x)
            pad[static_cast<std::size_t>(y) * static_cast<std::size_t>(pw) + static_cast<std::size_t>(x)] =
                image(std::clamp(x - r, 0, w - 1), sy);
    }
    GrayImage out(w, h, 0.0);
    for (int y = 0; y < h; ++y) {
        auto dst = out.row(y);
        for (int ky = 0; ky < kernel.size; ++ky) {
            const double* src = pad.data() + static_cast<std::size_t>(y + ky) * static_cast<std::size_t>(pw);
            for (int kx = 0; kx < kernel.size; ++kx) {
                const double wgt = kernel.at(kx, ky);
                if (wgt == 0.0) continue;
                for (int x = 0; x < w; ++x) dst[static_cast<std::size_t>(x)] += wgt * src[x + kx];
            }
        }
    }
    return out;
}

inline constexpr double kDefaultKeepFraction = 0.25;

/// Translates boxes into a crop window at (x, y) of size `crop`, clips them,
/// and keeps a box iff clipped area / original area >= keep_fraction.
inline std::vector<BBox> transform_boxes_to_crop(std::span<const BBox> boxes, int x, int y, int crop,
                                                 double keep_fraction = kDefaultKeepFraction) {
    std::vector<BBox> out;
    for (const BBox& b : boxes) {
        const double area = b.area();
        if (area <= 0.0) continue;
        const BBox moved = b.translated(-x, -y);
        const BBox clipped = clip_box(moved, crop, crop);
        if (!(clipped.x_min < clipped.x_max && clipped.y_min < clipped.y_max)) continue;
        if (clipped.area() / area >= keep_fraction) out.push_back(clipped);
    }
    return out;
}

struct CropWindow {
    int x = 0;
    int y = 0;
    int size = 0;
};

/// Uniformly random top-left offset for a crop x crop window.
inline CropWindow draw_crop_window(int width, int height, int crop, std::uint64_t seed) {
    require(crop > 0, "random_crop: crop > 0 violated");
    require(crop <= width && crop <= height, "random_crop: crop larger than image");
    Rng rng(seed);
    CropWindow w;
    w.size = crop;
    w.x = static_cast<int>(rng.between(0, width - crop));
    w.y = static_cast<int>(rng.between(0, height - crop));
    return w;
}

inline LabeledImage crop_at(const LabeledImage& li, const CropWindow& w, double keep_fraction = kDefaultKeepFraction) {
    LabeledImage out;
    out.image = extract_region(li.image, w.x, w.y, w.size, w.size);
    out.boxes = transform_boxes_to_crop(li.boxes, w.x, w.y, w.size, keep_fraction);
    out.source_id = li.source_id;
    return out;
}

inline LabeledImage random_crop(const LabeledImage& li, int crop, std::uint64_t rng_seed,
                                double keep_fraction = kDefaultKeepFraction) {
    require(keep_fraction >= 0.0 && keep_fraction <= 1.0, "random_crop: keep_fraction in [0,1] violated");
    return crop_at(li, draw_crop_window(li.image.width(), li.image.height(), crop, rng_seed), keep_fraction);
}

/// apply_kernel(image, kernel) restricted to a crop window. Only the window
/// plus a kernel-radius halo is filtered; the result is bit-identical to
/// filtering the full image and then cropping.
inline GrayImage filtered_crop(const GrayImage& image, const Kernel& kernel, const CropWindow& w) {
    const int r = kernel.size / 2;
    const int x0 = std::max(0, w.x - r);
    const int y0 = std::max(0, w.y - r);
    const int x1 = std::min(image.width(), w.x + w.size + r);
    const int y1 = std::min(image.height(), w.y + w.size + r);
    const GrayImage region = apply_kernel(extract_region(image, x0, y0, x1 - x0, y1 - y0), kernel);
    return extract_region(region, w.x - x0, w.y - y0, w.size, w.size);
}

struct AugmentConfig {
    int crop = 128;
    double keep_fraction = kDefaultKeepFraction;
    std::vector<Kernel> kernel_bank = default_kernel_bank();

    void validate() const {
        require(crop > 0, "AugmentConfig: crop > 0 violated");
        require(keep_fraction >= 0.0 && keep_fraction <= 1.0, "AugmentConfig: keep_fraction in [0,1] violated");
        require(!kernel_bank.empty(), "AugmentConfig: kernel bank must not be empty");
        for (const Kernel& k : kernel_bank) k.validate();
    }
};

/// Provenance of one augmented item.
struct AugmentOrigin {
    std::size_t index = 0;
    std::size_t source_index = 0;
    std::size_t kernel_index = 0;
    CropWindow window;
};

using WarningSink = std::function<void(std::string_view)>;

/// Streams `target_count` augmented items to `emit` in index order. Item i
/// uses source i mod (#usable sources), a kernel drawn from the bank, and a
/// random crop, all from the per-item seed derive_seed(seed, i).
template <class Emit>
void for_each_augmented(std::span<const LabeledImage> sources, std::size_t target_count, const AugmentConfig& cfg,
                        std::uint64_t seed, Emit&& emit, const WarningSink& warn = {}) {
    cfg.validate();
    require(!sources.empty(), "build_augmented_set: sources must be non-empty");
    require(target_count >= sources.size(), "build_augmented_set: target_count >= source count violated");

    std::vector<std::size_t> usable;
    for (std::size_t i = 0; i < sources.size(); ++i) {
        const auto& img = sources[i].image;
        if (img.width() < cfg.crop || img.height() < cfg.crop) {
            if (warn) warn("skipping source '" + sources[i].source_id + "': smaller than crop " + std::to_string(cfg.crop));
            continue;
        }
        usable.push_back(i);
    }
    if (usable.empty()) throw ValidationError("build_augmented_set: every source image is smaller than the crop");

    for (std::size_t i = 0; i < target_count; ++i) {
        const std::size_t src = usable[i % usable.size()];
        Rng rng(derive_seed(seed, i));
        const auto kidx = static_cast<std::size_t>(rng.below(cfg.kernel_bank.size()));
        const std::uint64_t crop_seed = rng.next();
        const LabeledImage& source = sources[src];
        const CropWindow win = draw_crop_window(source.image.width(), source.image.height(), cfg.crop, crop_seed);
        LabeledImage item;
        item.image = filtered_crop(source.image, cfg.kernel_bank[kidx], win);
        item.boxes = transform_boxes_to_crop(source.boxes, win.x, win.y, win.size, cfg.keep_fraction);
        item.source_id = source.source_id;
        emit(AugmentOrigin{i, src, kidx, win}, std::move(item));
    }
}

inline std::vector<LabeledImage> build_augmented_set(std::span<const LabeledImage> sources, std::size_t target_count,
                                                     const AugmentConfig& cfg, std::uint64_t seed,
                                                     const WarningSink& warn = {}) {
    std::vector<LabeledImage> out;
    out.reserve(target_count);
    for_each_augmented(
        sources, target_count, cfg, seed, [&](const AugmentOrigin&, LabeledImage li) { out.push_back(std::move(li)); },
        warn);
    return out;
}

}  // namespace indt
