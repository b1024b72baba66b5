#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace indt {

/// Thrown when an input violates a documented precondition or invariant.
/// The message names the violated rule.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown for failures that are not caused by bad input (I/O, divergence).
class RuntimeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
    if (!condition) throw ValidationError(message);
}

/// Row-major 2D scalar field. Pixel (x, y) covers the unit square
/// [x, x+1) x [y, y+1) in continuous coordinates.
class GrayImage {
public:
    GrayImage() = default;
    GrayImage(int width, int height, double fill = 0.0)
        : width_(width), height_(height) {
        require(width > 0 && height > 0, "GrayImage: width and height must be > 0");
        pixels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
    }
    GrayImage(int width, int height, std::vector<double> pixels)
        : width_(width), height_(height), pixels_(std::move(pixels)) {
        require(width > 0 && height > 0, "GrayImage: width and height must be > 0");
        require(pixels_.size() == static_cast<std::size_t>(width) * static_cast<std::size_t>(height),
                "GrayImage: pixel count must equal width * height");
    }

    [[nodiscard]] int width() const noexcept { return width_; }
    [[nodiscard]] int height() const noexcept { return height_; }
    [[nodiscard]] bool empty() const noexcept { return pixels_.empty(); }
    [[nodiscard]] std::size_t size() const noexcept { return pixels_.size(); }

    [[nodiscard]] double& operator()(int x, int y) noexcept {
        return pixels_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)];
    }
    [[nodiscard]] double operator()(int x, int y) const noexcept {
        return pixels_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)];
    }

    [[nodiscard]] std::span<double> row(int y) noexcept {
        return {pixels_.data() + static_cast<std::size_t>(y) * static_cast<std::size_t>(width_),
                static_cast<std::size_t>(width_)};
    }
    [[nodiscard]] std::span<const double> row(int y) const noexcept {
        return {pixels_.data() + static_cast<std::size_t>(y) * static_cast<std::size_t>(width_),
                static_cast<std::size_t>(width_)};
    }

    [[nodiscard]] std::span<double> pixels() noexcept { return pixels_; }
    [[nodiscard]] std::span<const double> pixels() const noexcept { return pixels_; }

    [[nodiscard]] bool all_finite() const noexcept {
        return std::all_of(pixels_.begin(), pixels_.end(), [](double v) { return std::isfinite(v); });
    }

    void validate() const {
        require(width_ > 0 && height_ > 0, "GrayImage: width and height must be > 0");
        require(pixels_.size() == static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_),
                "GrayImage: pixel count must equal width * height");
        require(all_finite(), "GrayImage: every pixel must be finite");
    }

    [[nodiscard]] double min_value() const { return *std::min_element(pixels_.begin(), pixels_.end()); }
    [[nodiscard]] double max_value() const { return *std::max_element(pixels_.begin(), pixels_.end()); }

    friend bool operator==(const GrayImage&, const GrayImage&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> pixels_;
};

/// Copy of the window [x, x+w) x [y, y+h). The window must lie inside the image.
inline GrayImage extract_region(const GrayImage& image, int x, int y, int w, int h) {
    require(x >= 0 && y >= 0 && w > 0 && h > 0 && x + w <= image.width() && y + h <= image.height(),
            "extract_region: window must lie inside the image");
    GrayImage out(w, h);
    for (int r = 0; r < h; ++r) {
        auto src = image.row(y + r).subspan(static_cast<std::size_t>(x), static_cast<std::size_t>(w));
        std::copy(src.begin(), src.end(), out.row(r).begin());
    }
    return out;
}

/// Axis-aligned box in continuous pixel coordinates.
struct BBox {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;
    int class_id = 0;  // 0 = voiding_spot
    std::optional<double> score;

    [[nodiscard]] double width() const noexcept { return x_max - x_min; }
    [[nodiscard]] double height() const noexcept { return y_max - y_min; }
    [[nodiscard]] double area() const noexcept {
        return std::max(0.0, width()) * std::max(0.0, height());
    }
    [[nodiscard]] double center_x() const noexcept { return 0.5 * (x_min + x_max); }
    [[nodiscard]] double center_y() const noexcept { return 0.5 * (y_min + y_max); }

    [[nodiscard]] bool valid() const noexcept {
        const bool finite = std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) &&
                            std::isfinite(y_max);
        const bool score_ok = !score || (*score >= 0.0 && *score <= 1.0);
        return finite && x_min < x_max && y_min < y_max && score_ok && class_id >= 0;
    }

    void validate() const {
        require(std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) && std::isfinite(y_max),
                "BBox: coordinates must be finite");
        require(x_min < x_max, "BBox: x_min < x_max violated");
        require(y_min < y_max, "BBox: y_min < y_max violated");
        require(!score || (*score >= 0.0 && *score <= 1.0), "BBox: score must lie in [0,1]");
        require(class_id >= 0, "BBox: class_id must be non-negative");
    }

    [[nodiscard]] BBox translated(double dx, double dy) const {
        BBox b = *this;
        b.x_min += dx;
        b.x_max += dx;
        b.y_min += dy;
        b.y_max += dy;
        return b;
    }

    friend bool operator==(const BBox&, const BBox&) = default;
};

/// Intersection of two boxes; width/height may be non-positive when disjoint.
inline BBox intersect(const BBox& a, const BBox& b) noexcept {
    BBox r = a;
    r.x_min = std::max(a.x_min, b.x_min);
    r.y_min = std::max(a.y_min, b.y_min);
    r.x_max = std::min(a.x_max, b.x_max);
    r.y_max = std::min(a.y_max, b.y_max);
    return r;
}

inline BBox clip_box(const BBox& b, double width, double height) noexcept {
    BBox r = b;
    r.x_min = std::clamp(b.x_min, 0.0, width);
    r.x_max = std::clamp(b.x_max, 0.0, width);
    r.y_min = std::clamp(b.y_min, 0.0, height);
    r.y_max = std::clamp(b.y_max, 0.0, height);
    return r;
}

/// Intersection over union; 0 for disjoint boxes.
inline double iou(const BBox& a, const BBox& b) noexcept {
    const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
    const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

}  // namespace indt
