#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "indt/binary_io.hpp"
#include "indt/core.hpp"
#include "indt/phantom.hpp"

namespace indt {

// 2D parallel-beam CT. Geometry is in pixel units with pixel centres at
// integer indices; the rotation centre is the image centre. For angle theta
// the ray at detector offset t runs along (-sin, cos) through
// centre + t * (cos, sin).

struct Sinogram {
    int n_angles = 0;
    int n_detectors = 0;
    std::vector<double> angles;  // radians, strictly increasing in [0, pi)
    double detector_spacing = 1.0;
    std::vector<double> data;    // n_angles x n_detectors, row-major

    [[nodiscard]] std::span<const double> row(int k) const {
        return {data.data() + static_cast<std::size_t>(k) * static_cast<std::size_t>(n_detectors),
                static_cast<std::size_t>(n_detectors)};
    }
    [[nodiscard]] std::span<double> row(int k) {
        return {data.data() + static_cast<std::size_t>(k) * static_cast<std::size_t>(n_detectors),
                static_cast<std::size_t>(n_detectors)};
    }
    [[nodiscard]] double detector_position(int j) const {
        return (j - 0.5 * (n_detectors - 1)) * detector_spacing;
    }

    void validate() const {
        require(n_angles >= 1 && n_detectors >= 1, "Sinogram: n_angles,n_detectors >= 1 violated");
        require(angles.size() == static_cast<std::size_t>(n_angles), "Sinogram: angle count mismatch");
        require(data.size() == static_cast<std::size_t>(n_angles) * static_cast<std::size_t>(n_detectors),
                "Sinogram: data length = n_angles * n_detectors violated");
        require(detector_spacing > 0.0 && std::isfinite(detector_spacing), "Sinogram: detector_spacing > 0 violated");
        for (std::size_t k = 0; k < angles.size(); ++k) {
            require(std::isfinite(angles[k]) && angles[k] >= 0.0 && angles[k] < std::numbers::pi,
                    "Sinogram: angles must lie in [0, pi)");
            if (k > 0) require(angles[k] > angles[k - 1], "Sinogram: angles strictly increasing violated");
        }
        for (double v : data) require(std::isfinite(v), "Sinogram: data must be finite");
    }

    friend bool operator==(const Sinogram&, const Sinogram&) = default;
};

enum class FilterKind { Ramp, RamLakHann };

struct ReconFilter {
    FilterKind kind = FilterKind::RamLakHann;
    double cutoff = 1.0;  // fraction of Nyquist

    void validate() const { require(cutoff > 0.0 && cutoff <= 1.0, "ReconFilter: cutoff in (0,1] violated"); }

    /// Gain at `r` = |f| / f_nyquist (so r = 1 at Nyquist), before the ramp.
    [[nodiscard]] double window(double r) const {
        if (r > cutoff) return 0.0;
        if (kind == FilterKind::Ramp) return 1.0;
        return 0.5 * (1.0 + std::cos(std::numbers::pi * r / cutoff));
    }
};

/// Uniform angles k * pi / n.
inline std::vector<double> uniform_angles(int n_angles) {
    std::vector<double> a(static_cast<std::size_t>(n_angles));
    for (int k = 0; k < n_angles; ++k) a[static_cast<std::size_t>(k)] = k * std::numbers::pi / n_angles;
    return a;
}

/// Smallest detector count whose aperture covers the image diagonal.
inline int min_detectors(int width, int height, double spacing = 1.0) {
    return static_cast<int>(std::ceil(std::hypot(width, height) / spacing));
}

namespace detail {

inline double bilinear_zero(const GrayImage& img, double u, double v) noexcept {
    const double fu = std::floor(u);
    const double fv = std::floor(v);
    const int x0 = static_cast<int>(fu);
    const int y0 = static_cast<int>(fv);
    const double ax = u - fu;
    const double ay = v - fv;
    const int w = img.width();
    const int h = img.height();
    auto px = [&](int x, int y) { return (x >= 0 && x < w && y >= 0 && y < h) ? img(x, y) : 0.0; };
    return (1.0 - ay) * ((1.0 - ax) * px(x0, y0) + ax * px(x0 + 1, y0)) +
           ay * ((1.0 - ax) * px(x0, y0 + 1) + ax * px(x0 + 1, y0 + 1));
}

// Integer s range for which p(s) = base + s * dir stays inside the open
// support (-1, n) of the bilinear interpolant, per axis.
inline void clip_parameter(double base, double dir, int n, double& lo, double& hi) {
    if (std::abs(dir) < 1e-15) {
        if (base <= -1.0 || base >= n) {
            lo = 1.0;
            hi = 0.0;
        }
        return;
    }
    double a = (-1.0 - base) / dir;
    double b = (n - base) / dir;
    if (a > b) std::swap(a, b);
    lo = std::max(lo, a);
    hi = std::min(hi, b);
}

}  // namespace detail

/// Line-integral projections at angles k*pi/n_angles, sampled bilinearly at
/// unit steps along each ray.
inline Sinogram project(const GrayImage& image, int n_angles, int n_detectors, double detector_spacing = 1.0) {
    image.validate();
    require(n_angles >= 1, "project: n_angles >= 1 violated");
    require(detector_spacing > 0.0, "project: detector_spacing > 0 violated");
    require(n_detectors >= 1 && n_detectors * detector_spacing >= std::hypot(image.width(), image.height()),
            "project: detector array too short to cover image diagonal");

    Sinogram sino;
    sino.n_angles = n_angles;
    sino.n_detectors = n_detectors;
    sino.detector_spacing = detector_spacing;
    sino.angles = uniform_angles(n_angles);
    sino.data.assign(static_cast<std::size_t>(n_angles) * static_cast<std::size_t>(n_detectors), 0.0);

    const double cx = 0.5 * (image.width() - 1);
    const double cy = 0.5 * (image.height() - 1);
    const double half_len = std::ceil(0.5 * std::hypot(image.width(), image.height())) + 1.0;

    for (int k = 0; k < n_angles; ++k) {
        const double c = std::cos(sino.angles[static_cast<std::size_t>(k)]);
        const double s = std::sin(sino.angles[static_cast<std::size_t>(k)]);
        auto out = sino.row(k);
        for (int j = 0; j < n_detectors; ++j) {
            const double t = sino.detector_position(j);
            const double bu = cx + t * c;
            const double bv = cy + t * s;
            double lo = -half_len;
            double hi = half_len;
            detail::clip_parameter(bu, -s, image.width(), lo, hi);
            detail::clip_parameter(bv, c, image.height(), lo, hi);
            if (lo > hi) continue;
            const int m0 = static_cast<int>(std::ceil(lo));
            const int m1 = static_cast<int>(std::floor(hi));
            double acc = 0.0;
            for (int m = m0; m <= m1; ++m) acc += detail::bilinear_zero(image, bu - m * s, bv + m * c);
            out[static_cast<std::size_t>(j)] = acc;
        }
    }
    return sino;
}

/// Frequency response |f| * window for each bin of a length-n DFT whose
/// samples are `spacing` apart. Bin 0 (DC) is exactly 0.
inline std::vector<double> filter_transfer(const ReconFilter& filter, int n, double spacing) {
    filter.validate();
    std::vector<double> h(static_cast<std::size_t>(n));
    const double nyquist = 0.5 / spacing;
    for (int k = 0; k < n; ++k) {
        const int kk = k <= n / 2 ? k : n - k;
        const double f = kk / (n * spacing);
        h[static_cast<std::size_t>(k)] = f * filter.window(f / nyquist);
    }
    return h;
}

inline int next_pow2(int n) {
    int p = 1;
    while (p < n) p <<= 1;
    return p;
}

/// Row-wise ramp-filtered copy of the sinogram (zero-padded to >= 2x length).
inline Sinogram filter_sinogram(const Sinogram& sino, const ReconFilter& filter) {
    sino.validate();
    filter.validate();
    const int n = next_pow2(2 * sino.n_detectors);
    const auto h = filter_transfer(filter, n, sino.detector_spacing);
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> buf(static_cast<std::size_t>(n));
    std::vector<std::complex<double>> spec;
    std::vector<std::complex<double>> back;
    Sinogram out = sino;
    for (int k = 0; k < sino.n_angles; ++k) {
        auto src = sino.row(k);
        std::fill(buf.begin(), buf.end(), std::complex<double>(0.0, 0.0));
        for (int j = 0; j < sino.n_detectors; ++j) buf[static_cast<std::size_t>(j)] = src[static_cast<std::size_t>(j)];
        fft.fwd(spec, buf);
        for (int i = 0; i < n; ++i) spec[static_cast<std::size_t>(i)] *= h[static_cast<std::size_t>(i)];
        fft.inv(back, spec);
        auto dst = out.row(k);
        for (int j = 0; j < sino.n_detectors; ++j) dst[static_cast<std::size_t>(j)] = back[static_cast<std::size_t>(j)].real();
    }
    return out;
}

/// Back-projection with linear interpolation along the detector; no filtering.
inline GrayImage back_project(const Sinogram& sino, int out_size) {
    sino.validate();
    require(out_size > 0, "back_project: out_size > 0 violated");
    GrayImage img(out_size, out_size, 0.0);
    const double c0 = 0.5 * (out_size - 1);
    const double det_center = 0.5 * (sino.n_detectors - 1);
    const double inv_d = 1.0 / sino.detector_spacing;
    const int nd = sino.n_detectors;
    for (int k = 0; k < sino.n_angles; ++k) {
        const double c = std::cos(sino.angles[static_cast<std::size_t>(k)]);
        const double s = std::sin(sino.angles[static_cast<std::size_t>(k)]);
        auto q = sino.row(k);
        for (int y = 0; y < out_size; ++y) {
            auto out = img.row(y);
            const double ty = (y - c0) * s;
            for (int x = 0; x < out_size; ++x) {
                const double p = ((x - c0) * c + ty) * inv_d + det_center;
                const double fp = std::floor(p);
                const int j = static_cast<int>(fp);
                const double a = p - fp;
                double v = 0.0;
                if (j >= 0 && j < nd) v += (1.0 - a) * q[static_cast<std::size_t>(j)];
                if (j + 1 >= 0 && j + 1 < nd) v += a * q[static_cast<std::size_t>(j + 1)];
                out[static_cast<std::size_t>(x)] += v;
            }
        }
    }
    const double dtheta = std::numbers::pi / sino.n_angles;
    for (double& v : img.pixels()) v *= dtheta;
    return img;
}

/// Filtered back-projection onto an out_size x out_size grid.
inline GrayImage fbp_reconstruct(const Sinogram& sino, const ReconFilter& filter, int out_size) {
    require(out_size > 0, "fbp_reconstruct: out_size > 0 violated");
    return back_project(filter_sinogram(sino, filter), out_size);
}

struct ScanConfig {
    int n_angles = 180;
    int n_detectors = 0;  // 0 = smallest count covering the diagonal
    double detector_spacing = 1.0;
    ReconFilter filter{};

    void validate() const {
        require(n_angles >= 1, "ScanConfig: n_angles >= 1 violated");
        require(n_detectors >= 0, "ScanConfig: n_detectors >= 0 violated");
        require(detector_spacing > 0.0, "ScanConfig: detector_spacing > 0 violated");
        filter.validate();
    }
};

struct ScanResult {
    GrayImage reconstruction;
    std::vector<BBox> ground_truth;
    Sinogram sinogram;
};

/// Simulated ICT scan of a phantom: render, project, reconstruct. Ground
/// truth boxes pass through unchanged.
inline ScanResult scan_part(const PhantomSpec& spec, const ScanConfig& cfg) {
    spec.validate();
    cfg.validate();
    require(spec.width == spec.height, "scan_part: phantom must be square (width == height)");
    Phantom ph = generate_phantom(spec);
    const int nd = cfg.n_detectors > 0 ? cfg.n_detectors : min_detectors(spec.width, spec.height, cfg.detector_spacing);
    ScanResult r;
    r.sinogram = project(ph.image, cfg.n_angles, nd, cfg.detector_spacing);
    r.reconstruction = fbp_reconstruct(r.sinogram, cfg.filter, spec.width);
    r.ground_truth = std::move(ph.boxes);
    return r;
}

// Sinogram file: "SINO", u32 version, u32 n_angles, u32 n_detectors,
// f64 detector_spacing, f64 angles[n_angles], f32 data[n_angles*n_detectors].
inline constexpr std::uint32_t kSinogramVersion = 1;

inline void write_sinogram(std::ostream& os, const Sinogram& sino) {
    sino.validate();
    binio::put_magic(os, "SINO");
    binio::put_u32(os, kSinogramVersion);
    binio::put_u32(os, static_cast<std::uint32_t>(sino.n_angles));
    binio::put_u32(os, static_cast<std::uint32_t>(sino.n_detectors));
    binio::put_f64(os, sino.detector_spacing);
    for (double a : sino.angles) binio::put_f64(os, a);
    for (double v : sino.data) binio::put_f32(os, static_cast<float>(v));
}

inline Sinogram read_sinogram(std::istream& is, const std::string& name = "sinogram") {
    binio::Reader rd(is, name);
    rd.expect_magic("SINO");
    const auto version = rd.u32();
    if (version != kSinogramVersion) throw ValidationError(name + ": unsupported sinogram version " + std::to_string(version));
    Sinogram s;
    s.n_angles = static_cast<int>(rd.u32());
    s.n_detectors = static_cast<int>(rd.u32());
    require(s.n_angles >= 1 && s.n_detectors >= 1 && s.n_angles < (1 << 20) && s.n_detectors < (1 << 20),
            name + ": implausible sinogram dimensions");
    s.detector_spacing = rd.f64();
    s.angles.resize(static_cast<std::size_t>(s.n_angles));
    for (double& a : s.angles) a = rd.f64();
    s.data.resize(static_cast<std::size_t>(s.n_angles) * static_cast<std::size_t>(s.n_detectors));
    for (double& v : s.data) v = rd.f32();
    s.validate();
    return s;
}

inline void write_sinogram(const std::filesystem::path& path, const Sinogram& sino) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw RuntimeError("cannot open for writing: " + path.string());
    write_sinogram(os, sino);
}

inline Sinogram read_sinogram(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw RuntimeError("cannot open for reading: " + path.string());
    return read_sinogram(is, path.string());
}

}  // namespace indt
