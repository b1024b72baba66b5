#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "indt/binary_io.hpp"
#include "indt/detector/network.hpp"

namespace indt {

// Model file, little-endian:
//   "SSDM", u32 version
//   layout block: u32 input_size, u32 n_scales,
//     per scale { u32 grid, f64 scale, u32 n_ratios, f64 ratios[] },
//     f64 v_center, f64 v_size
//   u32 tensor count, per tensor { u8 name_len, name, u32 rank, u32 dims[], f32 data[] }
// Backbone depth, channels and class count are recovered from tensor shapes.
inline constexpr std::uint32_t kModelVersion = 1;

inline void write_model(std::ostream& os, const DetectorParams& params) {
    params.validate();
    const auto& L = params.config.layout;
    binio::put_magic(os, "SSDM");
    binio::put_u32(os, kModelVersion);
    binio::put_u32(os, static_cast<std::uint32_t>(L.input_size));
    binio::put_u32(os, static_cast<std::uint32_t>(L.scales.size()));
    for (const auto& s : L.scales) {
        binio::put_u32(os, static_cast<std::uint32_t>(s.grid));
        binio::put_f64(os, s.scale);
        binio::put_u32(os, static_cast<std::uint32_t>(s.aspect_ratios.size()));
        for (double ar : s.aspect_ratios) binio::put_f64(os, ar);
    }
    binio::put_f64(os, params.config.variances.center);
    binio::put_f64(os, params.config.variances.size);
    binio::put_u32(os, static_cast<std::uint32_t>(params.tensors.size()));
    for (const auto& t : params.tensors) {
        require(t.name.size() < 256, "write_model: tensor name too long");
        binio::put_u8(os, static_cast<std::uint8_t>(t.name.size()));
        os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
        binio::put_u32(os, static_cast<std::uint32_t>(t.dims.size()));
        for (int d : t.dims) binio::put_u32(os, static_cast<std::uint32_t>(d));
        for (double v : t.data) binio::put_f32(os, static_cast<float>(v));
    }
}

inline DetectorParams read_model(std::istream& is, const std::string& name = "model") {
    binio::Reader rd(is, name);
    rd.expect_magic("SSDM");
    const auto version = rd.u32();
    if (version != kModelVersion) throw ValidationError(name + ": unsupported model version " + std::to_string(version));
    DetectorParams p;
    auto& L = p.config.layout;
    L.input_size = static_cast<int>(rd.u32());
    const auto n_scales = rd.u32();
    require(n_scales >= 1 && n_scales <= 64, name + ": implausible scale count");
    for (std::uint32_t k = 0; k < n_scales; ++k) {
        ScaleSpec s;
        s.grid = static_cast<int>(rd.u32());
        s.scale = rd.f64();
        const auto nr = rd.u32();
        require(nr >= 1 && nr <= 64, name + ": implausible aspect ratio count");
        s.aspect_ratios.resize(nr);
        for (double& ar : s.aspect_ratios) ar = rd.f64();
        L.scales.push_back(std::move(s));
    }
    p.config.variances.center = rd.f64();
    p.config.variances.size = rd.f64();
    const auto nt = rd.u32();
    require(nt >= 2 && nt <= 1024, name + ": implausible tensor count");
    for (std::uint32_t i = 0; i < nt; ++i) {
        Tensor t;
        t.name = rd.bytes(rd.u8());
        const auto rank = rd.u32();
        require(rank >= 1 && rank <= 8, name + ": implausible tensor rank for " + t.name);
        for (std::uint32_t d = 0; d < rank; ++d) t.dims.push_back(static_cast<int>(rd.u32()));
        const std::size_t n = dims_product(t.dims);
        require(n <= (std::size_t{1} << 28), name + ": tensor too large: " + t.name);
        t.data.resize(n);
        for (double& v : t.data) v = rd.f32();
        p.tensors.push_back(std::move(t));
    }
    rd.expect_end();

    // derive the backbone from tensor shapes
    const int head_tensors = 2 * static_cast<int>(n_scales);
    const int stage_tensors = static_cast<int>(nt) - head_tensors;
    require(stage_tensors >= 2 && stage_tensors % 2 == 0, name + ": inconsistent tensor count");
    for (int s = 0; s < stage_tensors / 2; ++s) {
        const Tensor& w = p.tensors[static_cast<std::size_t>(2 * s)];
        require(w.dims.size() == 4, name + ": stage weight must be rank 4");
        p.config.stage_channels.push_back(w.dims[0]);
    }
    const Tensor& hw = p.tensors[static_cast<std::size_t>(stage_tensors)];
    require(hw.dims.size() == 4, name + ": head weight must be rank 4");
    const int R0 = static_cast<int>(L.scales[0].aspect_ratios.size());
    require(hw.dims[0] % R0 == 0 && hw.dims[0] / R0 >= 6, name + ": head width inconsistent with aspect ratios");
    p.config.n_classes = hw.dims[0] / R0 - 5;
    p.validate();
    return p;
}

inline void write_model(const std::filesystem::path& path, const DetectorParams& params) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw RuntimeError("cannot open for writing: " + path.string());
    write_model(os, params);
    if (!os) throw RuntimeError("write failed: " + path.string());
}

inline DetectorParams read_model(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw RuntimeError("cannot open for reading: " + path.string());
    return read_model(is, path.string());
}

/// Round-trips the tensors through single precision, as stored on disk.
inline DetectorParams quantized_f32(DetectorParams p) {
    for (auto& t : p.tensors)
        for (double& v : t.data) v = static_cast<float>(v);
    return p;
}

}  // namespace indt
