#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "indt/core.hpp"
#include "indt/detector/anchors.hpp"
#include "indt/detector/boxes.hpp"
#include "indt/random.hpp"

namespace indt {

// Plain SSD-style detector. The input tile is first standardized to zero
// mean and unit variance (a constant tile just loses its mean), which frees
// the detector from the absolute density scale. The backbone is a chain of blocks
// conv3x3 (stride 1, replicate pad) -> ReLU -> maxpool 2x2, so block b emits
// a map of side input_size / 2^(b+1). A 3x3 conv head sits on each of the
// last n_scales block outputs and predicts, per feature cell and aspect
// ratio, 4 box offsets followed by n_classes + 1 logits (index 0 =
// background).

struct ModelConfig {
    AnchorLayout layout;
    std::vector<int> stage_channels;
    int n_classes = 1;
    Variances variances{};
    bool relu = true;  // false only for linearity probes
    bool standardize_input = true;  // per-image zero mean, unit variance

    [[nodiscard]] int n_stages() const { return static_cast<int>(stage_channels.size()); }
    [[nodiscard]] int n_scales() const { return static_cast<int>(layout.scales.size()); }
    [[nodiscard]] int head_stage(int scale) const { return n_stages() - n_scales() + scale; }
    [[nodiscard]] int outputs_per_anchor() const { return 4 + n_classes + 1; }

    void validate() const {
        layout.validate();
        variances.validate();
        require(n_classes >= 1, "ModelConfig: n_classes >= 1 violated");
        require(n_stages() >= 1, "ModelConfig: at least one backbone stage required");
        for (int c : stage_channels) require(c >= 1, "ModelConfig: stage channels must be >= 1");
        require(n_scales() <= n_stages(), "ModelConfig: n_scales must not exceed the number of stages");
        require(layout.input_size % (1 << n_stages()) == 0,
                "ModelConfig: input_size must be divisible by 2^n_stages");
        for (int k = 0; k < n_scales(); ++k) {
            const int side = layout.input_size >> (head_stage(k) + 1);
            require(layout.scales[static_cast<std::size_t>(k)].grid == side,
                    "ModelConfig: feature_grid of scale " + std::to_string(k) + " must equal the map side " +
                        std::to_string(side));
        }
    }

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// 128x128 input, 3 blocks, heads on all three maps (64, 32, 16).
inline ModelConfig desk_model_config() {
    ModelConfig c;
    c.layout.input_size = 128;
    c.layout.scales = {ScaleSpec{64, 0.07, {1.0}}, ScaleSpec{32, 0.11, {1.0, 2.0, 0.5}},
                       ScaleSpec{16, 0.22, {1.0, 2.0, 0.5}}};
    c.stage_channels = {4, 8, 8};
    return c;
}

/// 512x512 input with six feature scales (five backbone blocks plus one
/// extra block).
inline ModelConfig large_model_config() {
    ModelConfig c;
    c.layout.input_size = 512;
    c.layout.scales = {ScaleSpec{256, 0.02, {1.0}},          ScaleSpec{128, 0.04, {1.0, 2.0, 0.5}},
                       ScaleSpec{64, 0.08, {1.0, 2.0, 0.5}}, ScaleSpec{32, 0.16, {1.0, 2.0, 0.5}},
                       ScaleSpec{16, 0.32, {1.0, 2.0, 0.5}}, ScaleSpec{8, 0.64, {1.0, 2.0, 0.5}}};
    c.stage_channels = {4, 8, 8, 16, 16, 16};
    return c;
}

struct Tensor {
    std::string name;
    std::vector<int> dims;
    std::vector<double> data;

    [[nodiscard]] std::size_t size() const { return data.size(); }
    friend bool operator==(const Tensor&, const Tensor&) = default;
};

inline std::size_t dims_product(const std::vector<int>& dims) {
    std::size_t n = 1;
    for (int d : dims) n *= static_cast<std::size_t>(d);
    return n;
}

/// Trainable tensors in fixed order: stage{i}.weight, stage{i}.bias for every
/// block, then head{k}.weight, head{k}.bias for every scale. Conv weights are
/// [out, in, 3, 3].
struct DetectorParams {
    ModelConfig config;
    std::vector<Tensor> tensors;

    [[nodiscard]] const Tensor& stage_weight(int i) const { return tensors[static_cast<std::size_t>(2 * i)]; }
    [[nodiscard]] const Tensor& stage_bias(int i) const { return tensors[static_cast<std::size_t>(2 * i + 1)]; }
    [[nodiscard]] const Tensor& head_weight(int k) const {
        return tensors[static_cast<std::size_t>(2 * config.n_stages() + 2 * k)];
    }
    [[nodiscard]] const Tensor& head_bias(int k) const {
        return tensors[static_cast<std::size_t>(2 * config.n_stages() + 2 * k + 1)];
    }

    [[nodiscard]] std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& t : tensors) n += t.size();
        return n;
    }

    void validate() const;

    friend bool operator==(const DetectorParams&, const DetectorParams&) = default;
};

/// Expected tensor names and shapes for a config, in storage order.
inline std::vector<Tensor> tensor_shapes(const ModelConfig& cfg) {
    std::vector<Tensor> t;
    int in = 1;
    for (int i = 0; i < cfg.n_stages(); ++i) {
        const int out = cfg.stage_channels[static_cast<std::size_t>(i)];
        t.push_back(Tensor{"stage" + std::to_string(i) + ".weight", {out, in, 3, 3}, {}});
        t.push_back(Tensor{"stage" + std::to_string(i) + ".bias", {out}, {}});
        in = out;
    }
    for (int k = 0; k < cfg.n_scales(); ++k) {
        const int cin = cfg.stage_channels[static_cast<std::size_t>(cfg.head_stage(k))];
        const int out = static_cast<int>(cfg.layout.scales[static_cast<std::size_t>(k)].aspect_ratios.size()) *
                        cfg.outputs_per_anchor();
        t.push_back(Tensor{"head" + std::to_string(k) + ".weight", {out, cin, 3, 3}, {}});
        t.push_back(Tensor{"head" + std::to_string(k) + ".bias", {out}, {}});
    }
    for (auto& x : t) x.data.assign(dims_product(x.dims), 0.0);
    return t;
}

inline void DetectorParams::validate() const {
    config.validate();
    const auto expect = tensor_shapes(config);
    require(tensors.size() == expect.size(), "DetectorParams: tensor count inconsistent with layout");
    for (std::size_t i = 0; i < expect.size(); ++i) {
        require(tensors[i].name == expect[i].name, "DetectorParams: expected tensor " + expect[i].name);
        require(tensors[i].dims == expect[i].dims, "DetectorParams: shape mismatch for " + expect[i].name);
        require(tensors[i].data.size() == expect[i].data.size(), "DetectorParams: size mismatch for " + expect[i].name);
        for (double v : tensors[i].data) require(std::isfinite(v), "DetectorParams: non-finite value in " + expect[i].name);
    }
}

inline DetectorParams zero_params(const ModelConfig& cfg) {
    cfg.validate();
    return DetectorParams{cfg, tensor_shapes(cfg)};
}

/// He-normal weights (std = sqrt(2 / fan_in)), zero biases.
inline DetectorParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
    DetectorParams p = zero_params(cfg);
    Rng rng(derive_seed(seed, 0x1417));
    for (auto& t : p.tensors) {
        if (t.dims.size() != 4) continue;
        const double fan_in = static_cast<double>(t.dims[1]) * 9.0;
        const double sd = std::sqrt(2.0 / fan_in);
        for (double& v : t.data) v = rng.normal(0.0, sd);
    }
    return p;
}

/// Channel-major feature map.
struct FeatureMap {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> v;

    FeatureMap() = default;
    FeatureMap(int c, int h, int w)
        : channels(c), height(h), width(w), v(static_cast<std::size_t>(c) * h * w, 0.0) {}

    [[nodiscard]] double* plane(int c) { return v.data() + static_cast<std::size_t>(c) * height * width; }
    [[nodiscard]] const double* plane(int c) const { return v.data() + static_cast<std::size_t>(c) * height * width; }
};

/// Raw network outputs in anchor order.
struct Predictions {
    std::size_t n_anchors = 0;
    int n_logits = 0;             // n_classes + 1
    std::vector<double> loc;      // n_anchors x 4
    std::vector<double> logits;   // n_anchors x n_logits

    [[nodiscard]] std::span<const double, 4> loc_of(std::size_t a) const {
        return std::span<const double, 4>(loc.data() + 4 * a, 4);
    }
    [[nodiscard]] std::span<const double> logits_of(std::size_t a) const {
        return {logits.data() + static_cast<std::size_t>(n_logits) * a, static_cast<std::size_t>(n_logits)};
    }
};

struct ForwardCache {
    std::vector<FeatureMap> padded_inputs;  // per stage, replicate-padded conv input
    std::vector<FeatureMap> pre_activation; // per stage, conv output before ReLU
    std::vector<std::vector<std::uint32_t>> pool_argmax;  // per stage, index into pre-pool map
    std::vector<FeatureMap> stage_outputs;  // per stage, pooled output
    std::vector<FeatureMap> head_padded;    // per scale
};

namespace detail {

inline FeatureMap replicate_pad(const FeatureMap& in) {
    FeatureMap p(in.channels, in.height + 2, in.width + 2);
    const int pw = in.width + 2;
    for (int c = 0; c < in.channels; ++c) {
        const double* src = in.plane(c);
        double* dst = p.plane(c);
        for (int y = 0; y < in.height + 2; ++y) {
            const int sy = std::clamp(y - 1, 0, in.height - 1);
            const double* srow = src + static_cast<std::size_t>(sy) * in.width;
            double* drow = dst + static_cast<std::size_t>(y) * pw;
            drow[0] = srow[0];
            std::copy(srow, srow + in.width, drow + 1);
            drow[pw - 1] = srow[in.width - 1];
        }
    }
    return p;
}

// dst[y][x] += sum_{ky,kx} k[ky*3+kx] * src[y+ky][x+kx]; src has row stride sw.
inline void correlate3x3_add(const double* src, int sw, const double* k, double* dst, int h, int w) {
    for (int y = 0; y < h; ++y) {
        double* drow = dst + static_cast<std::size_t>(y) * w;
        const double* r0 = src + static_cast<std::size_t>(y) * sw;
        const double* r1 = r0 + sw;
        const double* r2 = r1 + sw;
        for (int x = 0; x < w; ++x) {
            drow[x] += k[0] * r0[x] + k[1] * r0[x + 1] + k[2] * r0[x + 2] + k[3] * r1[x] + k[4] * r1[x + 1] +
                       k[5] * r1[x + 2] + k[6] * r2[x] + k[7] * r2[x + 1] + k[8] * r2[x + 2];
        }
    }
}

// out[o] = bias[o] + sum_i sum_{ky,kx} w[o,i,ky,kx] * pad[i, y+ky, x+kx]
inline FeatureMap conv3x3_forward(const FeatureMap& pad, const Tensor& weight, const Tensor& bias) {
    const int cout = weight.dims[0];
    const int cin = weight.dims[1];
    const int h = pad.height - 2;
    const int w = pad.width - 2;
    FeatureMap out(cout, h, w);
    for (int o = 0; o < cout; ++o) {
        double* dst = out.plane(o);
        std::fill(dst, dst + static_cast<std::size_t>(h) * w, bias.data[static_cast<std::size_t>(o)]);
        for (int i = 0; i < cin; ++i)
            correlate3x3_add(pad.plane(i), pad.width, weight.data.data() + (static_cast<std::size_t>(o) * cin + i) * 9,
                             dst, h, w);
    }
    return out;
}

// Sums of g[y][x] * p[y+ky][x+kx] for the nine taps, with fixed 4-lane
// partial sums so the order does not depend on vectorisation.
inline void weight_taps(const double* g, const double* p, int pw, int h, int w, double* out9) {
    for (int ky = 0; ky < 3; ++ky) {
        double a0[4] = {}, a1[4] = {}, a2[4] = {};
        double t0 = 0.0, t1 = 0.0, t2 = 0.0;
        for (int y = 0; y < h; ++y) {
            const double* gr = g + static_cast<std::size_t>(y) * w;
            const double* pr = p + static_cast<std::size_t>(y + ky) * pw;
            int x = 0;
            for (; x + 4 <= w; x += 4) {
                for (int l = 0; l < 4; ++l) {
                    const double gv = gr[x + l];
                    a0[l] += gv * pr[x + l];
                    a1[l] += gv * pr[x + l + 1];
                    a2[l] += gv * pr[x + l + 2];
                }
            }
            for (; x < w; ++x) {
                t0 += gr[x] * pr[x];
                t1 += gr[x] * pr[x + 1];
                t2 += gr[x] * pr[x + 2];
            }
        }
        out9[ky * 3 + 0] += ((a0[0] + a0[1]) + (a0[2] + a0[3])) + t0;
        out9[ky * 3 + 1] += ((a1[0] + a1[1]) + (a1[2] + a1[3])) + t1;
        out9[ky * 3 + 2] += ((a2[0] + a2[1]) + (a2[2] + a2[3])) + t2;
    }
}

/// Accumulates weight/bias gradients; if grad_in is given it receives the
/// gradient w.r.t. the unpadded input (padding folded back onto the edges).
inline void conv3x3_backward(const FeatureMap& pad, const Tensor& weight, const FeatureMap& grad_out,
                             std::vector<double>& grad_w, std::vector<double>& grad_b, FeatureMap* grad_in) {
    const int cout = weight.dims[0];
    const int cin = weight.dims[1];
    const int h = grad_out.height;
    const int w = grad_out.width;
    const int pw = pad.width;
    for (int o = 0; o < cout; ++o) {
        const double* g = grad_out.plane(o);
        double b4[4] = {};
        double bt = 0.0;
        const std::size_t n = static_cast<std::size_t>(h) * w;
        std::size_t e = 0;
        for (; e + 4 <= n; e += 4)
            for (std::size_t l = 0; l < 4; ++l) b4[l] += g[e + l];
        for (; e < n; ++e) bt += g[e];
        grad_b[static_cast<std::size_t>(o)] += ((b4[0] + b4[1]) + (b4[2] + b4[3])) + bt;
        for (int i = 0; i < cin; ++i)
            weight_taps(g, pad.plane(i), pw, h, w, grad_w.data() + (static_cast<std::size_t>(o) * cin + i) * 9);
    }
    if (!grad_in) return;

    // Gradient w.r.t. the padded input is a correlation of the zero-extended
    // output gradient with the flipped kernel.
    const int zw = w + 4;
    FeatureMap gz(cout, h + 4, zw);
    for (int o = 0; o < cout; ++o) {
        const double* g = grad_out.plane(o);
        double* z = gz.plane(o);
        for (int y = 0; y < h; ++y)
            std::copy(g + static_cast<std::size_t>(y) * w, g + static_cast<std::size_t>(y + 1) * w,
                      z + static_cast<std::size_t>(y + 2) * zw + 2);
    }
    FeatureMap grad_pad(cin, h + 2, pw);
    for (int i = 0; i < cin; ++i) {
        double* gp = grad_pad.plane(i);
        for (int o = 0; o < cout; ++o) {
            const double* k = weight.data.data() + (static_cast<std::size_t>(o) * cin + i) * 9;
            const double flipped[9] = {k[8], k[7], k[6], k[5], k[4], k[3], k[2], k[1], k[0]};
            correlate3x3_add(gz.plane(o), zw, flipped, gp, h + 2, pw);
        }
    }
    *grad_in = FeatureMap(cin, h, w);
    for (int i = 0; i < cin; ++i) {
        const double* gp = grad_pad.plane(i);
        double* gi = grad_in->plane(i);
        for (int y = 0; y < h + 2; ++y) {
            const int sy = std::clamp(y - 1, 0, h - 1);
            double* grow = gi + static_cast<std::size_t>(sy) * w;
            const double* prow = gp + static_cast<std::size_t>(y) * pw;
            grow[0] += prow[0];
            for (int x = 0; x < w; ++x) grow[x] += prow[x + 1];
            grow[w - 1] += prow[w + 1];
        }
    }
}

inline FeatureMap maxpool2(const FeatureMap& in, std::vector<std::uint32_t>& argmax) {
    const int oh = in.height / 2;
    const int ow = in.width / 2;
    FeatureMap out(in.channels, oh, ow);
    argmax.assign(out.v.size(), 0);
    std::size_t k = 0;
    for (int c = 0; c < in.channels; ++c) {
        const double* src = in.plane(c);
        const std::size_t base = static_cast<std::size_t>(c) * in.height * in.width;
        double* dst = out.plane(c);
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x, ++k) {
                const std::size_t i00 = static_cast<std::size_t>(2 * y) * in.width + 2 * x;
                std::size_t best = i00;
                for (std::size_t cand : {i00 + 1, i00 + in.width, i00 + in.width + 1})
                    if (src[cand] > src[best]) best = cand;  // first maximum wins
                dst[static_cast<std::size_t>(y) * ow + x] = src[best];
                argmax[k] = static_cast<std::uint32_t>(base + best);
            }
        }
    }
    return out;
}

inline void standardize(std::vector<double>& v) {
    double mean = 0.0;
    for (double a : v) mean += a;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double a : v) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / static_cast<double>(v.size()));
    const double inv = sd > 1e-8 ? 1.0 / sd : 1.0;
    for (double& a : v) a = (a - mean) * inv;
}

inline void relu_inplace(FeatureMap& m) {
    for (double& v : m.v) v = v > 0.0 ? v : 0.0;
}

}  // namespace detail

/// Network forward pass. When `cache` is non-null it receives everything the
/// backward pass needs.
inline Predictions forward(const GrayImage& image, const DetectorParams& params, ForwardCache* cache = nullptr) {
    const ModelConfig& cfg = params.config;
    require(image.width() == cfg.layout.input_size && image.height() == cfg.layout.input_size,
            "forward: image dimensions must equal layout.input_size (" + std::to_string(cfg.layout.input_size) + ")");
    require(params.tensors.size() == tensor_shapes(cfg).size(), "forward: params inconsistent with config");

    FeatureMap x(1, image.height(), image.width());
    std::copy(image.pixels().begin(), image.pixels().end(), x.v.begin());
    if (cfg.standardize_input) detail::standardize(x.v);

    const int S = cfg.n_stages();
    if (cache) *cache = ForwardCache{};
    std::vector<FeatureMap> outputs;
    outputs.reserve(static_cast<std::size_t>(S));
    for (int s = 0; s < S; ++s) {
        FeatureMap pad = detail::replicate_pad(x);
        FeatureMap pre = detail::conv3x3_forward(pad, params.stage_weight(s), params.stage_bias(s));
        FeatureMap act = pre;
        if (cfg.relu) detail::relu_inplace(act);
        std::vector<std::uint32_t> am;
        FeatureMap pooled = detail::maxpool2(act, am);
        if (cache) {
            cache->padded_inputs.push_back(std::move(pad));
            cache->pre_activation.push_back(std::move(pre));
            cache->pool_argmax.push_back(std::move(am));
        }
        x = pooled;
        outputs.push_back(std::move(pooled));
    }

    Predictions pred;
    pred.n_anchors = cfg.layout.anchor_count();
    pred.n_logits = cfg.n_classes + 1;
    pred.loc.assign(pred.n_anchors * 4, 0.0);
    pred.logits.assign(pred.n_anchors * static_cast<std::size_t>(pred.n_logits), 0.0);
    const int per = cfg.outputs_per_anchor();
    std::size_t anchor_base = 0;
    for (int k = 0; k < cfg.n_scales(); ++k) {
        const auto& sc = cfg.layout.scales[static_cast<std::size_t>(k)];
        const int R = static_cast<int>(sc.aspect_ratios.size());
        FeatureMap pad = detail::replicate_pad(outputs[static_cast<std::size_t>(cfg.head_stage(k))]);
        FeatureMap out = detail::conv3x3_forward(pad, params.head_weight(k), params.head_bias(k));
        const int g = sc.grid;
        for (int r = 0; r < R; ++r) {
            for (int d = 0; d < per; ++d) {
                const double* plane = out.plane(r * per + d);
                for (int cell = 0; cell < g * g; ++cell) {
                    const std::size_t a = anchor_base + static_cast<std::size_t>(cell) * R + r;
                    if (d < 4)
                        pred.loc[a * 4 + static_cast<std::size_t>(d)] = plane[cell];
                    else
                        pred.logits[a * static_cast<std::size_t>(pred.n_logits) + static_cast<std::size_t>(d - 4)] = plane[cell];
                }
            }
        }
        anchor_base += static_cast<std::size_t>(g) * g * R;
        if (cache) cache->head_padded.push_back(std::move(pad));
    }
    if (cache) cache->stage_outputs = std::move(outputs);
    return pred;
}

/// One gradient buffer per parameter tensor, in tensor order.
using Gradients = std::vector<std::vector<double>>;

inline Gradients zero_gradients(const DetectorParams& params) {
    Gradients g;
    g.reserve(params.tensors.size());
    for (const auto& t : params.tensors) g.emplace_back(t.size(), 0.0);
    return g;
}

/// Backpropagates dL/dloc and dL/dlogits (laid out like Predictions) to
/// every parameter tensor. Gradients are accumulated into `grads`.
inline void backward(const DetectorParams& params, const ForwardCache& cache, std::span<const double> grad_loc,
                     std::span<const double> grad_logits, Gradients& grads) {
    const ModelConfig& cfg = params.config;
    const int S = cfg.n_stages();
    const int per = cfg.outputs_per_anchor();
    const auto n_logits = static_cast<std::size_t>(cfg.n_classes + 1);

    // gradient w.r.t. each stage output
    std::vector<FeatureMap> grad_stage(static_cast<std::size_t>(S));
    for (int s = 0; s < S; ++s) {
        const auto& o = cache.stage_outputs[static_cast<std::size_t>(s)];
        grad_stage[static_cast<std::size_t>(s)] = FeatureMap(o.channels, o.height, o.width);
    }

    std::size_t anchor_base = 0;
    for (int k = 0; k < cfg.n_scales(); ++k) {
        const auto& sc = cfg.layout.scales[static_cast<std::size_t>(k)];
        const int R = static_cast<int>(sc.aspect_ratios.size());
        const int g = sc.grid;
        FeatureMap gout(R * per, g, g);
        for (int r = 0; r < R; ++r) {
            for (int d = 0; d < per; ++d) {
                double* plane = gout.plane(r * per + d);
                for (int cell = 0; cell < g * g; ++cell) {
                    const std::size_t a = anchor_base + static_cast<std::size_t>(cell) * R + r;
                    plane[cell] = d < 4 ? grad_loc[a * 4 + static_cast<std::size_t>(d)]
                                        : grad_logits[a * n_logits + static_cast<std::size_t>(d - 4)];
                }
            }
        }
        anchor_base += static_cast<std::size_t>(g) * g * R;
        const std::size_t wi = static_cast<std::size_t>(2 * S + 2 * k);
        FeatureMap gin;
        detail::conv3x3_backward(cache.head_padded[static_cast<std::size_t>(k)], params.tensors[wi], gout, grads[wi],
                                 grads[wi + 1], &gin);
        auto& dst = grad_stage[static_cast<std::size_t>(cfg.head_stage(k))].v;
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += gin.v[i];
    }

    for (int s = S - 1; s >= 0; --s) {
        const auto& pre = cache.pre_activation[static_cast<std::size_t>(s)];
        FeatureMap gpre(pre.channels, pre.height, pre.width);
        const auto& am = cache.pool_argmax[static_cast<std::size_t>(s)];
        const auto& gs = grad_stage[static_cast<std::size_t>(s)].v;
        for (std::size_t i = 0; i < gs.size(); ++i) gpre.v[am[i]] += gs[i];
        if (cfg.relu)
            for (std::size_t i = 0; i < gpre.v.size(); ++i)
                if (!(pre.v[i] > 0.0)) gpre.v[i] = 0.0;
        const std::size_t wi = static_cast<std::size_t>(2 * s);
        FeatureMap gin;
        detail::conv3x3_backward(cache.padded_inputs[static_cast<std::size_t>(s)], params.tensors[wi], gpre, grads[wi],
                                 grads[wi + 1], s > 0 ? &gin : nullptr);
        if (s > 0) {
            auto& dst = grad_stage[static_cast<std::size_t>(s - 1)].v;
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += gin.v[i];
        }
    }
}

}  // namespace indt
