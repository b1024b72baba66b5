#include <gtest/gtest.h>

#include <sstream>

#include "support.hpp"

using namespace indt;

namespace {
AnchorLayout layout_421() {
    AnchorLayout L;
    L.input_size = 64;
    for (int g : {4, 2, 1}) L.scales.push_back(ScaleSpec{g, 0.2 * (4 / g), {1.0, 2.0, 0.5}});
    L.scales[2].scale = 0.9;
    return L;
}
std::vector<BBox> scored(Rng& rng, std::size_t n, double extent, int n_classes) {
    std::vector<BBox> d;
    for (std::size_t i = 0; i < n; ++i) {
        BBox b = testkit::random_box(rng, extent, i % 3 == 0);
        b.class_id = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_classes)));
        b.score = std::round(rng.uniform() * 50) / 50;  // frequent ties
        d.push_back(b);
    }
    return d;
}
}  // namespace

TEST(Anchors, SingleCentredBox) {
    AnchorLayout L;
    L.input_size = 100;
    L.scales = {ScaleSpec{1, 0.5, {1.0}}};
    const auto a = build_anchors(L);
    ASSERT_EQ(a.size(), 1u);
    EXPECT_EQ(a[0], (BBox{25, 25, 75, 75, 0, {}}));
}

TEST(Anchors, CountAndOrder) {
    const AnchorLayout L = layout_421();
    const auto a = build_anchors_unclipped(L);
    ASSERT_EQ(a.size(), 63u);
    EXPECT_EQ(L.anchor_count(), 63u);
    // scale-major, row-major, ratio-minor: anchor 3 is (row 0, col 1, ratio 1)
    EXPECT_DOUBLE_EQ(a[3].center_x(), 24.0);
    EXPECT_DOUBLE_EQ(a[3].center_y(), 8.0);
    EXPECT_DOUBLE_EQ(a[4].width() / a[4].height(), 2.0);
    EXPECT_DOUBLE_EQ(a[12].center_y(), 24.0);
    EXPECT_DOUBLE_EQ(a[48].width(), 0.4 * 64);
    for (const auto& b : build_anchors(L)) {
        EXPECT_GE(b.x_min, 0.0);
        EXPECT_LE(b.x_max, 64.0);
    }
}

TEST(Anchors, RandomLayoutsCountAndRatios) {
    Rng rng(8);
    for (int t = 0; t < 100; ++t) {
        AnchorLayout L;
        L.input_size = 256;
        int g = static_cast<int>(rng.between(8, 32));
        std::size_t expect = 0;
        while (g >= 1) {
            ScaleSpec s{g, rng.uniform(0.05, 1.0), {}};
            for (int r = 0; r < static_cast<int>(rng.between(1, 4)); ++r) s.aspect_ratios.push_back(rng.uniform(0.25, 4));
            expect += static_cast<std::size_t>(g) * g * s.aspect_ratios.size();
            L.scales.push_back(s);
            g /= 2;
            if (g == 0) break;
        }
        const auto a = build_anchors_unclipped(L);
        ASSERT_EQ(a.size(), expect);
        std::size_t k = 0;
        for (const auto& s : L.scales)
            for (int i = 0; i < s.grid * s.grid; ++i)
                for (double ar : s.aspect_ratios) {
                    EXPECT_NEAR(a[k].width() / a[k].height(), ar, 1e-9);
                    ++k;
                }
    }
}

TEST(Anchors, InvalidLayoutsRejected) {
    AnchorLayout L = layout_421();
    L.scales[1].grid = 4;
    EXPECT_THROW(build_anchors(L), ValidationError);
    L = layout_421();
    L.scales[0].scale = 0.0;
    EXPECT_THROW(build_anchors(L), ValidationError);
    L.scales.clear();
    EXPECT_THROW(build_anchors(L), ValidationError);
}

TEST(Codec, HandValues) {
    const BBox anchor{0, 0, 10, 10, 0, {}};
    const auto t = encode_box(BBox{0, 0, 20, 20, 0, {}}, anchor);
    EXPECT_DOUBLE_EQ(t[0], 5.0);
    EXPECT_DOUBLE_EQ(t[1], 5.0);
    EXPECT_NEAR(t[2], std::log(2.0) / 0.2, 1e-15);
    EXPECT_NEAR(t[3], std::log(2.0) / 0.2, 1e-15);
    for (double v : encode_box(anchor, anchor)) EXPECT_EQ(v, 0.0);
}

TEST(Codec, DecodeInvertsEncode) {
    Rng rng(2);
    for (int i = 0; i < 20000; ++i) {
        const BBox g = testkit::random_box(rng, 300, false, 0.5), a = testkit::random_box(rng, 300, false, 0.5);
        const Variances v{rng.uniform(0.05, 1.0), rng.uniform(0.05, 1.0)};
        const BBox d = decode_box(encode_box(g, a, v), a, v);
        EXPECT_NEAR(d.x_min, g.x_min, 1e-9);
        EXPECT_NEAR(d.y_min, g.y_min, 1e-9);
        EXPECT_NEAR(d.x_max, g.x_max, 1e-9);
        EXPECT_NEAR(d.y_max, g.y_max, 1e-9);
    }
}

TEST(Matching, ExactAnchorAtHighThreshold) {
    const auto anchors = build_anchors(layout_421());
    const std::vector<BBox> gts{anchors[17]};
    const MatchResult m = match_anchors(gts, anchors, 0.99);
    EXPECT_EQ(m.positive_count(), 1u);
    EXPECT_EQ(m.anchor_to_gt[17], 0);
    EXPECT_EQ(m.gt_best_anchor[0], 17);
}

TEST(Matching, EmptyGtsAllBackground) {
    const auto anchors = build_anchors(layout_421());
    const MatchResult m = match_anchors({}, anchors, 0.5);
    EXPECT_EQ(m.positive_count(), 0u);
    EXPECT_EQ(m.anchor_to_gt.size(), anchors.size());
    EXPECT_THROW(match_anchors({}, {}, 0.5), ValidationError);
    EXPECT_THROW(match_anchors({}, anchors, 1.0), ValidationError);
}

TEST(Matching, AgreesWithExhaustiveMatcher) {
    Rng rng(11);
    for (int t = 0; t < 300; ++t) {
        std::vector<BBox> anchors, gts;
        for (int i = 0; i < 200; ++i) anchors.push_back(testkit::random_box(rng, 40, t % 2 == 0));
        for (int i = 0; i < 5; ++i) gts.push_back(testkit::random_box(rng, 40, t % 2 == 0));
        if (t % 5 == 0) gts[3] = gts[1];  // duplicate gts compete for the same anchor
        const double thr = rng.uniform(0.1, 0.9);
        const MatchResult m = match_anchors(gts, anchors, thr);
        ASSERT_EQ(m, testkit::ref_match(gts, anchors, thr)) << "case " << t;
        for (std::size_t g = 0; g < gts.size(); ++g) EXPECT_EQ(m.anchor_to_gt[static_cast<std::size_t>(m.gt_best_anchor[g])], static_cast<int>(g));
    }
}

TEST(Nms, SmallCases) {
    const std::vector<BBox> one{{0, 0, 5, 5, 0, 0.3}};
    EXPECT_EQ(nms(one, 0.5).size(), 1u);
    const std::vector<BBox> two{{0, 0, 5, 5, 0, 0.8}, {0, 0, 5, 5, 0, 0.9}};
    const auto k = nms(two, 0.5);
    ASSERT_EQ(k.size(), 1u);
    EXPECT_EQ(*k[0].score, 0.9);
    const std::vector<BBox> classes{{0, 0, 5, 5, 0, 0.8}, {0, 0, 5, 5, 1, 0.9}};
    EXPECT_EQ(nms(classes, 0.5).size(), 2u);
    const std::vector<BBox> unscored{{0, 0, 5, 5, 0, {}}};
    EXPECT_THROW(nms(unscored, 0.5), ValidationError);
}

TEST(Nms, AgreesWithReference) {
    Rng rng(4);
    for (int t = 0; t < 100; ++t) {
        const auto d = scored(rng, 1 + rng.below(300), 100, 2);
        const double thr = rng.uniform(0.1, 0.9);
        const auto kept = nms_indices(d, thr);
        ASSERT_EQ(kept, testkit::ref_nms(d, thr));
        for (std::size_t i = 1; i < kept.size(); ++i) EXPECT_GE(*d[kept[i - 1]].score, *d[kept[i]].score);
        for (std::size_t i = 0; i < kept.size(); ++i)
            for (std::size_t j = i + 1; j < kept.size(); ++j)
                if (d[kept[i]].class_id == d[kept[j]].class_id) {
                    EXPECT_LT(iou(d[kept[i]], d[kept[j]]), thr);
                }
    }
}

namespace {
struct LossCase {
    std::vector<BBox> anchors, gts;
    MatchResult match;
    Predictions pred;
};
LossCase loss_case(std::uint64_t seed) {
    Rng rng(seed);
    LossCase c;
    c.anchors = build_anchors(layout_421());
    c.gts = {BBox{10, 12, 30, 28, 0, {}}, BBox{35, 30, 60, 62, 0, {}}};
    c.match = match_anchors(c.gts, c.anchors, 0.4);
    c.pred.n_anchors = c.anchors.size();
    c.pred.n_logits = 2;
    for (std::size_t i = 0; i < c.anchors.size() * 4; ++i) c.pred.loc.push_back(rng.normal(0, 1.5));
    for (std::size_t i = 0; i < c.anchors.size() * 2; ++i) c.pred.logits.push_back(rng.normal());
    return c;
}
}  // namespace

TEST(Loss, ExactOffsetsZeroLocalisation) {
    LossCase c = loss_case(1);
    for (std::size_t a = 0; a < c.anchors.size(); ++a) {
        const int g = c.match.anchor_to_gt[a];
        if (g == kBackground) continue;
        const auto t = encode_box(c.gts[static_cast<std::size_t>(g)], c.anchors[a]);
        for (int d = 0; d < 4; ++d) c.pred.loc[a * 4 + static_cast<std::size_t>(d)] = t[static_cast<std::size_t>(d)];
    }
    const LossResult r = multibox_loss(c.pred, c.match, c.gts, c.anchors, Variances{});
    EXPECT_EQ(r.loc_loss, 0.0);
    EXPECT_GT(r.conf_loss, 0.0);
    EXPECT_EQ(r.mined_negatives.size(), 3 * r.num_pos);
}

TEST(Loss, NoPositivesNoLoss) {
    LossCase c = loss_case(2);
    const MatchResult none = match_anchors({}, c.anchors, 0.5);
    const LossResult r = multibox_loss(c.pred, none, {}, c.anchors, Variances{});
    EXPECT_EQ(r.loss, 0.0);
    for (double g : r.grad_logits) EXPECT_EQ(g, 0.0);
    for (double g : r.grad_loc) EXPECT_EQ(g, 0.0);
}

TEST(Loss, HardestNegativesAreMined) {
    LossCase c = loss_case(3);
    const LossResult r = multibox_loss(c.pred, c.match, c.gts, c.anchors, Variances{});
    auto bg = [&](std::size_t a) {
        const double z0 = c.pred.logits[2 * a], z1 = c.pred.logits[2 * a + 1];
        return std::log(std::exp(z0) + std::exp(z1)) - z0;
    };
    double weakest_kept = 1e300;
    for (std::size_t a : r.mined_negatives) weakest_kept = std::min(weakest_kept, bg(a));
    for (std::size_t a = 0; a < c.anchors.size(); ++a) {
        if (c.match.anchor_to_gt[a] != kBackground) continue;
        if (std::find(r.mined_negatives.begin(), r.mined_negatives.end(), a) == r.mined_negatives.end()) {
            EXPECT_LE(bg(a), weakest_kept + 1e-12);
        }
    }
}

TEST(Loss, GradientMatchesFiniteDifferences) {
    for (std::uint64_t seed : {4u, 5u, 6u}) {
        LossCase c = loss_case(seed);
        const LossResult r = multibox_loss(c.pred, c.match, c.gts, c.anchors, Variances{});
        const double eps = 1e-5;
        auto at = [&](std::vector<double>& v, std::size_t i, double d) {
            const double o = v[i];
            v[i] = o + d;
            const double l = multibox_loss(c.pred, c.match, c.gts, c.anchors, Variances{}, {}, &r.mined_negatives).loss;
            v[i] = o;
            return l;
        };
        for (std::size_t i = 0; i < c.pred.logits.size(); ++i) {
            const double num = (at(c.pred.logits, i, eps) - at(c.pred.logits, i, -eps)) / (2 * eps);
            EXPECT_NEAR(r.grad_logits[i], num, 1e-7);
        }
        for (std::size_t i = 0; i < c.pred.loc.size(); ++i) {
            const double num = (at(c.pred.loc, i, eps) - at(c.pred.loc, i, -eps)) / (2 * eps);
            EXPECT_NEAR(r.grad_loc[i], num, 1e-6);
        }
    }
}

TEST(Network, OutputCountMatchesAnchors) {
    for (const ModelConfig& cfg : {desk_model_config(), gradcheck_model_config()}) {
        const DetectorParams p = init_params(cfg, 1);
        const Predictions pred = forward(GrayImage(cfg.layout.input_size, cfg.layout.input_size, 0.2), p);
        EXPECT_EQ(pred.n_anchors, build_anchors(cfg.layout).size());
        EXPECT_EQ(pred.loc.size(), 4 * pred.n_anchors);
        EXPECT_EQ(pred.logits.size(), 2 * pred.n_anchors);
    }
    EXPECT_EQ(desk_model_config().layout.anchor_count(), 7936u);
    EXPECT_EQ(large_model_config().layout.anchor_count(), 65536u + 3 * (16384u + 4096 + 1024 + 256 + 64));
}

TEST(Network, ZeroWeightsZeroOutputs) {
    const ModelConfig cfg = desk_model_config();
    Rng rng(1);
    GrayImage img(128, 128);
    for (double& v : img.pixels()) v = rng.uniform();
    const Predictions pred = forward(img, zero_params(cfg));
    for (double v : pred.loc) EXPECT_EQ(v, 0.0);
    for (double v : pred.logits) EXPECT_EQ(v, 0.0);
}

TEST(Network, LinearPathScalesOutputs) {
    ModelConfig cfg = gradcheck_model_config();
    cfg.relu = false;
    cfg.standardize_input = false;
    DetectorParams p = init_params(cfg, 3);  // biases are zero
    Rng rng(9);
    GrayImage img(16, 16);
    for (double& v : img.pixels()) v = rng.uniform(-1, 1);
    const Predictions base = forward(img, p);
    for (double& w : p.tensors[0].data) w *= 2.0;
    const Predictions twice = forward(img, p);
    for (std::size_t i = 0; i < base.loc.size(); ++i) EXPECT_NEAR(twice.loc[i], 2.0 * base.loc[i], 1e-12);
    for (std::size_t i = 0; i < base.logits.size(); ++i) EXPECT_NEAR(twice.logits[i], 2.0 * base.logits[i], 1e-12);
}

TEST(Network, StandardisedInputIgnoresGainAndOffset) {
    const DetectorParams p = init_params(gradcheck_model_config(), 5);
    Rng rng(10);
    GrayImage a(16, 16), b(16, 16);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a.pixels()[i] = rng.uniform();
        b.pixels()[i] = 3.0 * a.pixels()[i] + 7.0;
    }
    const Predictions pa = forward(a, p), pb = forward(b, p);
    for (std::size_t i = 0; i < pa.logits.size(); ++i) EXPECT_NEAR(pa.logits[i], pb.logits[i], 1e-9);
}

TEST(Network, ShapeChecks) {
    const DetectorParams p = init_params(gradcheck_model_config(), 1);
    EXPECT_THROW(forward(GrayImage(17, 16), p), ValidationError);
    DetectorParams bad = p;
    bad.tensors[0].data.pop_back();
    EXPECT_THROW(bad.validate(), ValidationError);
    ModelConfig cfg = gradcheck_model_config();
    cfg.layout.scales[0].grid = 4;
    cfg.layout.scales[1].grid = 2;
    EXPECT_THROW(cfg.validate(), ValidationError);
}

TEST(ModelFile, RoundTripAtSinglePrecision) {
    const DetectorParams p = init_params(desk_model_config(), 12);
    std::stringstream ss;
    write_model(ss, p);
    const std::string bytes = ss.str();
    EXPECT_EQ(bytes.substr(0, 4), "SSDM");
    const DetectorParams back = read_model(ss);
    EXPECT_EQ(back, quantized_f32(p));
    std::stringstream again;
    write_model(again, back);
    EXPECT_EQ(again.str(), bytes);
}

TEST(ModelFile, CorruptFilesRejected) {
    const DetectorParams p = init_params(gradcheck_model_config(), 12);
    std::stringstream ss;
    write_model(ss, p);
    std::string bytes = ss.str();
    std::stringstream cut(bytes.substr(0, bytes.size() - 3));
    EXPECT_THROW(read_model(cut), ValidationError);
    bytes[0] = 'X';
    std::stringstream magic(bytes);
    EXPECT_THROW(read_model(magic), ValidationError);
}

TEST(Inference, PostprocessThresholdsAndClips) {
    const ModelConfig cfg = gradcheck_model_config();
    DetectorParams p = zero_params(cfg);
    // head0 bias: push the foreground logit of ratio-1 anchors only
    auto& hb = p.tensors[static_cast<std::size_t>(2 * cfg.n_stages() + 1)].data;
    hb[5] = 4.0;  // outputs per anchor = 6: loc(4), bg, fg
    const auto anchors = build_anchors(cfg.layout);
    const Predictions pred = forward(GrayImage(16, 16, 0.0), p);
    const auto dets = postprocess(pred, anchors, cfg, DetectConfig{0.6, 0.45});
    ASSERT_FALSE(dets.empty());
    for (const auto& d : dets) {
        EXPECT_NEAR(*d.score, 1.0 / (1.0 + std::exp(-4.0)), 1e-12);
        EXPECT_GE(d.x_min, 0.0);
        EXPECT_LE(d.x_max, 16.0);
    }
    EXPECT_TRUE(postprocess(pred, anchors, cfg, DetectConfig{0.99, 0.45}).empty());
}
