#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "haug/augment.hpp"
#include "haug/image.hpp"
#include "haug/rng.hpp"

using namespace haug;

namespace {

Image random_image(int h, int w, uint64_t seed) {
    Rng rng = make_rng(seed);
    Image img(h, w);
    for (float& v : img.data) v = uniform_float(rng);
    return img;
}

std::set<AugKind> kinds_of(const Pipeline& p) {
    std::set<AugKind> s;
    for (const auto& step : p.steps) s.insert(step.kind);
    return s;
}

const std::array<AugKind, 4> kCGBF = {AugKind::color_jitter, AugKind::grayscale, AugKind::blur,
                                      AugKind::hflip};

bool images_equal(const Image& a, const Image& b) {
    return a.height == b.height && a.width == b.width && a.data == b.data;
}

}  // namespace

TEST_SUITE("augment") {

    TEST_CASE("add-one nesting for hierarchical mode") {
        PipelineSet set = build_pipelines(kCGBF, PipelineMode::hierarchical, 0, AugConfig{});
        CHECK(kinds_of(set.stage[1]) ==
              std::set<AugKind>{AugKind::crop_resize, AugKind::color_jitter, AugKind::grayscale});
        for (int i = 0; i < 3; ++i) {
            auto a = kinds_of(set.stage[i]);
            auto b = kinds_of(set.stage[i + 1]);
            CHECK(std::includes(b.begin(), b.end(), a.begin(), a.end()));
            CHECK(b.size() == a.size() + 1);
        }
        CHECK(kinds_of(set.stage[0]) ==
              std::set<AugKind>{AugKind::crop_resize, AugKind::color_jitter});
    }

    TEST_CASE("uniform mode shares the full step set across stages") {
        PipelineSet set = build_pipelines(kCGBF, PipelineMode::uniform, 0, AugConfig{});
        for (int i = 1; i < 4; ++i) CHECK(kinds_of(set.stage[i]) == kinds_of(set.stage[0]));
        CHECK(kinds_of(set.stage[0]).size() == 5);
    }

    TEST_CASE("rotation inserted from the requested stage") {
        PipelineSet set = build_pipelines(kCGBF, PipelineMode::hierarchical, 4, AugConfig{});
        for (int i = 0; i < 3; ++i) CHECK_FALSE(set.stage[i].has_kind(AugKind::rotation));
        CHECK(set.stage[3].has_kind(AugKind::rotation));

        PipelineSet all = build_pipelines(kCGBF, PipelineMode::hierarchical, 1, AugConfig{});
        for (int i = 0; i < 4; ++i) CHECK(all.stage[i].has_kind(AugKind::rotation));
    }

    TEST_CASE("duplicate kinds in the arrangement are rejected") {
        std::array<AugKind, 4> dup = {AugKind::color_jitter, AugKind::color_jitter, AugKind::blur,
                                      AugKind::hflip};
        CHECK_THROWS_AS(build_pipelines(dup, PipelineMode::hierarchical, 0, AugConfig{}),
                        std::invalid_argument);
    }

    TEST_CASE("hierarchical strength scales deltas with depth") {
        PipelineSet set =
            build_pipelines(kCGBF, PipelineMode::hierarchical_strength, 0, AugConfig{});
        for (int i = 0; i < 4; ++i) CHECK(kinds_of(set.stage[i]).size() == 5);
        float prev = 0.0f;
        for (int i = 0; i < 4; ++i) {
            for (const auto& step : set.stage[i].steps) {
                if (step.kind == AugKind::color_jitter) {
                    CHECK(step.jitter_deltas[0] == doctest::Approx(0.4f * (i + 1) / 4.0f));
                    CHECK(step.jitter_deltas[0] > prev);
                    prev = step.jitter_deltas[0];
                }
            }
        }
    }

    TEST_CASE("identity parameters reproduce the bilinear-resized input") {
        AugConfig cfg;
        PipelineSet set = build_pipelines(kCGBF, PipelineMode::hierarchical, 0, cfg);
        AugParams identity;
        identity.crop = {0, 0, 1, 1};
        identity.jitter = ColorJitterParams{};  // b=c=s=1, h=0
        identity.blur_sigma = 0.0f;

        Image src32 = random_image(32, 32, 5);
        Image out = apply_params(src32, set.stage[3], identity);
        CHECK(images_equal(out, src32));  // 32x32 full box resolves to exact pixel centers

        Image src48 = random_image(48, 40, 6);
        Image expect = crop_resize_bilinear(src48, 0, 0, 48, 40, 32, 32);
        clamp01(expect);
        Image got = apply_params(src48, set.stage[3], identity);
        CHECK(images_equal(got, expect));
    }

    TEST_CASE("quarter-turn rotation is an involution at two turns and order four") {
        Image img = random_image(32, 32, 7);
        CHECK(images_equal(apply_rotation(apply_rotation(img, 2), 2), img));
        Image r = img;
        for (int i = 0; i < 4; ++i) r = apply_rotation(r, 1);
        CHECK(images_equal(r, img));
    }

    TEST_CASE("horizontal flip is an involution") {
        Image img = random_image(17, 23, 8);
        CHECK(images_equal(apply_hflip(apply_hflip(img)), img));
    }

    TEST_CASE("same seed replays the identical view and params") {
        AugConfig cfg;
        PipelineSet set = build_pipelines(kCGBF, PipelineMode::hierarchical, 4, cfg);
        Image img = random_image(32, 32, 9);
        for (uint64_t seed : {1ULL, 77ULL, 12345ULL}) {
            auto [v1, p1] = sample_view(img, set.stage[3], seed);
            auto [v2, p2] = sample_view(img, set.stage[3], seed);
            CHECK(images_equal(v1, v2));
            CHECK(p1.to_vector() == p2.to_vector());
        }
    }

    TEST_CASE("recorded params re-apply to the identical view") {
        AugConfig cfg;
        PipelineSet set = build_pipelines(kCGBF, PipelineMode::uniform, 2, cfg);
        Image img = random_image(32, 32, 10);
        for (uint64_t seed = 0; seed < 16; ++seed) {
            auto [view, params] = sample_view(img, set.stage[2], seed);
            Image replay = apply_params(img, set.stage[2], params);
            CHECK(images_equal(view, replay));
        }
    }

    TEST_CASE("stage-1 params carry no fields for kinds outside T1") {
        PipelineSet set = build_pipelines(kCGBF, PipelineMode::hierarchical, 0, AugConfig{});
        Image img = random_image(32, 32, 11);
        for (uint64_t seed = 0; seed < 32; ++seed) {
            auto pairs = generate_pairs(img, set, seed);
            for (const AugParams* p : {&pairs[0].params_a, &pairs[0].params_b}) {
                CHECK(p->jitter.has_value());  // color is in T1
                CHECK_FALSE(p->grayscale_applied);
                CHECK_FALSE(p->blur_sigma.has_value());
                CHECK_FALSE(p->flip_applied);
                CHECK_FALSE(p->rotation_quarter_turns.has_value());
            }
        }
    }

    TEST_CASE("uniform mode pairs may carry all fields") {
        PipelineSet set = build_pipelines(kCGBF, PipelineMode::uniform, 0, AugConfig{});
        Image img = random_image(32, 32, 12);
        bool saw_gray_in_stage1 = false, saw_blur_in_stage1 = false;
        for (uint64_t seed = 0; seed < 64; ++seed) {
            auto pairs = generate_pairs(img, set, seed);
            CHECK(pairs[0].params_a.blur_sigma.has_value());  // in pipeline, possibly 0
            saw_gray_in_stage1 |= pairs[0].params_a.grayscale_applied;
            saw_blur_in_stage1 |= *pairs[0].params_a.blur_sigma > 0.0f;
        }
        CHECK(saw_gray_in_stage1);
        CHECK(saw_blur_in_stage1);
    }

    TEST_CASE("generate_pairs replays bit-exactly for a fixed seed") {
        PipelineSet set = build_pipelines(kCGBF, PipelineMode::hierarchical, 0, AugConfig{});
        Image img = random_image(32, 32, 13);
        auto a = generate_pairs(img, set, 999);
        auto b = generate_pairs(img, set, 999);
        for (int i = 0; i < 4; ++i) {
            CHECK(images_equal(a[i].view_a, b[i].view_a));
            CHECK(images_equal(a[i].view_b, b[i].view_b));
            CHECK(a[i].params_a.to_vector() == b[i].params_a.to_vector());
        }
    }

    TEST_CASE("grayscale views satisfy R=G=B and all outputs stay in range") {
        PipelineSet set = build_pipelines(kCGBF, PipelineMode::uniform, 0, AugConfig{});
        Image img = random_image(32, 32, 14);
        int gray_views = 0;
        for (uint64_t seed = 0; seed < 48; ++seed) {
            auto [view, params] = sample_view(img, set.stage[3], seed);
            for (float v : view.data) {
                CHECK(v >= 0.0f);
                CHECK(v <= 1.0f);
            }
            if (params.grayscale_applied) {
                ++gray_views;
                for (int y = 0; y < view.height; ++y)
                    for (int x = 0; x < view.width; ++x) {
                        CHECK(view.at(y, x, 0) == view.at(y, x, 1));
                        CHECK(view.at(y, x, 1) == view.at(y, x, 2));
                    }
            }
        }
        CHECK(gray_views > 0);
    }

    TEST_CASE("crop params respect the box invariants") {
        PipelineSet set = build_pipelines(kCGBF, PipelineMode::hierarchical, 0, AugConfig{});
        Image img = random_image(32, 32, 15);
        for (uint64_t seed = 0; seed < 64; ++seed) {
            auto [view, p] = sample_view(img, set.stage[0], seed);
            CHECK(p.crop.x >= 0.0f);
            CHECK(p.crop.y >= 0.0f);
            CHECK(p.crop.x + p.crop.w <= 1.0f + 1e-6f);
            CHECK(p.crop.y + p.crop.h <= 1.0f + 1e-6f);
            CHECK(p.jitter->b > 0.0f);
            CHECK(p.jitter->c > 0.0f);
            CHECK(p.jitter->s > 0.0f);
        }
    }

    TEST_CASE("jitter strength buckets: identity, max, histogram oracle") {
        const std::array<float, 4> deltas = {0.4f, 0.4f, 0.4f, 0.1f};
        ColorJitterParams identity;
        CHECK(jitter_strength_bucket(identity, deltas, 10) == 0);

        ColorJitterParams maxed{1.4f, 1.4f, 1.4f, 0.1f, {0, 1, 2, 3}};
        CHECK(jitter_strength(maxed, deltas) == doctest::Approx(1.0f));
        CHECK(jitter_strength_bucket(maxed, deltas, 10) == 9);

        // uniform box sampling; histogram must match an independent recomputation
        Rng rng = make_rng(321);
        std::array<int, 10> hist{}, oracle_hist{};
        for (int i = 0; i < 20000; ++i) {
            ColorJitterParams p;
            p.b = uniform_float(rng, 0.6f, 1.4f);
            p.c = uniform_float(rng, 0.6f, 1.4f);
            p.s = uniform_float(rng, 0.6f, 1.4f);
            p.h = uniform_float(rng, -0.1f, 0.1f);
            hist[jitter_strength_bucket(p, deltas, 10)]++;
            // oracle: recompute the normalized distance from scratch
            const double db = (p.b - 1.0) / 0.4, dc = (p.c - 1.0) / 0.4;
            const double ds = (p.s - 1.0) / 0.4, dh = p.h / 0.1;
            const double s = std::sqrt(db * db + dc * dc + ds * ds + dh * dh) / 2.0;
            int bucket = static_cast<int>(s * 10.0);
            bucket = std::min(9, std::max(0, bucket));
            oracle_hist[bucket]++;
        }
        for (int b = 0; b < 10; ++b) CHECK(hist[b] == oracle_hist[b]);
    }

    TEST_CASE("rotation fires at its configured probability with uniform turns") {
        Rng rng = make_rng(777);
        int fired = 0;
        std::array<int, 4> turns{};
        const int n = 10000;
        for (int i = 0; i < n; ++i) {
            RotationDraw d = sample_rotation(rng, 0.5f);
            fired += d.fired ? 1 : 0;
            if (d.fired) turns[d.quarter_turns]++;
        }
        CHECK(std::abs(fired / static_cast<double>(n) - 0.5) <= 0.02);
        for (int t = 0; t < 4; ++t)
            CHECK(std::abs(turns[t] / static_cast<double>(fired) - 0.25) <= 0.03);
    }

    TEST_CASE("params vector layout is x,y,h,w,flip,b,c,s,hue,gray,sigma,rot") {
        AugParams p;
        p.crop = {0.1f, 0.2f, 0.7f, 0.6f};
        p.flip_applied = true;
        p.jitter = ColorJitterParams{1.2f, 0.9f, 1.1f, -0.05f, {0, 1, 2, 3}};
        p.grayscale_applied = true;
        p.blur_sigma = 1.5f;
        p.rotation_quarter_turns = 3;
        const auto v = p.to_vector();
        const std::array<float, 12> expect = {0.1f, 0.2f, 0.7f, 0.6f, 1.0f, 1.2f,
                                              0.9f, 1.1f, -0.05f, 1.0f, 1.5f, 3.0f};
        CHECK(v == expect);
    }

    TEST_CASE("blur preserves constant images and smooths edges") {
        Image flat(8, 8);
        for (float& v : flat.data) v = 0.25f;
        Image b = apply_blur3(flat, 1.0f);
        for (float v : b.data) CHECK(v == doctest::Approx(0.25f));

        Image edge(8, 8);
        for (int y = 0; y < 8; ++y)
            for (int x = 4; x < 8; ++x)
                for (int c = 0; c < 3; ++c) edge.at(y, x, c) = 1.0f;
        Image eb = apply_blur3(edge, 1.0f);
        CHECK(eb.at(4, 3, 0) > 0.0f);
        CHECK(eb.at(4, 4, 0) < 1.0f);
    }
}
