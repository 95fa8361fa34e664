#include <doctest.h>

#include <cmath>
#include <limits>

#include "gradcheck.hpp"
#include "haug/model.hpp"
#include "haug/ops.hpp"
#include "haug/rng.hpp"

using namespace haug;

namespace {

ModelConfig small_config() {
    ModelConfig cfg;
    cfg.channels = {4, 8, 16, 32};
    cfg.proj_dim = 16;
    cfg.embed_dim = 8;
    return cfg;
}

Tensor random_batch(int b, int hw, uint64_t seed) {
    Rng rng = make_rng(seed);
    std::vector<scalar> data(static_cast<size_t>(b) * 3 * hw * hw);
    for (auto& v : data) v = static_cast<scalar>(uniform_double(rng));
    return Tensor::from_data({b, 3, hw, hw}, std::move(data));
}

}  // namespace

TEST_SUITE("model") {

    TEST_CASE("default channel plan pools 256-dim features at every tap") {
        ModelConfig cfg;  // spec default plan 32/64/128/256
        cfg.expansion = {ExpandKind::color};
        Model model(cfg, 1);
        Tensor x = random_batch(2, 32, 2);
        NoGradGuard ng;
        for (int stage = 1; stage <= 4; ++stage) {
            Tensor e = model.stage_feature(x, stage, false);
            CHECK(e.shape() == std::vector<int>{2, 256});
        }
    }

    TEST_CASE("identical views give identical features in eval mode") {
        Model model(small_config(), 3);
        Tensor x = random_batch(3, 32, 4);
        NoGradGuard ng;
        for (int stage = 1; stage <= 4; ++stage) {
            Tensor e1 = model.stage_feature(x, stage, false);
            Tensor e2 = model.stage_feature(x, stage, false);
            for (size_t i = 0; i < e1.data().size(); ++i) CHECK(e1.data()[i] == e2.data()[i]);
        }
    }

    TEST_CASE("stage-4 adapter is the identity: e4 equals pooled raw stage-4 output") {
        Model model(small_config(), 5);
        Tensor x = random_batch(2, 32, 6);
        NoGradGuard ng;
        Tensor e4 = model.stage_feature(x, 4, false);
        Tensor h = x;
        for (int i = 0; i < 4; ++i) h = model.stages()[i].forward(h, false);
        Tensor pooled = global_average_pool(h);
        REQUIRE(e4.shape() == pooled.shape());
        for (size_t i = 0; i < e4.data().size(); ++i) CHECK(e4.data()[i] == pooled.data()[i]);
    }

    TEST_CASE("adapters carry 3/2/1/0 blocks and share the tap dimensionality") {
        Model model(small_config(), 7);
        CHECK(model.adapters()[0].blocks.size() == 3);
        CHECK(model.adapters()[1].blocks.size() == 2);
        CHECK(model.adapters()[2].blocks.size() == 1);
        CHECK(model.adapters()[3].blocks.empty());
    }

    TEST_CASE("embed_aug lengths and fixed kind order") {
        ModelConfig cfg = small_config();
        cfg.expansion = {ExpandKind::color, ExpandKind::crop};
        Model model(cfg, 8);
        std::vector<AugParams> params(3);
        params[0].jitter = ColorJitterParams{1.2f, 1.0f, 0.9f, 0.02f, {0, 1, 2, 3}};
        AugParamBatch batch = AugParamBatch::from_params(params);

        NoGradGuard ng;
        Tensor color_only = model.embed_aug(batch, {ExpandKind::color}, 4, false);
        CHECK(color_only.shape() == std::vector<int>{3, cfg.embed_dim});

        Tensor both = model.embed_aug(batch, {ExpandKind::color, ExpandKind::crop}, 4, false);
        CHECK(both.shape() == std::vector<int>{3, 2 * cfg.embed_dim});
        // color segment first
        Tensor head = slice(both, 1, 0, cfg.embed_dim);
        for (size_t i = 0; i < color_only.data().size(); ++i)
            CHECK(head.data()[i] == color_only.data()[i]);

        // deterministic embedding for identical params in eval mode
        Tensor again = model.embed_aug(batch, {ExpandKind::color}, 4, false);
        for (size_t i = 0; i < color_only.data().size(); ++i)
            CHECK(again.data()[i] == color_only.data()[i]);
    }

    TEST_CASE("embed_aug rejects kinds absent from that stage's pipeline") {
        ModelConfig cfg = small_config();
        cfg.expansion = {ExpandKind::color};
        cfg.color_entry_stage = 4;  // arrangement [G,B,F,C]
        Model model(cfg, 9);
        std::vector<AugParams> params(2);
        AugParamBatch batch = AugParamBatch::from_params(params);
        NoGradGuard ng;
        CHECK_THROWS_AS(model.embed_aug(batch, {ExpandKind::color}, 1, false),
                        std::invalid_argument);
        CHECK_NOTHROW(model.embed_aug(batch, {ExpandKind::color}, 4, false));
    }

    TEST_CASE("project input widths follow the expansion setting") {
        ModelConfig plain = small_config();
        Model m0(plain, 10);
        CHECK(plain.head_input_dim(1) == plain.feature_dim());

        ModelConfig expanded = small_config();
        expanded.expansion = {ExpandKind::color};
        Model m1(expanded, 10);
        for (int stage = 1; stage <= 4; ++stage)
            CHECK(expanded.head_input_dim(stage) == expanded.feature_dim() + expanded.embed_dim);

        Tensor x = random_batch(2, 32, 11);
        NoGradGuard ng;
        Tensor e = m0.stage_feature(x, 2, false);
        Tensor z = m0.project(e, Tensor(), 2, false);
        CHECK(z.shape() == std::vector<int>{2, plain.proj_dim});
        // feeding the unexpanded feature to the widened head is an error
        Tensor e1 = m1.stage_feature(x, 2, false);
        CHECK_THROWS_AS(m1.project(e1, Tensor(), 2, false), std::invalid_argument);
    }

    TEST_CASE("color entry stage follows the arrangement in hierarchical mode") {
        ModelConfig cfg = small_config();
        cfg.expansion = {ExpandKind::color};
        derive_entry_stages(cfg, {AugKind::color_jitter, AugKind::grayscale, AugKind::blur,
                                  AugKind::hflip},
                            PipelineMode::hierarchical);
        CHECK(cfg.color_entry_stage == 1);
        for (int s = 1; s <= 4; ++s) CHECK(cfg.active_expansion(s).size() == 1);

        derive_entry_stages(cfg, {AugKind::grayscale, AugKind::blur, AugKind::hflip,
                                  AugKind::color_jitter},
                            PipelineMode::hierarchical);
        CHECK(cfg.color_entry_stage == 4);
        CHECK(cfg.active_expansion(3).empty());
        CHECK(cfg.active_expansion(4).size() == 1);

        derive_entry_stages(cfg, {AugKind::grayscale, AugKind::blur, AugKind::hflip,
                                  AugKind::color_jitter},
                            PipelineMode::uniform);
        CHECK(cfg.color_entry_stage == 1);
    }

    TEST_CASE("parameter count differs only by embedder and widened first head layers") {
        ModelConfig plain = small_config();
        Model m0(plain, 12);
        ModelConfig expanded = small_config();
        expanded.expansion = {ExpandKind::color};
        Model m1(expanded, 12);

        const size_t base = m0.params().trainable_count();
        const size_t with = m1.params().trainable_count();
        // embedder: fc 4->emb (+bias) and its norm
        size_t expect = static_cast<size_t>(4 * expanded.embed_dim + expanded.embed_dim +
                                            2 * expanded.embed_dim);
        // widened fc1 rows at every stage where color is active (entry stage 1)
        for (int s = 1; s <= 4; ++s)
            expect += static_cast<size_t>(expanded.proj_dim) * expanded.embed_dim;
        CHECK(with - base == expect);
    }

    TEST_CASE("stage features ignore later-stage weights") {
        Model model(small_config(), 13);
        Tensor x = random_batch(2, 32, 14);
        NoGradGuard ng;
        Tensor e2_before = model.stage_feature(x, 2, false);
        // zero everything only reachable beyond stage 2
        for (auto& entry : model.params().entries) {
            const bool later = entry.name.rfind("backbone.stage3", 0) == 0 ||
                               entry.name.rfind("backbone.stage4", 0) == 0 ||
                               entry.name.rfind("adapter.3", 0) == 0 ||
                               entry.name.rfind("head.", 0) == 0 ||
                               entry.name.rfind("predictor.", 0) == 0;
            if (later)
                for (auto& v : entry.tensor.data()) v = 0;
        }
        Tensor e2_after = model.stage_feature(x, 2, false);
        for (size_t i = 0; i < e2_before.data().size(); ++i)
            CHECK(e2_before.data()[i] == e2_after.data()[i]);
    }

    TEST_CASE("backbone eval forward never touches adapters, heads, predictor or embedder") {
        ModelConfig cfg = small_config();
        cfg.expansion = {ExpandKind::color};
        Model model(cfg, 15);
        Tensor x = random_batch(2, 32, 16);
        NoGradGuard ng;
        Tensor before = model.backbone_feature(x, false);
        const scalar nan = std::numeric_limits<scalar>::quiet_NaN();
        for (auto& entry : model.params().entries) {
            const bool droppable = entry.name.rfind("adapter.", 0) == 0 ||
                                   entry.name.rfind("head.", 0) == 0 ||
                                   entry.name.rfind("predictor.", 0) == 0 ||
                                   entry.name.rfind("embedder.", 0) == 0;
            if (droppable)
                for (auto& v : entry.tensor.data()) v = nan;
        }
        Tensor after = model.backbone_feature(x, false);
        for (size_t i = 0; i < before.data().size(); ++i) {
            CHECK(std::isfinite(static_cast<double>(after.data()[i])));
            CHECK(before.data()[i] == after.data()[i]);
        }
    }

    TEST_CASE("named parameter inventory exposes the documented names") {
        ModelConfig cfg = small_config();
        cfg.expansion = {ExpandKind::color};
        Model model(cfg, 17);
        auto& reg = model.params();
        CHECK(reg.find("backbone.stage1.conv0.weight") != nullptr);
        CHECK(reg.find("backbone.stage4.bn1.running_var") != nullptr);
        CHECK(reg.find("adapter.1.conv0.weight") != nullptr);
        CHECK(reg.find("head.2.fc1.bias") != nullptr);
        CHECK(reg.find("predictor.3.fc2.weight") != nullptr);
        CHECK(reg.find("embedder.color.fc.weight") != nullptr);
        CHECK(reg.find("embedder.crop.fc.weight") == nullptr);
        CHECK_THROWS_AS(reg.add("head.2.fc1.bias", Tensor::zeros({1}), true, false),
                        std::logic_error);
    }

    TEST_CASE("same seed builds bit-identical parameters") {
        Model a(small_config(), 99);
        Model b(small_config(), 99);
        REQUIRE(a.params().entries.size() == b.params().entries.size());
        for (size_t i = 0; i < a.params().entries.size(); ++i) {
            const auto& ta = a.params().entries[i].tensor;
            const auto& tb = b.params().entries[i].tensor;
            for (size_t j = 0; j < ta.data().size(); ++j) CHECK(ta.data()[j] == tb.data()[j]);
        }
    }

    TEST_CASE("branch symmetry: swapping inputs swaps outputs exactly") {
        ModelConfig cfg = small_config();
        Model model(cfg, 18);
        Tensor va = random_batch(2, 32, 19);
        Tensor vb = random_batch(2, 32, 20);
        NoGradGuard ng;
        Tensor za = model.project(model.stage_feature(va, 3, false), Tensor(), 3, false);
        Tensor zb = model.project(model.stage_feature(vb, 3, false), Tensor(), 3, false);
        Tensor zb2 = model.project(model.stage_feature(vb, 3, false), Tensor(), 3, false);
        Tensor za2 = model.project(model.stage_feature(va, 3, false), Tensor(), 3, false);
        for (size_t i = 0; i < za.data().size(); ++i) {
            CHECK(za.data()[i] == za2.data()[i]);
            CHECK(zb.data()[i] == zb2.data()[i]);
        }
    }
}
