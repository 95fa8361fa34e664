#include "haug/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "haug/rng.hpp"

namespace haug {

const char* expand_kind_name(ExpandKind k) {
    return k == ExpandKind::color ? "color" : "crop";
}

std::vector<ExpandKind> ModelConfig::active_expansion(int stage) const {
    std::vector<ExpandKind> out;
    for (ExpandKind k : {ExpandKind::color, ExpandKind::crop}) {
        if (std::find(expansion.begin(), expansion.end(), k) == expansion.end()) continue;
        const int entry = k == ExpandKind::color ? color_entry_stage : crop_entry_stage;
        if (entry <= stage) out.push_back(k);
    }
    return out;
}

int ModelConfig::head_input_dim(int stage) const {
    return feature_dim() + embed_dim * static_cast<int>(active_expansion(stage).size());
}

std::string ModelConfig::arch_string() const {
    std::ostringstream os;
    os << "channels=" << channels[0] << "," << channels[1] << "," << channels[2] << ","
       << channels[3] << ";proj=" << proj_dim << ";embed=" << embed_dim << ";in_hw=" << in_hw
       << ";residual=" << (residual ? 1 : 0) << ";expansion=";
    for (ExpandKind k : expansion) os << expand_kind_name(k) << ",";
    os << ";color_entry=" << color_entry_stage << ";crop_entry=" << crop_entry_stage;
    return os.str();
}

void derive_entry_stages(ModelConfig& cfg, const std::array<AugKind, 4>& arrangement,
                         PipelineMode mode) {
    cfg.crop_entry_stage = 1;  // base augmentation, present everywhere
    if (mode == PipelineMode::hierarchical) {
        cfg.color_entry_stage = 1;
        for (int i = 0; i < 4; ++i) {
            if (arrangement[i] == AugKind::color_jitter) cfg.color_entry_stage = i + 1;
        }
    } else {
        cfg.color_entry_stage = 1;
    }
}

void ParamRegistry::add(const std::string& name, Tensor t, bool trainable, bool decay) {
    for (const auto& e : entries) {
        if (e.name == name) throw std::logic_error("duplicate parameter name " + name);
    }
    entries.push_back({name, std::move(t), trainable, decay});
}

Tensor* ParamRegistry::find(const std::string& name) {
    for (auto& e : entries)
        if (e.name == name) return &e.tensor;
    return nullptr;
}

size_t ParamRegistry::trainable_count() const {
    size_t n = 0;
    for (const auto& e : entries)
        if (e.trainable) n += static_cast<size_t>(e.tensor.numel());
    return n;
}

namespace {

Tensor he_normal(const std::vector<int>& shape, int fan_in, Rng& rng) {
    int n = 1;
    for (int d : shape) n *= d;
    const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
    std::vector<scalar> data(n);
    for (auto& v : data) v = static_cast<scalar>(normal_double(rng) * std);
    return Tensor::from_data(shape, std::move(data), true);
}

Conv2dLayer make_conv(int in_ch, int out_ch, int stride, Rng& rng, ParamRegistry& reg,
                      const std::string& name) {
    Conv2dLayer l;
    l.stride = stride;
    l.padding = 1;
    l.weight = he_normal({out_ch, in_ch, 3, 3}, in_ch * 9, rng);
    reg.add(name + ".weight", l.weight, true, true);
    return l;
}

BnLayer make_bn(int ch, ParamRegistry& reg, const std::string& name) {
    BnLayer l;
    l.gamma = Tensor::full({ch}, 1, true);
    l.beta = Tensor::zeros({ch}, true);
    l.stats.running_mean = Tensor::zeros({ch});
    l.stats.running_var = Tensor::full({ch}, 1);
    reg.add(name + ".gamma", l.gamma, true, false);
    reg.add(name + ".beta", l.beta, true, false);
    reg.add(name + ".running_mean", l.stats.running_mean, false, false);
    reg.add(name + ".running_var", l.stats.running_var, false, false);
    return l;
}

ConvBlock make_block(int in_ch, int out_ch, int stride, Rng& rng, ParamRegistry& reg,
                     const std::string& prefix, int idx) {
    ConvBlock b;
    b.conv = make_conv(in_ch, out_ch, stride, rng, reg, prefix + ".conv" + std::to_string(idx));
    b.bn = make_bn(out_ch, reg, prefix + ".bn" + std::to_string(idx));
    return b;
}

LinearLayer make_linear(int in_dim, int out_dim, Rng& rng, ParamRegistry& reg,
                        const std::string& name) {
    LinearLayer l;
    l.w = he_normal({out_dim, in_dim}, in_dim, rng);
    l.b = Tensor::zeros({out_dim}, true);
    reg.add(name + ".weight", l.w, true, true);
    reg.add(name + ".bias", l.b, true, false);
    return l;
}

}  // namespace

Tensor BackboneStage::forward(const Tensor& x, bool training) {
    Tensor h = block0.forward(x, training);
    if (!residual) return block1.forward(h, training);
    // the skip wraps only block1, which preserves shape
    return relu(add(block1.bn.forward(block1.conv.forward(h), training), h));
}

Tensor StageAdapter::forward(const Tensor& x, bool training) {
    Tensor h = x;
    for (auto& b : blocks) h = b.forward(h, training);
    return h;
}

Tensor ProjectionHead::forward(const Tensor& x, bool training) {
    Tensor h = relu(bn1.forward(fc1.forward(x), training));
    h = relu(bn2.forward(fc2.forward(h), training));
    return bn3.forward(fc3.forward(h), training);  // final norm, no rectifier
}

Tensor PredictorMlp::forward(const Tensor& x, bool training) {
    Tensor h = relu(bn1.forward(fc1.forward(x), training));
    return fc2.forward(h);
}

Tensor AugEmbedder::forward(const Tensor& params, bool training) {
    return relu(bn.forward(fc.forward(params), training));
}

AugParamBatch AugParamBatch::from_params(const std::vector<AugParams>& params) {
    const int B = static_cast<int>(params.size());
    std::vector<scalar> color(static_cast<size_t>(B) * 4), crop(static_cast<size_t>(B) * 4);
    for (int i = 0; i < B; ++i) {
        const ColorJitterParams j = params[i].jitter.value_or(ColorJitterParams{});
        color[i * 4 + 0] = static_cast<scalar>(j.b);
        color[i * 4 + 1] = static_cast<scalar>(j.c);
        color[i * 4 + 2] = static_cast<scalar>(j.s);
        color[i * 4 + 3] = static_cast<scalar>(j.h);
        crop[i * 4 + 0] = static_cast<scalar>(params[i].crop.x);
        crop[i * 4 + 1] = static_cast<scalar>(params[i].crop.y);
        crop[i * 4 + 2] = static_cast<scalar>(params[i].crop.h);
        crop[i * 4 + 3] = static_cast<scalar>(params[i].crop.w);
    }
    return {Tensor::from_data({B, 4}, std::move(color)), Tensor::from_data({B, 4}, std::move(crop))};
}

Model::Model(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg) {
    Rng rng = make_rng(mix_seed(seed, 0x4d4f44u));
    const auto& ch = cfg_.channels;

    for (int i = 0; i < 4; ++i) {
        const std::string prefix = "backbone.stage" + std::to_string(i + 1);
        const int in_ch = i == 0 ? 3 : ch[i - 1];
        stages_[i].block0 = make_block(in_ch, ch[i], 2, rng, reg_, prefix, 0);
        stages_[i].block1 = make_block(ch[i], ch[i], 1, rng, reg_, prefix, 1);
        stages_[i].residual = cfg_.residual;
    }

    // adapters bridge stage-i output to the stage-4 feature shape: 3/2/1
    // stride-2 blocks for stages 1..3, identity for stage 4
    for (int i = 0; i < 3; ++i) {
        const std::string prefix = "adapter." + std::to_string(i + 1);
        int idx = 0;
        for (int j = i; j < 3; ++j) {
            adapters_[i].blocks.push_back(
                make_block(ch[j], ch[j + 1], 2, rng, reg_, prefix, idx++));
        }
    }

    for (int i = 0; i < 4; ++i) {
        const std::string prefix = "head." + std::to_string(i + 1);
        const int in_dim = cfg_.head_input_dim(i + 1);
        heads_[i].fc1 = make_linear(in_dim, cfg_.proj_dim, rng, reg_, prefix + ".fc1");
        heads_[i].bn1 = make_bn(cfg_.proj_dim, reg_, prefix + ".bn1");
        heads_[i].fc2 = make_linear(cfg_.proj_dim, cfg_.proj_dim, rng, reg_, prefix + ".fc2");
        heads_[i].bn2 = make_bn(cfg_.proj_dim, reg_, prefix + ".bn2");
        heads_[i].fc3 = make_linear(cfg_.proj_dim, cfg_.proj_dim, rng, reg_, prefix + ".fc3");
        heads_[i].bn3 = make_bn(cfg_.proj_dim, reg_, prefix + ".bn3");
    }

    const int bottleneck = std::max(4, cfg_.proj_dim / 2);
    for (int i = 0; i < 4; ++i) {
        const std::string prefix = "predictor." + std::to_string(i + 1);
        predictors_[i].fc1 = make_linear(cfg_.proj_dim, bottleneck, rng, reg_, prefix + ".fc1");
        predictors_[i].bn1 = make_bn(bottleneck, reg_, prefix + ".bn1");
        predictors_[i].fc2 = make_linear(bottleneck, cfg_.proj_dim, rng, reg_, prefix + ".fc2");
    }

    for (ExpandKind k : cfg_.expansion) {
        const std::string prefix = std::string("embedder.") + expand_kind_name(k);
        AugEmbedder e;
        e.fc = make_linear(4, cfg_.embed_dim, rng, reg_, prefix + ".fc");
        e.bn = make_bn(cfg_.embed_dim, reg_, prefix + ".bn");
        if (k == ExpandKind::color)
            color_embedder_ = std::move(e);
        else
            crop_embedder_ = std::move(e);
    }
}

void Model::zero_grad() {
    for (auto& e : reg_.entries) e.tensor.zero_grad();
}

Tensor Model::stage_feature(const Tensor& batch_nchw, int stage, bool training) {
    if (stage < 1 || stage > 4) throw std::invalid_argument("stage must be 1..4");
    if (batch_nchw.rank() != 4 || batch_nchw.dim(1) != 3 || batch_nchw.dim(2) != cfg_.in_hw ||
        batch_nchw.dim(3) != cfg_.in_hw) {
        throw std::invalid_argument("stage_feature: expected [B,3," + std::to_string(cfg_.in_hw) +
                                    "," + std::to_string(cfg_.in_hw) + "] input, got " +
                                    shape_str(batch_nchw.shape()));
    }
    Tensor h = batch_nchw;
    for (int i = 0; i < stage; ++i) h = stages_[i].forward(h, training);
    h = adapters_[stage - 1].forward(h, training);
    return global_average_pool(h);
}

Tensor Model::embed_aug(const AugParamBatch& batch, const std::vector<ExpandKind>& kinds,
                        int stage, bool training) {
    std::vector<Tensor> parts;
    for (ExpandKind k : {ExpandKind::color, ExpandKind::crop}) {  // fixed kind order
        if (std::find(kinds.begin(), kinds.end(), k) == kinds.end()) continue;
        const auto active = cfg_.active_expansion(stage);
        if (std::find(active.begin(), active.end(), k) == active.end()) {
            throw std::invalid_argument(std::string("embed_aug: kind '") + expand_kind_name(k) +
                                        "' is not embedded at stage " + std::to_string(stage));
        }
        auto& embedder = k == ExpandKind::color ? color_embedder_ : crop_embedder_;
        if (!embedder) throw std::logic_error("embedder not constructed for enabled kind");
        parts.push_back(embedder->forward(k == ExpandKind::color ? batch.color : batch.crop,
                                          training));
    }
    if (parts.empty()) return Tensor();
    if (parts.size() == 1) return parts[0];
    return concat(parts, 1);
}

Tensor Model::project(const Tensor& e, const Tensor& e_aug, int stage, bool training) {
    if (stage < 1 || stage > 4) throw std::invalid_argument("stage must be 1..4");
    Tensor in = e_aug.defined() ? concat({e, e_aug}, 1) : e;
    const int expect = cfg_.head_input_dim(stage);
    if (in.dim(1) != expect) {
        throw std::invalid_argument("project: stage " + std::to_string(stage) + " head expects " +
                                    std::to_string(expect) + " inputs, got " +
                                    std::to_string(in.dim(1)));
    }
    return heads_[stage - 1].forward(in, training);
}

Tensor Model::predict(const Tensor& z, int stage, bool training) {
    return predictors_[stage - 1].forward(z, training);
}

}  // namespace haug
