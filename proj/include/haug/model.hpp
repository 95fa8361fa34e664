#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "haug/augment.hpp"
#include "haug/ops.hpp"
#include "haug/tensor.hpp"

namespace haug {

// augmentation kinds whose parameters can be embedded and concatenated onto
// view features; fixed concatenation order: color first, then crop
enum class ExpandKind { color, crop };

const char* expand_kind_name(ExpandKind k);

struct ModelConfig {
    std::array<int, 4> channels = {32, 64, 128, 256};
    int proj_dim = 64;
    int embed_dim = 32;
    int in_hw = 32;
    bool residual = false;
    std::vector<ExpandKind> expansion;  // enabled embedders
    // stage (1-based, index 0..3) at which each expandable kind first appears
    // in the pipeline set; derived from arrangement + mode
    int color_entry_stage = 1;
    int crop_entry_stage = 1;

    // kinds embedded at stage i (1..4): enabled and already present in T_i
    std::vector<ExpandKind> active_expansion(int stage) const;
    int head_input_dim(int stage) const;
    int feature_dim() const { return channels[3]; }

    // canonical architecture line; hashed into the checkpoint digest
    std::string arch_string() const;
};

// entry stage of the expandable kinds given the pipeline construction rules
void derive_entry_stages(ModelConfig& cfg, const std::array<AugKind, 4>& arrangement,
                         PipelineMode mode);

struct ParamEntry {
    std::string name;
    Tensor tensor;
    bool trainable = true;   // running stats are not
    bool decay = false;      // weight decay applies to conv/fc weights only
};

struct ParamRegistry {
    std::vector<ParamEntry> entries;

    void add(const std::string& name, Tensor t, bool trainable, bool decay);
    Tensor* find(const std::string& name);
    size_t trainable_count() const;  // total trainable elements
};

struct Conv2dLayer {
    Tensor weight;
    int stride = 1, padding = 1;
    Tensor forward(const Tensor& x) const { return conv2d(x, weight, stride, padding); }
};

struct BnLayer {
    Tensor gamma, beta;
    BatchNormStats stats;
    Tensor forward(const Tensor& x, bool training) {
        return batch_norm(x, gamma, beta, stats, training);
    }
};

struct ConvBlock {
    Conv2dLayer conv;
    BnLayer bn;
    Tensor forward(const Tensor& x, bool training) {
        return relu(bn.forward(conv.forward(x), training));
    }
};

struct LinearLayer {
    Tensor w, b;
    Tensor forward(const Tensor& x) const { return linear(x, w, b); }
};

struct BackboneStage {
    ConvBlock block0;  // stride-2 entry conv
    ConvBlock block1;
    bool residual = false;
    Tensor forward(const Tensor& x, bool training);
};

struct StageAdapter {
    std::vector<ConvBlock> blocks;  // empty for the identity adapter g4
    Tensor forward(const Tensor& x, bool training);
};

struct ProjectionHead {
    LinearLayer fc1, fc2, fc3;
    BnLayer bn1, bn2, bn3;
    Tensor forward(const Tensor& x, bool training);
};

struct PredictorMlp {
    LinearLayer fc1, fc2;
    BnLayer bn1;
    Tensor forward(const Tensor& x, bool training);
};

struct AugEmbedder {
    LinearLayer fc;
    BnLayer bn;
    Tensor forward(const Tensor& params, bool training);
};

// batched per-kind augmentation parameter vectors for one branch
struct AugParamBatch {
    Tensor color;  // [B,4] = (b,c,s,h)
    Tensor crop;   // [B,4] = (x,y,h,w)
    static AugParamBatch from_params(const std::vector<AugParams>& params);
};

class Model {
  public:
    Model(const ModelConfig& cfg, uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    ParamRegistry& params() { return reg_; }
    const ParamRegistry& params() const { return reg_; }
    void zero_grad();

    // f1..f_stage composed with g_stage, then pooled to [B, feature_dim]
    Tensor stage_feature(const Tensor& batch_nchw, int stage, bool training);

    // backbone-only eval path used downstream; equals stage_feature(4) since
    // the stage-4 adapter is the identity
    Tensor backbone_feature(const Tensor& batch_nchw, bool training) {
        return stage_feature(batch_nchw, 4, training);
    }

    // concatenated per-kind embeddings in fixed kind order; kinds must be
    // embedded at this stage per the pipeline construction
    Tensor embed_aug(const AugParamBatch& batch, const std::vector<ExpandKind>& kinds, int stage,
                     bool training);

    // z = h_i([e, e_aug]); e_aug may be an undefined tensor when expansion
    // is disabled at this stage
    Tensor project(const Tensor& e, const Tensor& e_aug, int stage, bool training);

    Tensor predict(const Tensor& z, int stage, bool training);

    std::array<BackboneStage, 4>& stages() { return stages_; }
    std::array<StageAdapter, 4>& adapters() { return adapters_; }
    std::array<ProjectionHead, 4>& heads() { return heads_; }
    std::array<PredictorMlp, 4>& predictors() { return predictors_; }

  private:
    ModelConfig cfg_;
    std::array<BackboneStage, 4> stages_;
    std::array<StageAdapter, 4> adapters_;
    std::array<ProjectionHead, 4> heads_;
    std::array<PredictorMlp, 4> predictors_;
    std::optional<AugEmbedder> color_embedder_;
    std::optional<AugEmbedder> crop_embedder_;
    ParamRegistry reg_;
};

}  // namespace haug
