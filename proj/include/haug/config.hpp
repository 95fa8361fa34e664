#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "haug/augment.hpp"
#include "haug/model.hpp"
#include "haug/objectives.hpp"

namespace haug {

// every key has a documented default; the parser rejects unknown keys and
// names the offending line
struct RunConfig {
    struct {
        std::string train;          // dataset path used for pretraining / probe training
        std::string test;           // held-out dataset path for probe evaluation
        int hw = 32;                // record resolution
    } data;

    struct {
        std::array<int, 4> channels = {32, 64, 128, 256};
        int proj_dim = 64;
        int embed_dim = 32;
        bool residual = false;
    } model;

    struct {
        std::array<AugKind, 4> arrangement = {AugKind::color_jitter, AugKind::grayscale,
                                              AugKind::blur, AugKind::hflip};
        PipelineMode mode = PipelineMode::hierarchical;
        int rotation_from_stage = 0;  // 0 = off
        AugConfig strengths;          // out_hw mirrors data.hw
    } augment;

    struct {
        float base_lr = 0.05f;
        int batch_size = 64;
        int epochs = 30;
        float weight_decay = 1e-4f;
        float momentum = 0.9f;
        uint64_t seed = 1;
        ObjectiveKind objective = ObjectiveKind::simsiam;
        float lambda = 0.005f;
        std::vector<ExpandKind> expansion = {ExpandKind::color};
        std::array<float, 4> stage_weights = {1, 1, 1, 1};
        int ckpt_every = 0;  // epochs between checkpoints; 0 = final only
        std::string out_dir = ".";
    } train;

    struct {
        int probe_epochs = 30;
        float probe_lr = 0.1f;
        float probe_momentum = 0.9f;
        int probe_batch = 128;
        int n_buckets = 10;
        int invariance_images = 256;
        int stage = 4;
        int seeds = 3;  // direction checks compare means over this many seeds
    } eval;

    ModelConfig model_config() const;
    PipelineSet pipelines() const;
    uint64_t arch_digest() const;
    void validate() const;
};

RunConfig parse_config_file(const std::string& path);

// "--set section.key=value" override, applied after file parsing
void apply_override(RunConfig& cfg, const std::string& assignment);

// single key assignment; `where` names the source for error messages
void set_config_key(RunConfig& cfg, const std::string& section, const std::string& key,
                    const std::string& value, const std::string& where);

}  // namespace haug
