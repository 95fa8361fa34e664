#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "haug/config.hpp"
#include "haug/dataset.hpp"
#include "haug/model.hpp"
#include "haug/objectives.hpp"
#include "haug/optimizer.hpp"

namespace haug {

// everything one stage contributes to a training step
struct StageBundle {
    Tensor e_a, e_b;      // pooled stage features, both branches
    Tensor emb_a, emb_b;  // augmentation embeddings (undefined when disabled)
    Tensor z_a, z_b;      // projections
    Tensor loss;
};

struct TrainResult {
    std::string checkpoint_path;
    std::string metrics_path;
    double final_overall = 0.0;
    int steps = 0;
};

// views for one batch, already grouped per stage and branch
struct BatchViews {
    std::array<std::vector<Image>, 4> view_a, view_b;
    std::array<std::vector<AugParams>, 4> params_a, params_b;
};

BatchViews make_batch_views(const Dataset& ds, const std::vector<int>& sample_indices,
                            const PipelineSet& pipelines, uint64_t global_seed, int epoch);

std::array<StageBundle, 4> forward_stage_bundles(Model& model, const BatchViews& views,
                                                 const RunConfig& cfg, bool training);

// full pretraining loop: augment -> staged forward -> summed loss -> SGD.
// Deterministic for a fixed seed. Emits metrics CSV and checkpoints.
TrainResult run_pretrain(const RunConfig& cfg);

// checkpoint glue: model parameters, running stats and optimizer velocity
void save_model_checkpoint(const std::string& path, const Model& model, const SgdMomentum* opt,
                           uint64_t digest);
void load_model_checkpoint(const std::string& path, Model& model, SgdMomentum* opt,
                           uint64_t expected_digest);

}  // namespace haug
