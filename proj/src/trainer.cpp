#include "haug/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <stdexcept>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "haug/checkpoint.hpp"
#include "haug/rng.hpp"

namespace haug {

namespace {

// large activation buffers churn every step; keep them on the heap freelist
// instead of round-tripping through mmap
void tune_allocator_once() {
#if defined(__GLIBC__)
    static std::once_flag flag;
    std::call_once(flag, [] {
        mallopt(M_MMAP_THRESHOLD, 512 * 1024 * 1024);
        mallopt(M_TRIM_THRESHOLD, 512 * 1024 * 1024);
    });
#endif
}

}  // namespace

BatchViews make_batch_views(const Dataset& ds, const std::vector<int>& sample_indices,
                            const PipelineSet& pipelines, uint64_t global_seed, int epoch) {
    BatchViews out;
    for (int s = 0; s < 4; ++s) {
        out.view_a[s].reserve(sample_indices.size());
        out.view_b[s].reserve(sample_indices.size());
    }
    for (int idx : sample_indices) {
        // per-sample stream fixed by (seed, epoch, dataset index): replayable
        // independent of shuffle order
        const uint64_t view_seed = mix_seed(global_seed, static_cast<uint64_t>(epoch),
                                            static_cast<uint64_t>(idx));
        auto pairs = generate_pairs(ds.images[idx], pipelines, view_seed);
        for (int s = 0; s < 4; ++s) {
            out.view_a[s].push_back(std::move(pairs[s].view_a));
            out.view_b[s].push_back(std::move(pairs[s].view_b));
            out.params_a[s].push_back(pairs[s].params_a);
            out.params_b[s].push_back(pairs[s].params_b);
        }
    }
    return out;
}

std::array<StageBundle, 4> forward_stage_bundles(Model& model, const BatchViews& views,
                                                 const RunConfig& cfg, bool training) {
    std::array<StageBundle, 4> bundles;
    const ModelConfig& mcfg = model.config();
    for (int s = 0; s < 4; ++s) {
        const int stage = s + 1;
        StageBundle& b = bundles[s];
        b.e_a = model.stage_feature(images_to_tensor(views.view_a[s]), stage, training);
        b.e_b = model.stage_feature(images_to_tensor(views.view_b[s]), stage, training);
        const auto kinds = mcfg.active_expansion(stage);
        if (!kinds.empty()) {
            b.emb_a = model.embed_aug(AugParamBatch::from_params(views.params_a[s]), kinds, stage,
                                      training);
            b.emb_b = model.embed_aug(AugParamBatch::from_params(views.params_b[s]), kinds, stage,
                                      training);
        }
        b.z_a = model.project(b.e_a, b.emb_a, stage, training);
        b.z_b = model.project(b.e_b, b.emb_b, stage, training);
        if (cfg.train.objective == ObjectiveKind::simsiam) {
            b.loss = simsiam_loss(b.z_a, b.z_b,
                                  [&model, stage, training](const Tensor& z) {
                                      return model.predict(z, stage, training);
                                  });
        } else {
            b.loss = barlow_twins_loss(b.z_a, b.z_b, static_cast<scalar>(cfg.train.lambda));
        }
    }
    return bundles;
}

namespace {

std::vector<std::pair<std::string, Tensor>> collect_tensors(const Model& model,
                                                            const SgdMomentum* opt) {
    std::vector<std::pair<std::string, Tensor>> out;
    for (const auto& e : model.params().entries) out.emplace_back(e.name, e.tensor);
    if (opt) {
        for (auto& kv : opt->state()) out.push_back(kv);
    }
    return out;
}

}  // namespace

void save_model_checkpoint(const std::string& path, const Model& model, const SgdMomentum* opt,
                           uint64_t digest) {
    write_checkpoint(path, digest, collect_tensors(model, opt));
}

void load_model_checkpoint(const std::string& path, Model& model, SgdMomentum* opt,
                           uint64_t expected_digest) {
    CheckpointData data = read_checkpoint(path);
    if (data.digest != expected_digest) {
        throw std::runtime_error("checkpoint " + path + " was written for a different architecture (digest " +
                                 std::to_string(data.digest) + ", expected " +
                                 std::to_string(expected_digest) + ")");
    }
    for (auto& entry : model.params().entries) {
        Tensor* found = data.find(entry.name);
        if (!found) throw std::runtime_error("checkpoint " + path + " is missing tensor " + entry.name);
        if (found->shape() != entry.tensor.shape()) {
            throw std::runtime_error("checkpoint " + path + ": shape mismatch for " + entry.name +
                                     " (file " + shape_str(found->shape()) + ", model " +
                                     shape_str(entry.tensor.shape()) + ")");
        }
        std::copy(found->data().begin(), found->data().end(), entry.tensor.data().begin());
    }
    if (opt) {
        std::vector<std::pair<std::string, Tensor>> optim_entries;
        for (auto& [name, tensor] : data.tensors) {
            if (name.rfind("optim.", 0) == 0) optim_entries.emplace_back(name, tensor);
        }
        opt->load_state(optim_entries);
    }
}

TrainResult run_pretrain(const RunConfig& cfg) {
    tune_allocator_once();
    cfg.validate();
    const Dataset ds = load_dataset(cfg.data.train, cfg.data.hw);
    if (ds.size() < static_cast<size_t>(cfg.train.batch_size))
        throw std::runtime_error("dataset smaller than one batch");

    const PipelineSet pipelines = cfg.pipelines();
    const ModelConfig mcfg = cfg.model_config();
    Model model(mcfg, cfg.train.seed);
    SgdMomentum opt(model.params(), cfg.train.momentum, cfg.train.weight_decay);
    const uint64_t digest = cfg.arch_digest();

    std::filesystem::create_directories(cfg.train.out_dir);
    const std::string metrics_path = cfg.train.out_dir + "/metrics.csv";
    const std::string ckpt_path = cfg.train.out_dir + "/checkpoint.bin";
    std::ofstream csv(metrics_path, std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot write metrics CSV " + metrics_path);
    csv << "epoch,step,lr,L1,L2,L3,L4,L_overall\n";

    const int n = static_cast<int>(ds.size());
    const int batches_per_epoch = n / cfg.train.batch_size + (n % cfg.train.batch_size >= 2 ? 1 : 0);
    const int total_steps = cfg.train.epochs * batches_per_epoch;

    TrainResult result;
    result.metrics_path = metrics_path;
    result.checkpoint_path = ckpt_path;

    int step = 0;
    double last_overall = 0.0;
    for (int epoch = 0; epoch < cfg.train.epochs; ++epoch) {
        // seeded epoch reshuffle
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng = make_rng(mix_seed(cfg.train.seed, 0x5f0fu, static_cast<uint64_t>(epoch)));
        for (int i = n - 1; i > 0; --i) std::swap(order[i], order[uniform_int(shuffle_rng, i + 1)]);

        for (int start = 0; start < n; start += cfg.train.batch_size) {
            const int count = std::min(cfg.train.batch_size, n - start);
            if (count < 2) break;  // batch statistics need at least two views
            std::vector<int> batch(order.begin() + start, order.begin() + start + count);

            BatchViews views = make_batch_views(ds, batch, pipelines, cfg.train.seed, epoch);
            auto bundles = forward_stage_bundles(model, views, cfg, true);
            LossReport report = overall_loss(
                {bundles[0].loss, bundles[1].loss, bundles[2].loss, bundles[3].loss},
                cfg.train.objective, cfg.train.stage_weights);

            last_overall = static_cast<double>(report.overall.item());
            if (!std::isfinite(last_overall)) {
                const std::string snapshot = cfg.train.out_dir + "/nan_snapshot.bin";
                save_model_checkpoint(snapshot, model, &opt, digest);
                throw std::runtime_error("pretraining diverged: non-finite loss at epoch " +
                                         std::to_string(epoch) + " step " + std::to_string(step) +
                                         "; diagnostic snapshot written to " + snapshot);
            }

            const float lr = lr_at(step, total_steps, cfg.train.base_lr, cfg.train.batch_size);
            model.zero_grad();
            backward(report.overall);
            opt.step(lr);

            csv << epoch << "," << step << "," << lr;
            for (int s = 0; s < 4; ++s) csv << "," << static_cast<double>(report.per_stage[s].item());
            csv << "," << last_overall << "\n";
            ++step;
        }
        if (cfg.train.ckpt_every > 0 && (epoch + 1) % cfg.train.ckpt_every == 0) {
            save_model_checkpoint(cfg.train.out_dir + "/ckpt_epoch" + std::to_string(epoch + 1) +
                                      ".bin",
                                  model, &opt, digest);
        }
    }
    csv.flush();
    if (!csv) throw std::runtime_error("failed writing metrics CSV " + metrics_path);
    save_model_checkpoint(ckpt_path, model, &opt, digest);
    result.final_overall = last_overall;
    result.steps = step;
    return result;
}

}  // namespace haug
