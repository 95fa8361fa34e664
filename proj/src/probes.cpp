#include "haug/probes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "haug/checkpoint.hpp"
#include "haug/optimizer.hpp"
#include "haug/rng.hpp"

namespace haug {

LinearClassifier::LinearClassifier(int in_dim, int n_classes)
    : in_dim_(in_dim),
      n_classes_(n_classes),
      w_(static_cast<size_t>(n_classes) * in_dim, scalar(0)),
      b_(n_classes, scalar(0)),
      vw_(w_.size(), scalar(0)),
      vb_(b_.size(), scalar(0)) {}

void LinearClassifier::train(const std::vector<std::vector<scalar>>& x, const std::vector<int>& y,
                             int epochs, float lr, float momentum, int batch_size, uint64_t seed) {
    if (x.size() != y.size() || x.empty()) throw std::invalid_argument("classifier: bad training set");
    const int n = static_cast<int>(x.size());
    const int steps_per_epoch = (n + batch_size - 1) / batch_size;
    const int total_steps = epochs * steps_per_epoch;

    std::vector<scalar> logits(n_classes_), probs(n_classes_);
    std::vector<scalar> gw(w_.size()), gb(b_.size());
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);

    int step = 0;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        Rng rng = make_rng(mix_seed(seed, 0x9c0be, static_cast<uint64_t>(epoch)));
        for (int i = n - 1; i > 0; --i) std::swap(order[i], order[uniform_int(rng, i + 1)]);

        for (int start = 0; start < n; start += batch_size) {
            const int count = std::min(batch_size, n - start);
            std::fill(gw.begin(), gw.end(), scalar(0));
            std::fill(gb.begin(), gb.end(), scalar(0));
            const scalar invb = scalar(1) / static_cast<scalar>(count);

            for (int bi = 0; bi < count; ++bi) {
                const int r = order[start + bi];
                const auto& f = x[r];
                for (int c = 0; c < n_classes_; ++c) {
                    const scalar* wr = w_.data() + static_cast<size_t>(c) * in_dim_;
                    scalar acc = b_[c];
                    for (int d = 0; d < in_dim_; ++d) acc += wr[d] * f[d];
                    logits[c] = acc;
                }
                const scalar mx = *std::max_element(logits.begin(), logits.end());
                scalar denom = 0;
                for (int c = 0; c < n_classes_; ++c) {
                    probs[c] = std::exp(logits[c] - mx);
                    denom += probs[c];
                }
                for (int c = 0; c < n_classes_; ++c) {
                    const scalar g = (probs[c] / denom - (c == y[r] ? scalar(1) : scalar(0))) * invb;
                    gb[c] += g;
                    scalar* gwr = gw.data() + static_cast<size_t>(c) * in_dim_;
                    for (int d = 0; d < in_dim_; ++d) gwr[d] += g * f[d];
                }
            }

            const float step_lr = lr_at(step, total_steps, lr, 256);  // no extra batch scaling
            sgd_update(w_, gw, vw_, step_lr, momentum, 0.0f);
            sgd_update(b_, gb, vb_, step_lr, momentum, 0.0f);
            ++step;
        }
    }
}

int LinearClassifier::predict(const std::vector<scalar>& f) const {
    int best = 0;
    scalar best_v = -std::numeric_limits<scalar>::infinity();
    for (int c = 0; c < n_classes_; ++c) {
        const scalar* wr = w_.data() + static_cast<size_t>(c) * in_dim_;
        scalar acc = b_[c];
        for (int d = 0; d < in_dim_; ++d) acc += wr[d] * f[d];
        if (acc > best_v) {
            best_v = acc;
            best = c;
        }
    }
    return best;
}

double LinearClassifier::accuracy(const std::vector<std::vector<scalar>>& x,
                                  const std::vector<int>& y) const {
    int hit = 0;
    for (size_t i = 0; i < x.size(); ++i) hit += predict(x[i]) == y[i] ? 1 : 0;
    return x.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(x.size());
}

std::vector<std::vector<scalar>> extract_features(Model& model, const std::vector<Image>& images,
                                                  int stage, int batch_size) {
    NoGradGuard ng;
    std::vector<std::vector<scalar>> out;
    out.reserve(images.size());
    for (size_t start = 0; start < images.size(); start += static_cast<size_t>(batch_size)) {
        const size_t count = std::min(static_cast<size_t>(batch_size), images.size() - start);
        std::vector<Image> batch(images.begin() + start, images.begin() + start + count);
        Tensor e = model.stage_feature(images_to_tensor(batch), stage, false);
        const int d = e.dim(1);
        for (size_t r = 0; r < count; ++r) {
            out.emplace_back(e.data().begin() + r * d, e.data().begin() + (r + 1) * d);
        }
    }
    return out;
}

uint64_t params_checksum(const Model& model) {
    std::vector<uint8_t> bytes;
    for (const auto& e : model.params().entries) append_tensor(bytes, e.name, e.tensor);
    return (static_cast<uint64_t>(crc32(bytes.data(), bytes.size())) << 32) ^ bytes.size();
}

ProbeResult linear_probe(Model& model, const Dataset& train, const Dataset& test,
                         const RunConfig& cfg, uint64_t seed) {
    const int n_classes = std::max(train.n_classes(), test.n_classes());
    for (uint8_t l : test.labels) {
        if (l >= n_classes)
            throw std::runtime_error("linear_probe: test label exceeds the training class count");
    }
    auto train_x = extract_features(model, train.images, cfg.eval.stage, cfg.eval.probe_batch);
    auto test_x = extract_features(model, test.images, cfg.eval.stage, cfg.eval.probe_batch);
    std::vector<int> train_y(train.labels.begin(), train.labels.end());
    std::vector<int> test_y(test.labels.begin(), test.labels.end());

    LinearClassifier clf(static_cast<int>(train_x[0].size()), n_classes);
    clf.train(train_x, train_y, cfg.eval.probe_epochs, cfg.eval.probe_lr, cfg.eval.probe_momentum,
              cfg.eval.probe_batch, seed);

    ProbeResult r;
    r.task = "linear_probe_stage" + std::to_string(cfg.eval.stage);
    r.top1 = clf.accuracy(test_x, test_y);
    r.n_classes = n_classes;
    r.n_train = static_cast<int>(train.size());
    r.n_test = static_cast<int>(test.size());
    r.seed = seed;
    return r;
}

namespace {

// jitter parameters stratified so the strength buckets are balanced: draw
// box-uniform until the sample lands in the requested bucket
ColorJitterParams stratified_jitter(int target_bucket, int n_buckets,
                                    const std::array<float, 4>& deltas, Rng& rng) {
    ColorJitterParams p;
    for (int attempt = 0; attempt < 100000; ++attempt) {
        p.b = uniform_float(rng, 1.0f - deltas[0], 1.0f + deltas[0]);
        p.c = uniform_float(rng, 1.0f - deltas[1], 1.0f + deltas[1]);
        p.s = uniform_float(rng, 1.0f - deltas[2], 1.0f + deltas[2]);
        p.h = uniform_float(rng, -deltas[3], deltas[3]);
        if (jitter_strength_bucket(p, deltas, n_buckets) == target_bucket) break;
    }
    p.order = {0, 1, 2, 3};
    for (int i = 3; i > 0; --i) std::swap(p.order[i], p.order[uniform_int(rng, i + 1)]);
    return p;
}

struct JitteredSet {
    std::vector<std::vector<scalar>> x;
    std::vector<int> y;
    std::vector<ColorJitterParams> params;
};

JitteredSet jittered_representations(Model& model, const std::vector<Image>& images,
                                     AugProbeRepr repr, const RunConfig& cfg, uint64_t seed) {
    const auto& deltas = cfg.augment.strengths.jitter_deltas;
    const int n_buckets = cfg.eval.n_buckets;
    const int stage = 4;

    JitteredSet set;
    set.x.reserve(images.size());
    std::vector<Image> views;
    views.reserve(images.size());
    std::vector<AugParams> aug_params(images.size());
    for (size_t i = 0; i < images.size(); ++i) {
        Rng rng = make_rng(mix_seed(seed, 0xa06, i));
        const int bucket = static_cast<int>(i) % n_buckets;
        ColorJitterParams p = stratified_jitter(bucket, n_buckets, deltas, rng);
        set.params.push_back(p);
        set.y.push_back(jitter_strength_bucket(p, deltas, n_buckets));
        views.push_back(apply_color_jitter(images[i], p));
        aug_params[i].jitter = p;
    }

    NoGradGuard ng;
    const int batch = cfg.eval.probe_batch;
    for (size_t start = 0; start < views.size(); start += static_cast<size_t>(batch)) {
        const size_t count = std::min(static_cast<size_t>(batch), views.size() - start);
        std::vector<Image> view_batch(views.begin() + start, views.begin() + start + count);
        Tensor e = model.stage_feature(images_to_tensor(view_batch), stage, false);
        Tensor out = e;
        if (repr == AugProbeRepr::projection) {
            const auto kinds = model.config().active_expansion(stage);
            Tensor emb;
            if (!kinds.empty()) {
                std::vector<AugParams> batch_params(aug_params.begin() + start,
                                                    aug_params.begin() + start + count);
                emb = model.embed_aug(AugParamBatch::from_params(batch_params), kinds, stage, false);
            }
            // the contrastive objective consumes projections through row
            // normalization; the probe reads the representation it constrains
            out = l2_normalize(model.project(e, emb, stage, false), 1);
        }
        const int d = out.dim(1);
        for (size_t r = 0; r < count; ++r) {
            set.x.emplace_back(out.data().begin() + r * d, out.data().begin() + (r + 1) * d);
        }
    }
    return set;
}

}  // namespace

AugProbeData build_aug_probe_data(Model& model, const Dataset& train, const Dataset& test,
                                  AugProbeRepr repr, const RunConfig& cfg, uint64_t seed) {
    AugProbeData data;
    JitteredSet tr = jittered_representations(model, train.images, repr, cfg, mix_seed(seed, 1));
    JitteredSet te = jittered_representations(model, test.images, repr, cfg, mix_seed(seed, 2));
    data.train_x = std::move(tr.x);
    data.train_y = std::move(tr.y);
    data.train_params = std::move(tr.params);
    data.test_x = std::move(te.x);
    data.test_y = std::move(te.y);
    data.test_params = std::move(te.params);
    return data;
}

ProbeResult aug_probe(Model& model, const Dataset& train, const Dataset& test, AugProbeRepr repr,
                      const RunConfig& cfg, uint64_t seed) {
    AugProbeData data = build_aug_probe_data(model, train, test, repr, cfg, seed);
    LinearClassifier clf(static_cast<int>(data.train_x[0].size()), cfg.eval.n_buckets);
    clf.train(data.train_x, data.train_y, cfg.eval.probe_epochs, cfg.eval.probe_lr,
              cfg.eval.probe_momentum, cfg.eval.probe_batch, seed);

    ProbeResult r;
    r.task = std::string("aug_probe_") + (repr == AugProbeRepr::feature ? "e" : "he");
    r.top1 = clf.accuracy(data.test_x, data.test_y);
    r.n_classes = cfg.eval.n_buckets;
    r.n_train = static_cast<int>(data.train_x.size());
    r.n_test = static_cast<int>(data.test_x.size());
    r.seed = seed;
    return r;
}

namespace {

Image canonical_transform(const Image& img, const std::string& kind, const AugConfig& strengths) {
    if (kind == "identity") return img;
    if (kind == "flip") return apply_hflip(img);
    if (kind == "grayscale") return apply_grayscale(img);
    if (kind == "blur") return apply_blur3(img, 1.0f);
    if (kind == "rotation") return apply_rotation(img, 1);
    if (kind == "color") {
        ColorJitterParams half;
        half.b = 1.0f + strengths.jitter_deltas[0] * 0.5f;
        half.c = 1.0f + strengths.jitter_deltas[1] * 0.5f;
        half.s = 1.0f + strengths.jitter_deltas[2] * 0.5f;
        half.h = strengths.jitter_deltas[3] * 0.5f;
        return apply_color_jitter(img, half);
    }
    if (kind == "crop") {
        // centered box of half the area, resized back
        const float side = 0.70710678f;
        const float off = (1.0f - side) * 0.5f;
        Image out = crop_resize_bilinear(img, off * static_cast<float>(img.width),
                                         off * static_cast<float>(img.height),
                                         side * static_cast<float>(img.height),
                                         side * static_cast<float>(img.width), img.height,
                                         img.width);
        clamp01(out);
        return out;
    }
    throw std::invalid_argument("invariance_report: unknown kind '" + kind + "'");
}

// cosine after removing the mean feature of the base sample: raw cosines on
// rectified features saturate near 1 for any network (the shared positive
// mean dominates), which would rank a random backbone as maximally invariant
double mean_centered_cosine(const std::vector<std::vector<scalar>>& a,
                            const std::vector<std::vector<scalar>>& b) {
    const size_t d = a[0].size();
    std::vector<double> mu(d, 0.0);
    for (const auto& row : a)
        for (size_t i = 0; i < d; ++i) mu[i] += static_cast<double>(row[i]);
    for (size_t i = 0; i < d; ++i) mu[i] /= static_cast<double>(a.size());

    double total = 0.0;
    for (size_t r = 0; r < a.size(); ++r) {
        double na = 0, nb = 0, dot = 0;
        for (size_t i = 0; i < d; ++i) {
            const double x = static_cast<double>(a[r][i]) - mu[i];
            const double y = static_cast<double>(b[r][i]) - mu[i];
            na += x * x;
            nb += y * y;
            dot += x * y;
        }
        total += dot / (std::sqrt(na) * std::sqrt(nb) + 1e-12);
    }
    return total / static_cast<double>(a.size());
}

}  // namespace

double InvarianceReport::at(int stage, const std::string& kind) const {
    for (size_t k = 0; k < kinds.size(); ++k) {
        if (kinds[k] == kind) return stage_rows[stage - 1][k];
    }
    throw std::invalid_argument("invariance report has no kind '" + kind + "'");
}

std::string InvarianceReport::to_csv() const {
    std::ostringstream os;
    os << "stage";
    for (const auto& k : kinds) os << "," << k;
    os << "\n";
    for (int s = 0; s < 4; ++s) {
        os << (s + 1);
        for (double v : stage_rows[s]) os << "," << v;
        os << "\n";
    }
    return os.str();
}

InvarianceReport invariance_report(Model& model, const std::vector<Image>& sample,
                                   const std::vector<std::string>& kinds, const RunConfig& cfg) {
    InvarianceReport report;
    report.kinds = kinds;

    std::vector<std::vector<Image>> transformed(kinds.size());
    for (size_t k = 0; k < kinds.size(); ++k) {
        transformed[k].reserve(sample.size());
        for (const Image& img : sample)
            transformed[k].push_back(canonical_transform(img, kinds[k], cfg.augment.strengths));
    }

    for (int stage = 1; stage <= 4; ++stage) {
        auto base = extract_features(model, sample, stage, cfg.eval.probe_batch);
        report.stage_rows[stage - 1].resize(kinds.size());
        for (size_t k = 0; k < kinds.size(); ++k) {
            auto aug = extract_features(model, transformed[k], stage, cfg.eval.probe_batch);
            report.stage_rows[stage - 1][k] = mean_centered_cosine(base, aug);
        }
    }
    return report;
}

std::string RotationStudyResult::to_csv() const {
    std::ostringstream os;
    os << "variant,seed,top1\n";
    for (const auto& r : rows) os << r.variant << "," << r.seed << "," << r.top1 << "\n";
    os << "mean,rotation-1," << mean_rot1 << "\n";
    os << "mean,rotation-4," << mean_rot4 << "\n";
    os << "mean,none," << mean_none << "\n";
    os << "rotation_fire_rate,," << rotation_fire_rate << "\n";
    return os.str();
}

RotationStudyResult rotation_placement_experiment(const RunConfig& base,
                                                  const std::string& work_dir) {
    RotationStudyResult result;
    const Dataset train = load_dataset(base.data.train, base.data.hw);
    const Dataset test = load_dataset(base.data.test, base.data.hw);

    struct Variant {
        const char* name;
        int rotation_from_stage;
    };
    const Variant variants[3] = {{"rotation-1", 1}, {"rotation-4", 4}, {"none", 0}};
    double sums[3] = {0, 0, 0};

    for (int v = 0; v < 3; ++v) {
        for (int s = 0; s < base.eval.seeds; ++s) {
            RunConfig cfg = base;
            cfg.augment.rotation_from_stage = variants[v].rotation_from_stage;
            cfg.train.seed = base.train.seed + static_cast<uint64_t>(s);
            cfg.train.out_dir = work_dir + "/" + variants[v].name + "_s" + std::to_string(s);
            TrainResult tr = run_pretrain(cfg);

            Model model(cfg.model_config(), cfg.train.seed);
            load_model_checkpoint(tr.checkpoint_path, model, nullptr, cfg.arch_digest());
            ProbeResult probe = linear_probe(model, train, test, cfg, cfg.train.seed);
            result.rows.push_back({variants[v].name, cfg.train.seed, probe.top1});
            sums[v] += probe.top1;
        }
    }
    const double inv = 1.0 / static_cast<double>(base.eval.seeds);
    result.mean_rot1 = sums[0] * inv;
    result.mean_rot4 = sums[1] * inv;
    result.mean_none = sums[2] * inv;

    Rng rng = make_rng(mix_seed(base.train.seed, 0x40306));
    int fired = 0;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) fired += sample_rotation(rng, base.augment.strengths.rotation_prob).fired;
    result.rotation_fire_rate = static_cast<double>(fired) / draws;

    result.direction_ok = result.mean_rot4 >= result.mean_rot1;
    return result;
}

}  // namespace haug
