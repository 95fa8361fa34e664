#pragma once

#include <array>
#include <string>
#include <vector>

#include "haug/config.hpp"
#include "haug/dataset.hpp"
#include "haug/model.hpp"
#include "haug/trainer.hpp"

namespace haug {

struct ProbeResult {
    std::string task;
    double top1 = 0.0;
    int n_classes = 0;
    int n_train = 0;
    int n_test = 0;
    uint64_t seed = 0;
};

// plain softmax classifier trained with hand-rolled gradients; the backbone
// stays frozen by construction
class LinearClassifier {
  public:
    LinearClassifier(int in_dim, int n_classes);

    void train(const std::vector<std::vector<scalar>>& x, const std::vector<int>& y, int epochs,
               float lr, float momentum, int batch_size, uint64_t seed);
    int predict(const std::vector<scalar>& feature) const;
    double accuracy(const std::vector<std::vector<scalar>>& x, const std::vector<int>& y) const;

  private:
    int in_dim_, n_classes_;
    std::vector<scalar> w_, b_, vw_, vb_;
};

// frozen eval-mode stage features, batched
std::vector<std::vector<scalar>> extract_features(Model& model, const std::vector<Image>& images,
                                                  int stage, int batch_size = 256);

uint64_t params_checksum(const Model& model);

ProbeResult linear_probe(Model& model, const Dataset& train, const Dataset& test,
                         const RunConfig& cfg, uint64_t seed);

enum class AugProbeRepr { feature, projection };  // e vs h(e)

// predicts the jitter-strength bucket of a jittered view from the chosen
// representation; per-sample target buckets are balanced by construction
struct AugProbeData {
    std::vector<std::vector<scalar>> train_x, test_x;
    std::vector<int> train_y, test_y;
    std::vector<ColorJitterParams> train_params, test_params;
};

AugProbeData build_aug_probe_data(Model& model, const Dataset& train, const Dataset& test,
                                  AugProbeRepr repr, const RunConfig& cfg, uint64_t seed);
ProbeResult aug_probe(Model& model, const Dataset& train, const Dataset& test, AugProbeRepr repr,
                      const RunConfig& cfg, uint64_t seed);

// mean cosine between frozen features of original and canonically augmented
// images, per stage and kind
struct InvarianceReport {
    std::vector<std::string> kinds;
    std::array<std::vector<double>, 4> stage_rows;  // [stage][kind]

    double at(int stage, const std::string& kind) const;
    std::string to_csv() const;
};

InvarianceReport invariance_report(Model& model, const std::vector<Image>& sample,
                                   const std::vector<std::string>& kinds, const RunConfig& cfg);

struct RotationStudyRow {
    std::string variant;  // "rotation-1", "rotation-4", "none"
    uint64_t seed;
    double top1;
};

struct RotationStudyResult {
    std::vector<RotationStudyRow> rows;
    double mean_rot1 = 0, mean_rot4 = 0, mean_none = 0;
    double rotation_fire_rate = 0;  // empirical, 10^4 draws
    bool direction_ok = false;      // mean_rot4 >= mean_rot1
    std::string to_csv() const;
};

// pretrains rotation-from-stage {1,4} plus a no-rotation control over
// cfg.eval.seeds seeds, probes each, and checks the placement direction
RotationStudyResult rotation_placement_experiment(const RunConfig& base, const std::string& work_dir);

}  // namespace haug
