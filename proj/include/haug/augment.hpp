#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "haug/image.hpp"
#include "haug/rng.hpp"

namespace haug {

enum class AugKind { crop_resize, color_jitter, grayscale, blur, hflip, rotation };

const char* aug_kind_name(AugKind k);
AugKind aug_kind_from_name(const std::string& name);

enum class PipelineMode { hierarchical, uniform, hierarchical_strength };

// strength/probability knobs shared by pipeline construction
struct AugConfig {
    float crop_scale_min = 0.2f;
    float crop_scale_max = 1.0f;
    float jitter_prob = 0.8f;
    std::array<float, 4> jitter_deltas = {0.4f, 0.4f, 0.4f, 0.1f};  // b, c, s, hue
    float gray_prob = 0.2f;
    float blur_prob = 0.5f;
    float blur_sigma_min = 0.1f;
    float blur_sigma_max = 2.0f;
    float flip_prob = 0.5f;
    float rotation_prob = 0.5f;
    int out_hw = 32;
};

// one augmentation step with its sampling probability and strength ranges
struct AugStepSpec {
    AugKind kind;
    float probability = 1.0f;
    std::array<float, 4> jitter_deltas = {0, 0, 0, 0};
    float blur_sigma_min = 0, blur_sigma_max = 0;
    float crop_scale_min = 0, crop_scale_max = 0;

    static AugStepSpec make(AugKind kind, const AugConfig& cfg, float strength_scale = 1.0f);
    void validate() const;
};

struct Pipeline {
    std::vector<AugStepSpec> steps;  // applied in order; crop_resize always first
    int out_hw = 32;

    bool has_kind(AugKind k) const;
};

// the four nested compositions T1..T4
struct PipelineSet {
    std::array<Pipeline, 4> stage;
    PipelineMode mode = PipelineMode::hierarchical;
    std::array<AugKind, 4> arrangement{};
    int rotation_from_stage = 0;  // 0 = rotation disabled
};

// crop box as fractions of the source extents
struct CropParams {
    float x = 0, y = 0, h = 1, w = 1;
};

struct ColorJitterParams {
    float b = 1, c = 1, s = 1, h = 0;
    std::array<uint8_t, 4> order = {0, 1, 2, 3};  // sub-op application order
};

// exact parameters of every step applied to one view; probabilistic steps
// that did not fire record identity values so downstream consumers always
// see a well-defined vector
struct AugParams {
    CropParams crop;
    bool flip_applied = false;
    std::optional<ColorJitterParams> jitter;
    bool grayscale_applied = false;
    std::optional<float> blur_sigma;
    std::optional<int> rotation_quarter_turns;

    // fixed flat layout: x, y, h, w, flip, b, c, s, hue, gray, sigma, rot
    std::array<float, 12> to_vector() const;
};

// arrangement must be a permutation of {color_jitter, grayscale, blur, hflip}
PipelineSet build_pipelines(const std::array<AugKind, 4>& arrangement, PipelineMode mode,
                            int rotation_from_stage, const AugConfig& cfg);

AugParams sample_params(const Pipeline& pipeline, int image_h, int image_w, Rng& rng);
Image apply_params(const Image& img, const Pipeline& pipeline, const AugParams& params);

// one random view plus the exact parameters that produced it;
// bit-reproducible for a fixed seed
std::pair<Image, AugParams> sample_view(const Image& img, const Pipeline& pipeline, uint64_t seed);

struct ViewPair {
    Image view_a, view_b;
    AugParams params_a, params_b;
};

// eight views: two independent instances of each stage pipeline
std::array<ViewPair, 4> generate_pairs(const Image& img, const PipelineSet& pipelines,
                                       uint64_t seed);

// normalized distance of (b,c,s,h) from the identity, scaled per-coordinate
// by the configured max deltas; result in [0,1]
float jitter_strength(const ColorJitterParams& jit, const std::array<float, 4>& deltas);
int jitter_strength_bucket(const ColorJitterParams& jit, const std::array<float, 4>& deltas,
                           int n_buckets = 10);

struct RotationDraw {
    bool fired = false;
    int quarter_turns = 0;
};
RotationDraw sample_rotation(Rng& rng, float probability);

// standalone transforms, shared by the augmentation steps and the probes
Image apply_hflip(const Image& img);
Image apply_rotation(const Image& img, int quarter_turns);
Image apply_grayscale(const Image& img);
Image apply_blur3(const Image& img, float sigma);
Image apply_color_jitter(const Image& img, const ColorJitterParams& p);

}  // namespace haug
