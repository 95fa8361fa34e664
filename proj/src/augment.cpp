#include "haug/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace haug {

const char* aug_kind_name(AugKind k) {
    switch (k) {
        case AugKind::crop_resize: return "crop_resize";
        case AugKind::color_jitter: return "color_jitter";
        case AugKind::grayscale: return "grayscale";
        case AugKind::blur: return "blur";
        case AugKind::hflip: return "hflip";
        case AugKind::rotation: return "rotation";
    }
    return "?";
}

AugKind aug_kind_from_name(const std::string& name) {
    if (name == "crop_resize" || name == "crop") return AugKind::crop_resize;
    if (name == "color_jitter" || name == "color" || name == "C") return AugKind::color_jitter;
    if (name == "grayscale" || name == "gray" || name == "G") return AugKind::grayscale;
    if (name == "blur" || name == "B") return AugKind::blur;
    if (name == "hflip" || name == "flip" || name == "F") return AugKind::hflip;
    if (name == "rotation" || name == "R") return AugKind::rotation;
    throw std::invalid_argument("unknown augmentation kind '" + name + "'");
}

AugStepSpec AugStepSpec::make(AugKind kind, const AugConfig& cfg, float strength_scale) {
    AugStepSpec s;
    s.kind = kind;
    switch (kind) {
        case AugKind::crop_resize:
            s.probability = 1.0f;
            // weaker = crop closer to the full image
            s.crop_scale_min = 1.0f - (1.0f - cfg.crop_scale_min) * strength_scale;
            s.crop_scale_max = cfg.crop_scale_max;
            break;
        case AugKind::color_jitter:
            s.probability = cfg.jitter_prob;
            for (int i = 0; i < 4; ++i) s.jitter_deltas[i] = cfg.jitter_deltas[i] * strength_scale;
            break;
        case AugKind::grayscale:
            s.probability = cfg.gray_prob;
            break;
        case AugKind::blur:
            s.probability = cfg.blur_prob;
            s.blur_sigma_min = cfg.blur_sigma_min;
            s.blur_sigma_max = cfg.blur_sigma_min +
                               (cfg.blur_sigma_max - cfg.blur_sigma_min) * strength_scale;
            break;
        case AugKind::hflip:
            s.probability = cfg.flip_prob;
            break;
        case AugKind::rotation:
            s.probability = cfg.rotation_prob;
            break;
    }
    s.validate();
    return s;
}

void AugStepSpec::validate() const {
    if (probability < 0.0f || probability > 1.0f)
        throw std::invalid_argument("augmentation probability out of [0,1]");
    if (kind == AugKind::color_jitter) {
        for (int i = 0; i < 3; ++i) {
            if (jitter_deltas[i] < 0.0f || jitter_deltas[i] >= 1.0f)
                throw std::invalid_argument("jitter multiplier delta must be in [0,1)");
        }
        if (jitter_deltas[3] < 0.0f || jitter_deltas[3] > 0.5f)
            throw std::invalid_argument("hue delta must be in [0,0.5]");
    }
    if (kind == AugKind::blur && (blur_sigma_min <= 0.0f || blur_sigma_max < blur_sigma_min))
        throw std::invalid_argument("degenerate blur sigma range");
    if (kind == AugKind::crop_resize &&
        (crop_scale_min <= 0.0f || crop_scale_max < crop_scale_min || crop_scale_max > 1.0f))
        throw std::invalid_argument("degenerate crop scale range");
}

bool Pipeline::has_kind(AugKind k) const {
    for (const auto& s : steps)
        if (s.kind == k) return true;
    return false;
}

PipelineSet build_pipelines(const std::array<AugKind, 4>& arrangement, PipelineMode mode,
                            int rotation_from_stage, const AugConfig& cfg) {
    const std::array<AugKind, 4> expected = {AugKind::color_jitter, AugKind::grayscale,
                                             AugKind::blur, AugKind::hflip};
    for (AugKind want : expected) {
        int count = 0;
        for (AugKind k : arrangement)
            if (k == want) ++count;
        if (count != 1) {
            throw std::invalid_argument(
                std::string("arrangement must contain each of color_jitter/grayscale/blur/hflip "
                            "exactly once; ") +
                aug_kind_name(want) + " appears " + std::to_string(count) + " times");
        }
    }
    if (rotation_from_stage < 0 || rotation_from_stage > 4)
        throw std::invalid_argument("rotation_from_stage must be 0 (off) or 1..4");

    PipelineSet set;
    set.mode = mode;
    set.arrangement = arrangement;
    set.rotation_from_stage = rotation_from_stage;
    for (int i = 0; i < 4; ++i) {
        Pipeline& p = set.stage[i];
        p.out_hw = cfg.out_hw;
        const float strength =
            mode == PipelineMode::hierarchical_strength ? static_cast<float>(i + 1) / 4.0f : 1.0f;
        p.steps.push_back(AugStepSpec::make(AugKind::crop_resize, cfg, strength));
        const int kinds_here = mode == PipelineMode::hierarchical ? i + 1 : 4;
        for (int j = 0; j < kinds_here; ++j)
            p.steps.push_back(AugStepSpec::make(arrangement[j], cfg, strength));
        if (rotation_from_stage > 0 && i + 1 >= rotation_from_stage)
            p.steps.push_back(AugStepSpec::make(AugKind::rotation, cfg, strength));
    }
    return set;
}

RotationDraw sample_rotation(Rng& rng, float probability) {
    RotationDraw d;
    d.fired = bernoulli(rng, probability);
    d.quarter_turns = d.fired ? uniform_int(rng, 4) : 0;
    return d;
}

namespace {

CropParams sample_crop(const AugStepSpec& spec, int image_h, int image_w, Rng& rng) {
    const float H = static_cast<float>(image_h);
    const float W = static_cast<float>(image_w);
    const float area = H * W;
    const float log_lo = std::log(3.0f / 4.0f);
    const float log_hi = std::log(4.0f / 3.0f);
    for (int attempt = 0; attempt < 10; ++attempt) {
        const float frac = uniform_float(rng, spec.crop_scale_min, spec.crop_scale_max);
        const float ratio = std::exp(uniform_float(rng, log_lo, log_hi));
        const float w_px = std::sqrt(area * frac * ratio);
        const float h_px = std::sqrt(area * frac / ratio);
        if (w_px <= W && h_px <= H) {
            const float x0 = uniform_float(rng, 0.0f, W - w_px);
            const float y0 = uniform_float(rng, 0.0f, H - h_px);
            return {x0 / W, y0 / H, h_px / H, w_px / W};
        }
    }
    // fallback: centered square of the shorter side
    const float side = std::min(H, W);
    return {(W - side) * 0.5f / W, (H - side) * 0.5f / H, side / H, side / W};
}

ColorJitterParams sample_jitter(const AugStepSpec& spec, Rng& rng) {
    ColorJitterParams p;
    if (!bernoulli(rng, spec.probability)) return p;  // identity, canonical order
    p.b = uniform_float(rng, 1.0f - spec.jitter_deltas[0], 1.0f + spec.jitter_deltas[0]);
    p.c = uniform_float(rng, 1.0f - spec.jitter_deltas[1], 1.0f + spec.jitter_deltas[1]);
    p.s = uniform_float(rng, 1.0f - spec.jitter_deltas[2], 1.0f + spec.jitter_deltas[2]);
    p.h = uniform_float(rng, -spec.jitter_deltas[3], spec.jitter_deltas[3]);
    // Fisher-Yates over the four sub-ops
    p.order = {0, 1, 2, 3};
    for (int i = 3; i > 0; --i) std::swap(p.order[i], p.order[uniform_int(rng, i + 1)]);
    return p;
}

}  // namespace

AugParams sample_params(const Pipeline& pipeline, int image_h, int image_w, Rng& rng) {
    AugParams params;
    for (const auto& step : pipeline.steps) {
        switch (step.kind) {
            case AugKind::crop_resize:
                params.crop = sample_crop(step, image_h, image_w, rng);
                break;
            case AugKind::color_jitter:
                params.jitter = sample_jitter(step, rng);
                break;
            case AugKind::grayscale:
                params.grayscale_applied = bernoulli(rng, step.probability);
                break;
            case AugKind::blur:
                params.blur_sigma = bernoulli(rng, step.probability)
                                        ? uniform_float(rng, step.blur_sigma_min, step.blur_sigma_max)
                                        : 0.0f;
                break;
            case AugKind::hflip:
                params.flip_applied = bernoulli(rng, step.probability);
                break;
            case AugKind::rotation:
                params.rotation_quarter_turns = sample_rotation(rng, step.probability).quarter_turns;
                break;
        }
    }
    return params;
}

Image apply_hflip(const Image& img) {
    Image out(img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
    return out;
}

Image apply_rotation(const Image& img, int quarter_turns) {
    const int k = ((quarter_turns % 4) + 4) % 4;
    if (k == 0) return img;
    const int h = img.height, w = img.width;
    Image out = (k == 2) ? Image(h, w) : Image(w, h);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            int ny = 0, nx = 0;
            if (k == 1) {  // 90 degrees counterclockwise
                ny = w - 1 - x;
                nx = y;
            } else if (k == 2) {
                ny = h - 1 - y;
                nx = w - 1 - x;
            } else {
                ny = x;
                nx = h - 1 - y;
            }
            for (int c = 0; c < 3; ++c) out.at(ny, nx, c) = img.at(y, x, c);
        }
    }
    return out;
}

Image apply_grayscale(const Image& img) {
    Image out(img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const float g = luma(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2));
            out.at(y, x, 0) = out.at(y, x, 1) = out.at(y, x, 2) = g;
        }
    return out;
}

Image apply_blur3(const Image& img, float sigma) {
    if (sigma <= 0.0f) return img;
    const float e = std::exp(-1.0f / (2.0f * sigma * sigma));
    const float norm = 1.0f / (1.0f + 2.0f * e);
    const float w0 = norm, w1 = e * norm;
    const int h = img.height, w = img.width;
    Image tmp(h, w), out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int xl = std::max(0, x - 1), xr = std::min(w - 1, x + 1);
            for (int c = 0; c < 3; ++c)
                tmp.at(y, x, c) =
                    w1 * img.at(y, xl, c) + w0 * img.at(y, x, c) + w1 * img.at(y, xr, c);
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int yu = std::max(0, y - 1), yd = std::min(h - 1, y + 1);
            for (int c = 0; c < 3; ++c)
                out.at(y, x, c) =
                    w1 * tmp.at(yu, x, c) + w0 * tmp.at(y, x, c) + w1 * tmp.at(yd, x, c);
        }
    return out;
}

Image apply_color_jitter(const Image& img, const ColorJitterParams& p) {
    Image out = img;
    for (uint8_t op : p.order) {
        switch (op) {
            case 0:  // brightness
                if (p.b != 1.0f) {
                    for (float& v : out.data) v *= p.b;
                    clamp01(out);
                }
                break;
            case 1:  // contrast around the mean gray level
                if (p.c != 1.0f) {
                    double acc = 0.0;
                    for (int y = 0; y < out.height; ++y)
                        for (int x = 0; x < out.width; ++x)
                            acc += luma(out.at(y, x, 0), out.at(y, x, 1), out.at(y, x, 2));
                    const float gm =
                        static_cast<float>(acc / (static_cast<double>(out.height) * out.width));
                    for (float& v : out.data) v = gm + (v - gm) * p.c;
                    clamp01(out);
                }
                break;
            case 2:  // saturation toward per-pixel gray
                if (p.s != 1.0f) {
                    for (int y = 0; y < out.height; ++y)
                        for (int x = 0; x < out.width; ++x) {
                            const float g =
                                luma(out.at(y, x, 0), out.at(y, x, 1), out.at(y, x, 2));
                            for (int c = 0; c < 3; ++c)
                                out.at(y, x, c) = g + (out.at(y, x, c) - g) * p.s;
                        }
                    clamp01(out);
                }
                break;
            default:  // hue rotation in HSV
                if (p.h != 0.0f) {
                    for (int y = 0; y < out.height; ++y)
                        for (int x = 0; x < out.width; ++x) {
                            float hh, ss, vv;
                            rgb_to_hsv(out.at(y, x, 0), out.at(y, x, 1), out.at(y, x, 2), hh, ss, vv);
                            hsv_to_rgb(hh + p.h, ss, vv, out.at(y, x, 0), out.at(y, x, 1),
                                       out.at(y, x, 2));
                        }
                    clamp01(out);
                }
                break;
        }
    }
    return out;
}

Image apply_params(const Image& img, const Pipeline& pipeline, const AugParams& params) {
    if (img.empty()) throw std::invalid_argument("apply_params: empty image");
    Image out = img;
    for (const auto& step : pipeline.steps) {
        switch (step.kind) {
            case AugKind::crop_resize: {
                const auto& c = params.crop;
                out = crop_resize_bilinear(out, c.x * static_cast<float>(out.width),
                                           c.y * static_cast<float>(out.height),
                                           c.h * static_cast<float>(out.height),
                                           c.w * static_cast<float>(out.width), pipeline.out_hw,
                                           pipeline.out_hw);
                clamp01(out);
                break;
            }
            case AugKind::color_jitter:
                if (params.jitter) out = apply_color_jitter(out, *params.jitter);
                break;
            case AugKind::grayscale:
                if (params.grayscale_applied) out = apply_grayscale(out);
                break;
            case AugKind::blur:
                if (params.blur_sigma && *params.blur_sigma > 0.0f)
                    out = apply_blur3(out, *params.blur_sigma);
                break;
            case AugKind::hflip:
                if (params.flip_applied) out = apply_hflip(out);
                break;
            case AugKind::rotation:
                if (params.rotation_quarter_turns && *params.rotation_quarter_turns != 0)
                    out = apply_rotation(out, *params.rotation_quarter_turns);
                break;
        }
    }
    return out;
}

std::pair<Image, AugParams> sample_view(const Image& img, const Pipeline& pipeline, uint64_t seed) {
    if (img.empty()) throw std::invalid_argument("sample_view: empty image");
    Rng rng = make_rng(seed);
    AugParams params = sample_params(pipeline, img.height, img.width, rng);
    return {apply_params(img, pipeline, params), params};
}

std::array<ViewPair, 4> generate_pairs(const Image& img, const PipelineSet& pipelines,
                                       uint64_t seed) {
    std::array<ViewPair, 4> out;
    for (int i = 0; i < 4; ++i) {
        auto [va, pa] = sample_view(img, pipelines.stage[i], mix_seed(seed, i + 1, 0));
        auto [vb, pb] = sample_view(img, pipelines.stage[i], mix_seed(seed, i + 1, 1));
        out[i] = ViewPair{std::move(va), std::move(vb), pa, pb};
    }
    return out;
}

std::array<float, 12> AugParams::to_vector() const {
    const ColorJitterParams jid;
    const ColorJitterParams& j = jitter ? *jitter : jid;
    return {crop.x,
            crop.y,
            crop.h,
            crop.w,
            flip_applied ? 1.0f : 0.0f,
            j.b,
            j.c,
            j.s,
            j.h,
            grayscale_applied ? 1.0f : 0.0f,
            blur_sigma ? *blur_sigma : 0.0f,
            rotation_quarter_turns ? static_cast<float>(*rotation_quarter_turns) : 0.0f};
}

float jitter_strength(const ColorJitterParams& jit, const std::array<float, 4>& deltas) {
    const std::array<float, 4> diff = {jit.b - 1.0f, jit.c - 1.0f, jit.s - 1.0f, jit.h};
    float acc = 0.0f;
    for (int i = 0; i < 4; ++i) {
        const float scaled = deltas[i] > 0.0f ? diff[i] / deltas[i] : 0.0f;
        acc += scaled * scaled;
    }
    return std::sqrt(acc) * 0.5f;  // scaled coordinates live in [-1,1]^4
}

int jitter_strength_bucket(const ColorJitterParams& jit, const std::array<float, 4>& deltas,
                           int n_buckets) {
    const float s = jitter_strength(jit, deltas);
    const int b = static_cast<int>(std::floor(s * static_cast<float>(n_buckets)));
    return std::clamp(b, 0, n_buckets - 1);
}

}  // namespace haug
