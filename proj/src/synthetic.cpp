#include "haug/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "haug/rng.hpp"

namespace haug {

namespace {

constexpr int kShapeCount = 5;
const char* kShapeNames[kShapeCount] = {"circle", "triangle", "bar_h", "bar_v", "ring"};

float shape_sdf(int shape, float u, float v, float s) {
    switch (shape) {
        case 0:  // circle
            return std::sqrt(u * u + v * v) - s * 0.62f;
        case 1: {  // upward triangle
            const float base = v - s * 0.50f;
            const float sides = 0.866f * std::fabs(u) - 0.5f * v - s * 0.45f;
            return std::max(base, sides);
        }
        case 2:  // horizontal bar
            return std::max(std::fabs(u) - s * 0.95f, std::fabs(v) - s * 0.30f);
        case 3:  // vertical bar
            return std::max(std::fabs(u) - s * 0.30f, std::fabs(v) - s * 0.95f);
        default:  // ring
            return std::fabs(std::sqrt(u * u + v * v) - s * 0.55f) - s * 0.20f;
    }
}

}  // namespace

Image render_synthetic_image(int class_id, int classes, uint64_t seed, uint64_t index, int hw) {
    (void)classes;
    const int shape = class_id / 2;
    const bool warm = (class_id % 2) == 0;
    Rng rng = make_rng(mix_seed(seed, index, 0xda7a));

    // background: arbitrary dim hue plus mild pixel noise
    float bg_r, bg_g, bg_b;
    hsv_to_rgb(uniform_float(rng), uniform_float(rng, 0.0f, 0.25f), uniform_float(rng, 0.08f, 0.35f),
               bg_r, bg_g, bg_b);

    // shape color: hue locked to the family band; value range overlaps across
    // families so luminance alone cannot separate them
    float hue = warm ? uniform_float(rng, -0.06f, 0.10f) : uniform_float(rng, 0.50f, 0.68f);
    hue -= std::floor(hue);
    float fg_r, fg_g, fg_b;
    hsv_to_rgb(hue, uniform_float(rng, 0.65f, 1.0f), uniform_float(rng, 0.45f, 0.95f), fg_r, fg_g,
               fg_b);

    const float scale = static_cast<float>(hw) / 32.0f;
    const float cx = uniform_float(rng, 0.38f, 0.62f) * static_cast<float>(hw);
    const float cy = uniform_float(rng, 0.38f, 0.62f) * static_cast<float>(hw);
    const float size = uniform_float(rng, 9.0f, 13.0f) * scale;
    const float theta = uniform_float(rng, -0.14f, 0.14f);  // ~8 degrees of jitter
    const float ct = std::cos(theta), st = std::sin(theta);
    const float soft = 1.2f * scale;

    Image img(hw, hw);
    for (int y = 0; y < hw; ++y) {
        for (int x = 0; x < hw; ++x) {
            const float noise = static_cast<float>(normal_double(rng)) * 0.02f;
            const float px = static_cast<float>(x) + 0.5f - cx;
            const float py = static_cast<float>(y) + 0.5f - cy;
            const float u = ct * px + st * py;
            const float v = -st * px + ct * py;
            const float d = shape_sdf(shape, u, v, size);
            const float alpha = std::clamp(0.5f - d / soft, 0.0f, 1.0f);
            img.at(y, x, 0) = bg_r + (fg_r - bg_r) * alpha + noise;
            img.at(y, x, 1) = bg_g + (fg_g - bg_g) * alpha + noise;
            img.at(y, x, 2) = bg_b + (fg_b - bg_b) * alpha + noise;
        }
    }
    clamp01(img);
    return img;
}

SyntheticManifest synthetic_manifest(int n, int classes, uint64_t seed, int hw) {
    if (classes < 2 || classes > 2 * kShapeCount)
        throw std::invalid_argument("synthetic generator supports 2.." +
                                    std::to_string(2 * kShapeCount) + " classes");
    if (n < classes) throw std::invalid_argument("need n >= classes");
    SyntheticManifest m;
    m.n = n;
    m.classes = classes;
    m.hw = hw;
    m.seed = seed;
    for (int id = 0; id < classes; ++id) {
        m.class_table.push_back({id, kShapeNames[id / 2], id % 2 == 0 ? "warm" : "cool"});
    }
    for (int id = 0; id + 1 < classes; id += 2) {
        m.color_critical_pairs.emplace_back(id, id + 1);  // same shape, hue-only difference
    }
    return m;
}

SyntheticManifest generate_synthetic(int n, int classes, uint64_t seed, const std::string& path,
                                     int hw) {
    SyntheticManifest manifest = synthetic_manifest(n, classes, seed, hw);

    Dataset ds;
    ds.hw = hw;
    ds.images.reserve(n);
    ds.labels.reserve(n);
    for (int i = 0; i < n; ++i) {
        const int label = i % classes;
        ds.labels.push_back(static_cast<uint8_t>(label));
        ds.images.push_back(render_synthetic_image(label, classes, seed, static_cast<uint64_t>(i), hw));
    }
    save_dataset(ds, path);

    nlohmann::json j;
    j["n"] = manifest.n;
    j["classes"] = manifest.classes;
    j["hw"] = manifest.hw;
    j["seed"] = manifest.seed;
    j["class_table"] = nlohmann::json::array();
    for (const auto& c : manifest.class_table)
        j["class_table"].push_back({{"id", c.id}, {"shape", c.shape}, {"family", c.family}});
    j["color_critical_pairs"] = manifest.color_critical_pairs;
    std::ofstream mf(path + ".manifest.json", std::ios::trunc);
    if (!mf) throw std::runtime_error("cannot write manifest beside " + path);
    mf << j.dump(2) << "\n";
    return manifest;
}

}  // namespace haug
