#include "haug/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "haug/checkpoint.hpp"

namespace haug {

ModelConfig RunConfig::model_config() const {
    ModelConfig mc;
    mc.channels = model.channels;
    mc.proj_dim = model.proj_dim;
    mc.embed_dim = model.embed_dim;
    mc.residual = model.residual;
    mc.in_hw = data.hw;
    mc.expansion = train.expansion;
    derive_entry_stages(mc, augment.arrangement, augment.mode);
    return mc;
}

PipelineSet RunConfig::pipelines() const {
    AugConfig strengths = augment.strengths;
    strengths.out_hw = data.hw;
    return build_pipelines(augment.arrangement, augment.mode, augment.rotation_from_stage,
                           strengths);
}

uint64_t RunConfig::arch_digest() const { return fnv1a64(model_config().arch_string()); }

void RunConfig::validate() const {
    if (train.batch_size < 2) throw std::invalid_argument("train.batch_size must be >= 2");
    if (train.epochs < 1) throw std::invalid_argument("train.epochs must be >= 1");
    for (int c : model.channels)
        if (c < 1) throw std::invalid_argument("model.channels must be positive");
    if (eval.stage < 1 || eval.stage > 4) throw std::invalid_argument("eval.stage must be 1..4");
    if (eval.n_buckets < 2) throw std::invalid_argument("eval.n_buckets must be >= 2");
    pipelines();  // arrangement / strength validation
}

namespace {

int parse_int(const std::string& v, const std::string& where) {
    try {
        size_t used = 0;
        const int out = std::stoi(v, &used);
        if (used != v.size()) throw std::invalid_argument("");
        return out;
    } catch (...) {
        throw std::invalid_argument(where + ": expected an integer, got '" + v + "'");
    }
}

uint64_t parse_u64(const std::string& v, const std::string& where) {
    try {
        size_t used = 0;
        const uint64_t out = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument("");
        return out;
    } catch (...) {
        throw std::invalid_argument(where + ": expected an unsigned integer, got '" + v + "'");
    }
}

float parse_float(const std::string& v, const std::string& where) {
    try {
        size_t used = 0;
        const float out = std::stof(v, &used);
        if (used != v.size()) throw std::invalid_argument("");
        return out;
    } catch (...) {
        throw std::invalid_argument(where + ": expected a number, got '" + v + "'");
    }
}

bool parse_bool(const std::string& v, const std::string& where) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument(where + ": expected a boolean, got '" + v + "'");
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

template <size_t N>
std::array<float, N> parse_float_list(const std::string& v, const std::string& where) {
    const auto parts = split(v, ',');
    if (parts.size() != N)
        throw std::invalid_argument(where + ": expected " + std::to_string(N) + " comma-separated values");
    std::array<float, N> out;
    for (size_t i = 0; i < N; ++i) out[i] = parse_float(trim(parts[i]), where);
    return out;
}

std::array<int, 4> parse_int4(const std::string& v, const std::string& where) {
    const auto parts = split(v, ',');
    if (parts.size() != 4) throw std::invalid_argument(where + ": expected 4 comma-separated values");
    std::array<int, 4> out;
    for (size_t i = 0; i < 4; ++i) out[i] = parse_int(trim(parts[i]), where);
    return out;
}

}  // namespace

void set_config_key(RunConfig& cfg, const std::string& section, const std::string& key,
                    const std::string& value, const std::string& where) {
    if (section == "data") {
        if (key == "train") cfg.data.train = value;
        else if (key == "test") cfg.data.test = value;
        else if (key == "hw") cfg.data.hw = parse_int(value, where);
        else throw std::invalid_argument(where + ": unknown key '" + key + "' in [data]");
        return;
    }
    if (section == "model") {
        if (key == "channels") cfg.model.channels = parse_int4(value, where);
        else if (key == "proj_dim") cfg.model.proj_dim = parse_int(value, where);
        else if (key == "embed_dim") cfg.model.embed_dim = parse_int(value, where);
        else if (key == "residual") cfg.model.residual = parse_bool(value, where);
        else throw std::invalid_argument(where + ": unknown key '" + key + "' in [model]");
        return;
    }
    if (section == "augment") {
        auto& a = cfg.augment;
        if (key == "arrangement") {
            const auto parts = split(value, ',');
            if (parts.size() != 4) throw std::invalid_argument(where + ": arrangement needs 4 kinds");
            for (size_t i = 0; i < 4; ++i) a.arrangement[i] = aug_kind_from_name(trim(parts[i]));
        } else if (key == "mode") {
            if (value == "hierarchical") a.mode = PipelineMode::hierarchical;
            else if (value == "uniform") a.mode = PipelineMode::uniform;
            else if (value == "hierarchical_strength") a.mode = PipelineMode::hierarchical_strength;
            else throw std::invalid_argument(where + ": unknown mode '" + value + "'");
        } else if (key == "rotation_from_stage") a.rotation_from_stage = parse_int(value, where);
        else if (key == "crop_scale") {
            const auto r = parse_float_list<2>(value, where);
            a.strengths.crop_scale_min = r[0];
            a.strengths.crop_scale_max = r[1];
        } else if (key == "jitter_prob") a.strengths.jitter_prob = parse_float(value, where);
        else if (key == "jitter_deltas") a.strengths.jitter_deltas = parse_float_list<4>(value, where);
        else if (key == "gray_prob") a.strengths.gray_prob = parse_float(value, where);
        else if (key == "blur_prob") a.strengths.blur_prob = parse_float(value, where);
        else if (key == "blur_sigma") {
            const auto r = parse_float_list<2>(value, where);
            a.strengths.blur_sigma_min = r[0];
            a.strengths.blur_sigma_max = r[1];
        } else if (key == "flip_prob") a.strengths.flip_prob = parse_float(value, where);
        else if (key == "rotation_prob") a.strengths.rotation_prob = parse_float(value, where);
        else throw std::invalid_argument(where + ": unknown key '" + key + "' in [augment]");
        return;
    }
    if (section == "train") {
        auto& t = cfg.train;
        if (key == "base_lr") t.base_lr = parse_float(value, where);
        else if (key == "batch_size") t.batch_size = parse_int(value, where);
        else if (key == "epochs") t.epochs = parse_int(value, where);
        else if (key == "weight_decay") t.weight_decay = parse_float(value, where);
        else if (key == "momentum") t.momentum = parse_float(value, where);
        else if (key == "seed") t.seed = parse_u64(value, where);
        else if (key == "objective") t.objective = objective_from_name(value);
        else if (key == "lambda") t.lambda = parse_float(value, where);
        else if (key == "expansion") {
            t.expansion.clear();
            if (value != "none" && !value.empty()) {
                for (const auto& part : split(value, ',')) {
                    const std::string p = trim(part);
                    if (p == "color") t.expansion.push_back(ExpandKind::color);
                    else if (p == "crop") t.expansion.push_back(ExpandKind::crop);
                    else throw std::invalid_argument(where + ": unknown expansion kind '" + p + "'");
                }
            }
        } else if (key == "stage_weights") t.stage_weights = parse_float_list<4>(value, where);
        else if (key == "ckpt_every") t.ckpt_every = parse_int(value, where);
        else if (key == "out_dir") t.out_dir = value;
        else throw std::invalid_argument(where + ": unknown key '" + key + "' in [train]");
        return;
    }
    if (section == "eval") {
        auto& e = cfg.eval;
        if (key == "probe_epochs") e.probe_epochs = parse_int(value, where);
        else if (key == "probe_lr") e.probe_lr = parse_float(value, where);
        else if (key == "probe_momentum") e.probe_momentum = parse_float(value, where);
        else if (key == "probe_batch") e.probe_batch = parse_int(value, where);
        else if (key == "n_buckets") e.n_buckets = parse_int(value, where);
        else if (key == "invariance_images") e.invariance_images = parse_int(value, where);
        else if (key == "stage") e.stage = parse_int(value, where);
        else if (key == "seeds") e.seeds = parse_int(value, where);
        else throw std::invalid_argument(where + ": unknown key '" + key + "' in [eval]");
        return;
    }
    throw std::invalid_argument(where + ": unknown section '" + section + "'");
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path);
    RunConfig cfg;
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string where = path + ":" + std::to_string(line_no);
        std::string s = trim(line);
        if (s.empty() || s[0] == '#' || s[0] == ';') continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw std::invalid_argument(where + ": unterminated section header");
            section = trim(s.substr(1, s.size() - 2));
            continue;
        }
        const size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(where + ": expected 'key = value'");
        const std::string key = trim(s.substr(0, eq));
        const std::string value = trim(s.substr(eq + 1));
        if (section.empty())
            throw std::invalid_argument(where + ": key '" + key + "' before any [section]");
        set_config_key(cfg, section, key, value, where);
    }
    return cfg;
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
    const size_t eq = assignment.find('=');
    if (eq == std::string::npos)
        throw std::invalid_argument("--set expects section.key=value, got '" + assignment + "'");
    const std::string dotted = trim(assignment.substr(0, eq));
    const std::string value = trim(assignment.substr(eq + 1));
    const size_t dot = dotted.find('.');
    if (dot == std::string::npos)
        throw std::invalid_argument("--set expects section.key=value, got '" + assignment + "'");
    set_config_key(cfg, dotted.substr(0, dot), dotted.substr(dot + 1), value,
                   "--set " + assignment);
}

}  // namespace haug
