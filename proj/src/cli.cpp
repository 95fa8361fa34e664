#include "haug/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "haug/checkpoint.hpp"
#include "haug/config.hpp"
#include "haug/probes.hpp"
#include "haug/synthetic.hpp"
#include "haug/trainer.hpp"

namespace haug {

namespace {

const char* kUsage = R"(haug - hierarchical augmentation invariance toolkit

usage: haug <subcommand> [options]

subcommands:
  gen-data           --n N --classes K --seed S --out FILE [--hw 32]
  pretrain           --config FILE [--set section.key=value]... [--seed S] [--out DIR]
                     [--ckpt-every E]
  linear-probe       --config FILE --ckpt FILE [--set ...] [--seed S]
  aug-probe          --config FILE --ckpt FILE --repr e|he [--set ...] [--seed S]
  invariance-report  --config FILE --ckpt FILE [--kinds k1,k2,...] [--check] [--out FILE]
                     [--random-init]
  rotation-study     --config FILE [--set ...] [--out DIR]

common options:
  --config FILE      line-based config with [data] [model] [augment] [train] [eval]
  --set sec.key=val  override a config value (repeatable)
  --seed S           override train.seed
  --out PATH         output directory (pretrain, rotation-study) or file
)";

struct ParsedArgs {
    std::string subcommand;
    std::optional<std::string> config_path;
    std::vector<std::string> overrides;
    std::optional<uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> ckpt;
    std::optional<std::string> repr;
    std::optional<std::string> kinds;
    bool check = false;
    bool random_init = false;
    std::optional<int> n, classes, hw, ckpt_every;
};

int usage_error(const std::string& msg) {
    std::cerr << "error: " << msg << "\n\n" << kUsage;
    return 2;
}

bool parse_args(int argc, const char* const* argv, ParsedArgs& out, std::string& err) {
    out.subcommand = argv[1];
    for (int i = 2; i < argc; ++i) {
        const std::string a = argv[i];
        auto next = [&](const char* flag) -> std::optional<std::string> {
            if (i + 1 >= argc) {
                err = std::string(flag) + " needs a value";
                return std::nullopt;
            }
            return std::string(argv[++i]);
        };
        if (a == "--config") {
            auto v = next("--config");
            if (!v) return false;
            out.config_path = *v;
        } else if (a == "--set") {
            auto v = next("--set");
            if (!v) return false;
            out.overrides.push_back(*v);
        } else if (a == "--seed") {
            auto v = next("--seed");
            if (!v) return false;
            out.seed = std::stoull(*v);
        } else if (a == "--out") {
            auto v = next("--out");
            if (!v) return false;
            out.out = *v;
        } else if (a == "--ckpt") {
            auto v = next("--ckpt");
            if (!v) return false;
            out.ckpt = *v;
        } else if (a == "--repr") {
            auto v = next("--repr");
            if (!v) return false;
            out.repr = *v;
        } else if (a == "--kinds") {
            auto v = next("--kinds");
            if (!v) return false;
            out.kinds = *v;
        } else if (a == "--check") {
            out.check = true;
        } else if (a == "--random-init") {
            out.random_init = true;
        } else if (a == "--n") {
            auto v = next("--n");
            if (!v) return false;
            out.n = std::stoi(*v);
        } else if (a == "--classes") {
            auto v = next("--classes");
            if (!v) return false;
            out.classes = std::stoi(*v);
        } else if (a == "--hw") {
            auto v = next("--hw");
            if (!v) return false;
            out.hw = std::stoi(*v);
        } else if (a == "--ckpt-every") {
            auto v = next("--ckpt-every");
            if (!v) return false;
            out.ckpt_every = std::stoi(*v);
        } else {
            err = "unknown flag '" + a + "'";
            return false;
        }
    }
    return true;
}

RunConfig load_config(const ParsedArgs& args) {
    RunConfig cfg = args.config_path ? parse_config_file(*args.config_path) : RunConfig{};
    for (const auto& ov : args.overrides) apply_override(cfg, ov);
    if (args.seed) cfg.train.seed = *args.seed;
    if (args.ckpt_every) cfg.train.ckpt_every = *args.ckpt_every;
    cfg.validate();
    return cfg;
}

Model load_model_for_eval(const ParsedArgs& args, const RunConfig& cfg) {
    Model model(cfg.model_config(), cfg.train.seed);
    if (args.random_init) return model;
    if (!args.ckpt) throw std::runtime_error("--ckpt is required (or pass --random-init)");
    load_model_checkpoint(*args.ckpt, model, nullptr, cfg.arch_digest());
    return model;
}

int cmd_gen_data(const ParsedArgs& args) {
    if (!args.n || !args.classes || !args.out) {
        throw std::runtime_error("gen-data needs --n, --classes and --out");
    }
    const uint64_t seed = args.seed.value_or(1);
    const int hw = args.hw.value_or(32);
    SyntheticManifest m = generate_synthetic(*args.n, *args.classes, seed, *args.out, hw);
    std::cout << "wrote " << m.n << " records (" << m.classes << " classes, " << m.hw << "x" << m.hw
              << ", seed " << m.seed << ") to " << *args.out << "\n"
              << "manifest: " << *args.out << ".manifest.json with " << m.color_critical_pairs.size()
              << " color-critical pairs\n";
    return 0;
}

int cmd_pretrain(const ParsedArgs& args) {
    RunConfig cfg = load_config(args);
    if (args.out) cfg.train.out_dir = *args.out;
    TrainResult r = run_pretrain(cfg);
    std::cout << "pretrain done: " << r.steps << " steps, final overall loss " << r.final_overall
              << "\ncheckpoint: " << r.checkpoint_path << "\nmetrics: " << r.metrics_path << "\n";
    return 0;
}

int cmd_linear_probe(const ParsedArgs& args) {
    RunConfig cfg = load_config(args);
    Model model = load_model_for_eval(args, cfg);
    const Dataset train = load_dataset(cfg.data.train, cfg.data.hw);
    const Dataset test = load_dataset(cfg.data.test, cfg.data.hw);
    ProbeResult r = linear_probe(model, train, test, cfg, cfg.train.seed);
    std::cout << r.task << ": top1 " << r.top1 << " (" << r.n_classes << " classes, " << r.n_train
              << " train / " << r.n_test << " test, seed " << r.seed << ")\n";
    return 0;
}

int cmd_aug_probe(const ParsedArgs& args) {
    RunConfig cfg = load_config(args);
    if (!args.repr || (*args.repr != "e" && *args.repr != "he")) {
        throw std::runtime_error("aug-probe needs --repr e|he");
    }
    Model model = load_model_for_eval(args, cfg);
    const Dataset train = load_dataset(cfg.data.train, cfg.data.hw);
    const Dataset test = load_dataset(cfg.data.test, cfg.data.hw);
    const AugProbeRepr repr =
        *args.repr == "e" ? AugProbeRepr::feature : AugProbeRepr::projection;
    ProbeResult r = aug_probe(model, train, test, repr, cfg, cfg.train.seed);
    std::cout << r.task << ": top1 " << r.top1 << " (" << r.n_classes << " buckets, random "
              << 1.0 / r.n_classes << ", seed " << r.seed << ")\n";
    return 0;
}

int cmd_invariance_report(const ParsedArgs& args) {
    RunConfig cfg = load_config(args);
    Model model = load_model_for_eval(args, cfg);
    const Dataset test = load_dataset(cfg.data.test, cfg.data.hw);
    std::vector<Image> sample(test.images.begin(),
                              test.images.begin() +
                                  std::min<size_t>(test.images.size(), cfg.eval.invariance_images));

    std::vector<std::string> kinds = {"identity", "crop", "color", "grayscale", "blur", "flip"};
    if (args.kinds) {
        kinds.clear();
        std::string cur;
        for (char c : *args.kinds + ",") {
            if (c == ',') {
                if (!cur.empty()) kinds.push_back(cur);
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
    }
    InvarianceReport report = invariance_report(model, sample, kinds, cfg);
    const std::string csv = report.to_csv();
    if (args.out) {
        std::ofstream f(*args.out, std::ios::trunc);
        f << csv;
        std::cout << "invariance report written to " << *args.out << "\n";
    } else {
        std::cout << csv;
    }

    if (args.check) {
        // locality direction: the deepest stage should be more flip-invariant
        // than the first
        const double s4 = report.at(4, "flip"), s1 = report.at(1, "flip");
        std::cout << "flip invariance stage4 " << s4 << " vs stage1 " << s1 << ": "
                  << (s4 > s1 ? "ok" : "FAILED") << "\n";
        if (s4 <= s1) return 1;
    }
    return 0;
}

int cmd_rotation_study(const ParsedArgs& args) {
    RunConfig cfg = load_config(args);
    const std::string work = args.out.value_or("rotation_study");
    std::filesystem::create_directories(work);
    RotationStudyResult r = rotation_placement_experiment(cfg, work);
    std::ofstream f(work + "/rotation_study.csv", std::ios::trunc);
    f << r.to_csv();
    std::cout << r.to_csv();
    std::cout << "direction rotation-4 >= rotation-1: " << (r.direction_ok ? "ok" : "FAILED")
              << "\n";
    return r.direction_ok ? 0 : 1;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
    if (argc < 2) {
        std::cerr << kUsage;
        return 2;
    }
    ParsedArgs args;
    std::string err;
    if (!parse_args(argc, argv, args, err)) return usage_error(err);

    try {
        if (args.subcommand == "gen-data") return cmd_gen_data(args);
        if (args.subcommand == "pretrain") return cmd_pretrain(args);
        if (args.subcommand == "linear-probe") return cmd_linear_probe(args);
        if (args.subcommand == "aug-probe") return cmd_aug_probe(args);
        if (args.subcommand == "invariance-report") return cmd_invariance_report(args);
        if (args.subcommand == "rotation-study") return cmd_rotation_study(args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return usage_error("unknown subcommand '" + args.subcommand + "'");
}

}  // namespace haug
