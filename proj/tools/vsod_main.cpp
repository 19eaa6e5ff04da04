// vsod: data generation, training, evaluation, ablation and inference.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "vsod/harness/ablation.hpp"
#include "vsod/harness/checkpoint.hpp"
#include "vsod/harness/config.hpp"
#include "vsod/harness/trainer.hpp"
#include "vsod/syndata.hpp"

namespace fs = std::filesystem;
using namespace vsod;
using namespace vsod::harness;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string fusion_mode;
    std::string out;
    std::optional<int> steps;
    std::string data;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "flat JSON key/value config file");
    cmd->add_option("--seed", c.seed, "random seed");
    cmd->add_option("--fusion-mode", c.fusion_mode, "cag_dde|cag_only|dde_only|concat|add|mul");
    cmd->add_option("--out", c.out, "output directory");
    cmd->add_option("--steps", c.steps, "number of optimizer steps");
    cmd->add_option("--data", c.data, "dataset directory");
}

TrainConfig resolve(const Common& c) {
    TrainConfig cfg = c.config.empty() ? TrainConfig{} : load_config(c.config);
    if (c.seed) cfg.seed = *c.seed;
    if (!c.fusion_mode.empty()) cfg.fusion_mode = parse_fusion_mode(c.fusion_mode);
    if (!c.out.empty()) cfg.out_dir = c.out;
    if (c.steps) cfg.max_steps = *c.steps;
    if (!c.data.empty()) cfg.train_data = c.data;
    cfg.validate();
    return cfg;
}

syndata::ShapeKind parse_kind(const std::string& s) {
    if (s == "disk") return syndata::ShapeKind::Disk;
    if (s == "rectangle") return syndata::ShapeKind::Rectangle;
    if (s == "polygon") return syndata::ShapeKind::Polygon;
    throw ConfigError("unknown object kind: " + s);
}

syndata::SceneConfig scene_preset(const std::string& name) {
    if (name == "default") return {};
    if (name == "low-contrast") return syndata::low_contrast_scene();
    if (name == "fast-motion") return syndata::fast_motion_scene();
    if (name == "multi-object") return syndata::multi_object_scene();
    if (name == "unreliable-flow") return syndata::unreliable_flow_scene();
    throw ConfigError("unknown preset: " + name);
}

// Flat JSON overrides for a scene; unknown keys are errors.
void apply_scene_config(const std::string& path, syndata::SceneConfig& sc) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& ex) {
        throw ConfigError(std::string("config is not valid JSON: ") + ex.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a flat key/value object");
    for (const auto& [key, v] : j.items()) {
        try {
            if (key == "height") sc.height = v.get<int>();
            else if (key == "width") sc.width = v.get<int>();
            else if (key == "num_objects") sc.num_objects = v.get<int>();
            else if (key == "kinds") {
                sc.kinds.clear();
                for (const auto& k : v) sc.kinds.push_back(parse_kind(k.get<std::string>()));
            }
            else if (key == "min_size") sc.min_size = v.get<double>();
            else if (key == "max_size") sc.max_size = v.get<double>();
            else if (key == "distractor_scale") sc.distractor_scale = v.get<double>();
            else if (key == "min_speed") sc.min_speed = v.get<double>();
            else if (key == "max_speed") sc.max_speed = v.get<double>();
            else if (key == "distractor_motion") sc.distractor_motion = v.get<bool>();
            else if (key == "camera_speed") sc.camera_speed = v.get<double>();
            else if (key == "contrast") sc.contrast = v.get<double>();
            else if (key == "texture_seed") sc.texture_seed = v.get<std::uint64_t>();
            else if (key == "length") sc.length = v.get<int>();
            else if (key == "corrupt_fraction") sc.corrupt_fraction = v.get<double>();
            else if (key == "corruption") {
                const auto s = v.get<std::string>();
                if (s == "none") sc.corruption = syndata::FlowCorruption::None;
                else if (s == "noise") sc.corruption = syndata::FlowCorruption::Noise;
                else if (s == "zero") sc.corruption = syndata::FlowCorruption::Zero;
                else throw ConfigError("unknown corruption: " + s);
            }
            else if (key == "noise_sigma") sc.noise_sigma = v.get<double>();
            else throw ConfigError("unknown config key: " + key);
        } catch (const nlohmann::json::exception& ex) {
            throw ConfigError("config key '" + key + "': " + ex.what());
        }
    }
}

std::vector<FusionMode> parse_modes(const std::string& spec) {
    if (spec == "components") {
        return {FusionMode::Concat, FusionMode::CagOnly, FusionMode::DdeOnly, FusionMode::CagDde};
    }
    if (spec == "fusion") return {FusionMode::Concat, FusionMode::Add, FusionMode::Mul, FusionMode::CagDde};
    std::vector<FusionMode> modes;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) modes.push_back(parse_fusion_mode(item));
    return modes;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-stream video salient object detection"};
    app.require_subcommand(1);

    Common gen_c, train_c, eval_c, ablate_c, infer_c;

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic video dataset");
    add_common(gen, gen_c);
    std::string preset = "default";
    int sequences = 4;
    std::optional<int> frames;
    std::optional<double> corrupt;
    gen->add_option("--preset", preset, "default|low-contrast|fast-motion|multi-object|unreliable-flow");
    gen->add_option("--sequences", sequences, "number of sequences")->check(CLI::PositiveNumber);
    gen->add_option("--frames", frames, "frames per sequence");
    gen->add_option("--corrupt-fraction", corrupt, "fraction of sequences with corrupted flow renderings");

    auto* train_cmd = app.add_subcommand("train", "train a model");
    add_common(train_cmd, train_c);
    std::string resume;
    train_cmd->add_option("--resume", resume, "continue from a checkpoint");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    add_common(eval_cmd, eval_c);
    std::string eval_ckpt;
    bool save_maps = false;
    eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
    eval_cmd->add_flag("--save-maps", save_maps, "write per-frame saliency rasters under --out");

    auto* ablate_cmd = app.add_subcommand("ablate", "train and compare fusion modes");
    add_common(ablate_cmd, ablate_c);
    std::string modes_spec = "components";
    std::vector<std::uint64_t> seeds{0, 1, 2};
    std::string held_out;
    ablate_cmd->add_option("--modes", modes_spec, "components|fusion|comma-separated modes");
    ablate_cmd->add_option("--seeds", seeds, "seeds")->delimiter(',');
    ablate_cmd->add_option("--eval-data", held_out, "held-out dataset (default: eval_data from config)");

    auto* infer_cmd = app.add_subcommand("infer", "write saliency maps for a frame directory");
    add_common(infer_cmd, infer_c);
    std::string infer_ckpt, rgb_dir, flow_dir;
    infer_cmd->add_option("--checkpoint", infer_ckpt, "checkpoint file")->required();
    infer_cmd->add_option("--rgb", rgb_dir, "directory of RGB frames")->required();
    infer_cmd->add_option("--flow", flow_dir, "directory of flow images")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            syndata::SceneConfig sc = scene_preset(preset);
            if (!gen_c.config.empty()) apply_scene_config(gen_c.config, sc);
            if (frames) sc.length = *frames;
            if (corrupt) sc.corrupt_fraction = *corrupt;
            if (gen_c.out.empty()) throw ConfigError("gen-data needs --out");
            const auto seqs = syndata::generate_dataset(sc, sequences, gen_c.seed.value_or(0));
            syndata::write_dataset(gen_c.out, seqs);
            int corrupted = 0;
            for (const auto& s : seqs) corrupted += s.flow_corrupted ? 1 : 0;
            std::cout << "wrote " << seqs.size() << " sequences x " << sc.length << " frames to " << gen_c.out
                      << " (" << corrupted << " with corrupted flow)\n";
        } else if (train_cmd->parsed()) {
            if (!resume.empty()) {
                Checkpoint ck = load_checkpoint(resume);
                TrainConfig cfg = resolve(train_c);
                const int target = train_c.steps ? *train_c.steps : ck.config.max_steps;
                Trainer trainer(ck, load_samples(ck.config.train_data, ck.config.input_size));
                std::cout << "config " << to_json(ck.config) << "\nresume from step " << ck.step << '\n';
                while (trainer.steps_done() < target) std::cout << format_step(trainer.step()) << '\n';
                save_checkpoint(fs::path(cfg.out_dir) / "final.ckpt", trainer.checkpoint());
            } else {
                train(resolve(train_c), std::cout);
            }
        } else if (eval_cmd->parsed()) {
            const Checkpoint ck = load_checkpoint(eval_ckpt);
            const std::string data = !eval_c.data.empty() ? eval_c.data : ck.config.eval_data;
            if (data.empty()) throw ConfigError("eval needs --data");
            auto model = model_from_checkpoint(ck);
            EvalOptions opts;
            opts.log = &std::cerr;
            if (save_maps) {
                if (eval_c.out.empty()) throw ConfigError("--save-maps needs --out");
                opts.raster_dir = fs::path(eval_c.out) / "maps";
            }
            const EvalResult res = evaluate(*model, syndata::load_dataset(data), opts);
            const std::string report = metrics::to_json(res.report);
            std::cout << report << '\n';
            if (res.confidence_gap == res.confidence_gap) std::cout << "confidence_gap " << res.confidence_gap << '\n';
            if (!eval_c.out.empty()) write_text(fs::path(eval_c.out) / "report.json", report + "\n");
        } else if (ablate_cmd->parsed()) {
            TrainConfig cfg = resolve(ablate_c);
            if (cfg.train_data.empty()) throw ConfigError("ablate needs --data or train_data");
            const std::string eval_dir = !held_out.empty() ? held_out : cfg.eval_data;
            if (eval_dir.empty()) throw ConfigError("ablate needs --eval-data or eval_data");
            const auto modes = parse_modes(modes_spec);
            std::cout << "config " << to_json(cfg) << '\n';
            const AblationTable table = ablate(cfg, modes, seeds, load_samples(cfg.train_data, cfg.input_size),
                                               syndata::load_dataset(eval_dir), &std::cout);
            std::cout << format_table(table);
            write_text(fs::path(cfg.out_dir) / "ablation.txt", format_table(table));
            write_text(fs::path(cfg.out_dir) / "ablation.json", to_json(table) + "\n");
        } else if (infer_cmd->parsed()) {
            if (infer_c.out.empty()) throw ConfigError("infer needs --out");
            auto model = model_from_checkpoint(load_checkpoint(infer_ckpt));
            const int n = infer(*model, rgb_dir, flow_dir, infer_c.out);
            std::cout << "wrote " << n << " saliency maps to " << infer_c.out << '\n';
        }
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return 1;
    }
    return 0;
}
