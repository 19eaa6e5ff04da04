#include "vsod/harness/config.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

namespace vsod::harness {

using nlohmann::json;

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (input_size < 32 || input_size % 32 != 0) throw ConfigError("input_size must be a positive multiple of 32");
    if (max_steps < 0) throw ConfigError("max_steps must be >= 0");
    if (checkpoint_interval < 0) throw ConfigError("checkpoint_interval must be >= 0");
    if (log_interval < 1) throw ConfigError("log_interval must be >= 1");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
        throw ConfigError("adam betas must lie in [0,1)");
    }
    if (!(adam_epsilon > 0.0)) throw ConfigError("adam_epsilon must be > 0");
    if (!loss_bce && !loss_ssim && !loss_iou) throw ConfigError("at least one final loss term must be enabled");
    try {
        model_config().encoder.validate();
    } catch (const std::invalid_argument& ex) {
        throw ConfigError(ex.what());
    }
}

ModelConfig TrainConfig::model_config() const {
    ModelConfig m;
    m.encoder.base_channels = base_channels;
    m.encoder.width_multipliers = width_multipliers;
    m.encoder.blocks_per_stage = blocks_per_stage;
    m.encoder.norm_groups = norm_groups;
    m.fusion = fusion_mode;
    m.gate_supervises_encoder = gate_supervises_encoder;
    return m;
}

namespace {

json to_object(const TrainConfig& c) {
    json j;
    j["learning_rate"] = c.learning_rate;
    j["batch_size"] = c.batch_size;
    j["input_size"] = c.input_size;
    j["max_steps"] = c.max_steps;
    j["seed"] = c.seed;
    j["fusion_mode"] = std::string(to_string(c.fusion_mode));
    j["base_channels"] = c.base_channels;
    j["width_multipliers"] = c.width_multipliers;
    j["blocks_per_stage"] = c.blocks_per_stage;
    j["norm_groups"] = c.norm_groups;
    j["gate_supervises_encoder"] = c.gate_supervises_encoder;
    j["loss_bce"] = c.loss_bce;
    j["loss_ssim"] = c.loss_ssim;
    j["loss_iou"] = c.loss_iou;
    j["loss_gates"] = c.loss_gates;
    j["adam_beta1"] = c.adam_beta1;
    j["adam_beta2"] = c.adam_beta2;
    j["adam_epsilon"] = c.adam_epsilon;
    j["augment"] = c.augment;
    j["checkpoint_interval"] = c.checkpoint_interval;
    j["log_interval"] = c.log_interval;
    j["train_data"] = c.train_data;
    j["eval_data"] = c.eval_data;
    j["out_dir"] = c.out_dir;
    return j;
}

template <typename T>
void read_field(const json& j, const std::string& key, T& out) {
    try {
        out = j.get<T>();
    } catch (const json::exception& ex) {
        throw ConfigError("config key '" + key + "': " + ex.what());
    }
}

}  // namespace

std::string to_json(const TrainConfig& cfg, int indent) { return to_object(cfg).dump(indent); }

TrainConfig config_from_json(const std::string& text, const TrainConfig& base) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& ex) {
        throw ConfigError(std::string("config is not valid JSON: ") + ex.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a flat key/value object");
    TrainConfig c = base;
    const json known = to_object(base);
    for (const auto& [key, value] : j.items()) {
        if (!known.contains(key)) throw ConfigError("unknown config key: " + key);
        if (value.is_object()) throw ConfigError("config key '" + key + "' must not be nested");
        // Reject silent numeric narrowing (e.g. 4.5 for an integer field).
        if (known.at(key).is_number_integer() && !value.is_number_integer()) {
            throw ConfigError("config key '" + key + "' expects an integer");
        }
        if (known.at(key).is_number_float() && !value.is_number()) {
            throw ConfigError("config key '" + key + "' expects a number");
        }
        if (key == "learning_rate") read_field(value, key, c.learning_rate);
        else if (key == "batch_size") read_field(value, key, c.batch_size);
        else if (key == "input_size") read_field(value, key, c.input_size);
        else if (key == "max_steps") read_field(value, key, c.max_steps);
        else if (key == "seed") read_field(value, key, c.seed);
        else if (key == "fusion_mode") {
            std::string name;
            read_field(value, key, name);
            try {
                c.fusion_mode = parse_fusion_mode(name);
            } catch (const std::invalid_argument& ex) {
                throw ConfigError(ex.what());
            }
        }
        else if (key == "base_channels") read_field(value, key, c.base_channels);
        else if (key == "width_multipliers") read_field(value, key, c.width_multipliers);
        else if (key == "blocks_per_stage") read_field(value, key, c.blocks_per_stage);
        else if (key == "norm_groups") read_field(value, key, c.norm_groups);
        else if (key == "gate_supervises_encoder") read_field(value, key, c.gate_supervises_encoder);
        else if (key == "loss_bce") read_field(value, key, c.loss_bce);
        else if (key == "loss_ssim") read_field(value, key, c.loss_ssim);
        else if (key == "loss_iou") read_field(value, key, c.loss_iou);
        else if (key == "loss_gates") read_field(value, key, c.loss_gates);
        else if (key == "adam_beta1") read_field(value, key, c.adam_beta1);
        else if (key == "adam_beta2") read_field(value, key, c.adam_beta2);
        else if (key == "adam_epsilon") read_field(value, key, c.adam_epsilon);
        else if (key == "augment") read_field(value, key, c.augment);
        else if (key == "checkpoint_interval") read_field(value, key, c.checkpoint_interval);
        else if (key == "log_interval") read_field(value, key, c.log_interval);
        else if (key == "train_data") read_field(value, key, c.train_data);
        else if (key == "eval_data") read_field(value, key, c.eval_data);
        else if (key == "out_dir") read_field(value, key, c.out_dir);
    }
    c.validate();
    return c;
}

TrainConfig load_config(const std::filesystem::path& path, const TrainConfig& base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_json(ss.str(), base);
}

}  // namespace vsod::harness
