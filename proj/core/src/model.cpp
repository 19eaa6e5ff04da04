#include "vsod/model.hpp"

#include <stdexcept>

namespace vsod {

std::string_view to_string(FusionMode mode) {
    switch (mode) {
        case FusionMode::CagDde: return "cag_dde";
        case FusionMode::CagOnly: return "cag_only";
        case FusionMode::DdeOnly: return "dde_only";
        case FusionMode::Concat: return "concat";
        case FusionMode::Add: return "add";
        case FusionMode::Mul: return "mul";
    }
    return "unknown";
}

FusionMode parse_fusion_mode(std::string_view name) {
    if (name == "cag_dde" || name == "ours") return FusionMode::CagDde;
    if (name == "cag_only") return FusionMode::CagOnly;
    if (name == "dde_only") return FusionMode::DdeOnly;
    if (name == "concat" || name == "cat") return FusionMode::Concat;
    if (name == "add") return FusionMode::Add;
    if (name == "mul") return FusionMode::Mul;
    throw std::invalid_argument("unknown fusion mode: " + std::string(name));
}

bool uses_gates(FusionMode mode) { return mode == FusionMode::CagDde || mode == FusionMode::CagOnly; }
bool uses_dde(FusionMode mode) { return mode == FusionMode::CagDde || mode == FusionMode::DdeOnly; }

SaliencyModel::SaliencyModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    Initializer init(seed);
    encoder_ = std::make_unique<Encoder>(store_, init, cfg_.encoder);
    std::array<int, kPyramidLevels> widths{};
    for (int i = 0; i < kPyramidLevels; ++i) widths[i] = cfg_.encoder.width(i);

    for (int i = 0; i < kPyramidLevels; ++i) {
        const std::string lvl = ".l" + std::to_string(i + 1);
        if (uses_gates(cfg_.fusion)) {
            rgb_gates_.emplace_back(store_, init, widths[i], "cag.rgb" + lvl);
            flow_gates_.emplace_back(store_, init, widths[i], "cag.flow" + lvl);
        }
        if (uses_dde(cfg_.fusion)) {
            dde_.emplace_back(store_, init, widths[i], widths[i], "dde" + lvl);
        } else {
            const int cin = (cfg_.fusion == FusionMode::Concat || cfg_.fusion == FusionMode::CagOnly) ? 2 * widths[i]
                                                                                                       : widths[i];
            baseline_fusion_.push_back(Conv::make(store_, init, "fusion" + lvl, cin, widths[i], 3, same3x3()));
        }
    }
    decoder_ = std::make_unique<Decoder>(store_, init, widths);
}

const cag::ConfidenceGate& SaliencyModel::gate(losses::Stream stream, int level) const {
    const auto& gates = stream == losses::Stream::Rgb ? rgb_gates_ : flow_gates_;
    if (gates.empty()) throw std::logic_error("fusion mode has no confidence gates");
    return gates.at(level);
}

const dde::DualDifferentialEnhancement& SaliencyModel::dde(int level) const {
    if (dde_.empty()) throw std::logic_error("fusion mode has no differential enhancement");
    return dde_.at(level);
}

Var SaliencyModel::fuse_level(int level, const Var& rgb, const Var& flow) const {
    switch (cfg_.fusion) {
        case FusionMode::CagDde:
        case FusionMode::DdeOnly:
            return dde_.at(level).fuse(rgb, flow);
        case FusionMode::CagOnly:
        case FusionMode::Concat: {
            const std::array<Var, 2> parts{rgb, flow};
            return ops::relu(baseline_fusion_.at(level)(ops::concat_channels(parts)));
        }
        case FusionMode::Add:
            return ops::relu(baseline_fusion_.at(level)(ops::add(rgb, flow)));
        case FusionMode::Mul:
            return ops::relu(baseline_fusion_.at(level)(ops::mul(rgb, flow)));
    }
    throw std::logic_error("unhandled fusion mode");
}

ModelOutput SaliencyModel::forward(const Var& rgb, const Var& flow_image) const {
    auto [e_rgb, e_flow] = encoder_->encode_pair(rgb, flow_image);
    ModelOutput out;
    for (int i = 0; i < kPyramidLevels; ++i) {
        Var r = e_rgb[i];
        Var f = e_flow[i];
        if (uses_gates(cfg_.fusion)) {
            auto gr = rgb_gates_[i].forward(r, cfg_.gate_supervises_encoder);
            auto gf = flow_gates_[i].forward(f, cfg_.gate_supervises_encoder);
            out.aux.push_back({i, losses::Stream::Rgb, gr.saliency, gr.confidence});
            out.aux.push_back({i, losses::Stream::Flow, gf.saliency, gf.confidence});
            r = gr.gated;
            f = gf.gated;
        }
        out.fused[i] = fuse_level(i, r, f);
    }
    out.prediction = decoder_->forward(out.fused, rgb.shape().h, rgb.shape().w);
    return out;
}

}  // namespace vsod
