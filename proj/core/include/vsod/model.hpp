#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vsod/cag.hpp"
#include "vsod/dde.hpp"
#include "vsod/decoder.hpp"
#include "vsod/encoder.hpp"
#include "vsod/losses.hpp"

namespace vsod {

/// How the two streams are merged at each pyramid level.
enum class FusionMode {
    CagDde,   // gates on both streams, differential fusion
    CagOnly,  // gates on both streams, concat fusion
    DdeOnly,  // no gates, differential fusion
    Concat,   // concat + 3x3 conv
    Add,      // sum + 3x3 conv
    Mul,      // product + 3x3 conv
};

std::string_view to_string(FusionMode mode);
/// Throws std::invalid_argument on unknown names. Accepts "cat" and "ours" as aliases.
FusionMode parse_fusion_mode(std::string_view name);
bool uses_gates(FusionMode mode);
bool uses_dde(FusionMode mode);

struct ModelConfig {
    EncoderConfig encoder;
    FusionMode fusion = FusionMode::CagDde;
    /// Whether the gates' auxiliary BCE reaches the shared encoder.
    bool gate_supervises_encoder = true;
};

struct ModelOutput {
    Var prediction;                             // P_f, (N,1,H,W)
    std::vector<losses::AuxPrediction> aux;     // 10 entries in gated modes, empty otherwise
    std::array<Var, kPyramidLevels> fused;      // D_1..D_5
};

class SaliencyModel {
public:
    SaliencyModel(const ModelConfig& cfg, std::uint64_t seed);

    SaliencyModel(const SaliencyModel&) = delete;
    SaliencyModel& operator=(const SaliencyModel&) = delete;

    [[nodiscard]] ModelOutput forward(const Var& rgb, const Var& flow_image) const;

    [[nodiscard]] ParameterStore& parameters() { return store_; }
    [[nodiscard]] const ParameterStore& parameters() const { return store_; }
    [[nodiscard]] const ModelConfig& config() const { return cfg_; }
    [[nodiscard]] const Encoder& encoder() const { return *encoder_; }
    [[nodiscard]] const Decoder& decoder() const { return *decoder_; }
    [[nodiscard]] const cag::ConfidenceGate& gate(losses::Stream stream, int level) const;
    [[nodiscard]] const dde::DualDifferentialEnhancement& dde(int level) const;

    /// Fusion for one level in the configured mode (gated features already applied).
    [[nodiscard]] Var fuse_level(int level, const Var& rgb, const Var& flow) const;

private:
    ModelConfig cfg_;
    ParameterStore store_;
    std::unique_ptr<Encoder> encoder_;
    std::vector<cag::ConfidenceGate> rgb_gates_;
    std::vector<cag::ConfidenceGate> flow_gates_;
    std::vector<dde::DualDifferentialEnhancement> dde_;
    std::vector<Conv> baseline_fusion_;
    std::unique_ptr<Decoder> decoder_;
};

}  // namespace vsod
