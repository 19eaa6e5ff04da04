#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "vsod/tensor.hpp"

// Synthetic moving-shape videos with exact per-pixel motion, used in place of
// benchmark videos and estimated optical flow.
namespace vsod::syndata {

/// Raised for missing or unreadable dataset files; the message names the sequence and frame.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ShapeKind { Disk, Rectangle, Polygon };
enum class FlowCorruption { None, Noise, Zero };

struct SceneConfig {
    int height = 64;
    int width = 64;
    int num_objects = 1;  // object 0 is the salient one, the rest are unlabeled distractors
    std::vector<ShapeKind> kinds{ShapeKind::Disk, ShapeKind::Rectangle, ShapeKind::Polygon};
    double min_size = 9.0;   // half-extent in pixels
    double max_size = 15.0;
    double distractor_scale = 0.7;  // distractor size relative to the salient object range
    double min_speed = 1.0;  // pixels per frame
    double max_speed = 3.0;
    bool distractor_motion = true;
    double camera_speed = 0.0;  // background translation, pixels per frame
    double contrast = 1.0;      // 0: object colours equal the background mean, 1: fully distinct
    std::uint64_t texture_seed = 0;  // 0: derived from the sequence seed
    int length = 8;

    double corrupt_fraction = 0.0;  // probability a sequence gets a corrupted flow rendering
    FlowCorruption corruption = FlowCorruption::Noise;
    double noise_sigma = 0.5;

    /// Upper bound on any flow vector magnitude.
    [[nodiscard]] double max_displacement() const;
    void validate() const;
};

/// Presets for the hard cases the model is meant to handle.
SceneConfig low_contrast_scene();
SceneConfig fast_motion_scene();
SceneConfig multi_object_scene();
/// Only the salient object moves; same-sized static distractors; half of the
/// sequences carry a noise-corrupted flow rendering.
SceneConfig unreliable_flow_scene();

struct Frame {
    Tensor rgb;         // (1,3,H,W) in [0,1]
    Tensor flow;        // (1,2,H,W) displacement to the next frame, (dx, dy) in pixels
    Tensor flow_image;  // (1,3,H,W) colour-wheel rendering (possibly corrupted)
    Tensor mask;        // (1,1,H,W) in {0,1}
};

struct Sequence {
    std::string name;
    bool flow_corrupted = false;
    std::vector<Frame> frames;
};

/// Deterministic in (cfg, seed). Throws std::invalid_argument for objects that cannot fit.
/// The flow rendering is corrupted with probability corrupt_fraction unless
/// `corrupt` forces the choice.
Sequence generate_sequence(const SceneConfig& cfg, std::uint64_t seed, const std::string& name = "seq",
                           std::optional<bool> corrupt = std::nullopt);

/// n sequences named seq_0000.. with per-sequence seeds derived from base_seed.
/// Exactly round(corrupt_fraction * n) of them get a corrupted flow rendering.
std::vector<Sequence> generate_dataset(const SceneConfig& cfg, int count, std::uint64_t base_seed);

/// Colour-wheel index (continuous, in [0, wheel_size())) of a flow direction.
double wheel_position(double dx, double dy);
int wheel_size();

/// Colour-wheel rendering: hue from direction, saturation from magnitude
/// divided by max_magnitude (the field's own maximum when <= 0). Zero motion is white.
Tensor render_flow_color(const Tensor& flow, double max_magnitude = 0.0);

struct Sample {
    Tensor rgb;
    Tensor flow_image;
    Tensor mask;
    std::optional<Tensor> flow;
};

struct AugmentChoice {
    bool flip = false;
    double scale = 1.0;
    int offset_y = 0;
    int offset_x = 0;
};

inline constexpr double kAugmentScales[3] = {0.75, 1.0, 1.25};

/// Draws flip/scale/offset from rng.
AugmentChoice draw_augmentation(std::mt19937_64& rng, int height, int width);
/// Applies a fixed augmentation jointly to every field. Output keeps the input size.
Sample apply_augmentation(const Sample& sample, const AugmentChoice& choice);
Sample augment(const Sample& sample, std::mt19937_64& rng);

struct DatasetEntry {
    std::string sequence;
    int frame = 0;
    Sample sample;
};

/// <root>/<sequence>/{rgb,flow,mask}/%05d.png
void write_dataset(const std::filesystem::path& root, const std::vector<Sequence>& sequences);
/// Loads every frame in lexicographic sequence/frame order.
std::vector<DatasetEntry> load_dataset(const std::filesystem::path& root);

}  // namespace vsod::syndata
