#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "vsod/harness/adam.hpp"
#include "vsod/harness/checkpoint.hpp"
#include "vsod/harness/config.hpp"
#include "vsod/metrics.hpp"
#include "vsod/model.hpp"
#include "vsod/syndata.hpp"

namespace vsod::harness {

/// Raised when the loss becomes NaN or infinite; the message carries the step and terms.
class TrainingDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct StepRecord {
    int step = 0;
    double final_loss = 0.0;  // L_f
    double gate_loss = 0.0;   // sum of the gate terms
    double total = 0.0;
    double wall_seconds = 0.0;  // since the trainer was constructed
};

/// "step=12 L_f=0.912345 L_cag=3.456789 total=4.369134 wall=3.21"
std::string format_step(const StepRecord& rec);

/// Index of the sample consumed at position `k` of the training stream. Each
/// epoch is a fresh permutation derived from (seed, epoch) only, so every
/// fusion mode trained with one seed sees the same order.
int sample_index(std::uint64_t seed, std::int64_t k, int dataset_size);

/// Resizes rgb/flow bilinearly and the mask by bilinear + 0.5 threshold.
syndata::Sample resize_sample(const syndata::Sample& s, int height, int width);

/// Every frame of a dataset directory, resized to size x size where needed.
std::vector<syndata::Sample> load_samples(const std::filesystem::path& root, int size);

/// Owns the model, optimizer and augmentation RNG of one run.
class Trainer {
public:
    Trainer(TrainConfig cfg, std::vector<syndata::Sample> data);
    /// Continues from a checkpoint; the next step reproduces the uninterrupted run.
    Trainer(const Checkpoint& ckpt, std::vector<syndata::Sample> data);

    StepRecord step();

    [[nodiscard]] Checkpoint checkpoint() const;
    [[nodiscard]] int steps_done() const { return step_; }
    [[nodiscard]] const TrainConfig& config() const { return cfg_; }
    [[nodiscard]] SaliencyModel& model() { return *model_; }
    [[nodiscard]] const std::vector<syndata::Sample>& data() const { return data_; }

private:
    TrainConfig cfg_;
    std::vector<syndata::Sample> data_;
    std::unique_ptr<SaliencyModel> model_;
    Adam adam_;
    std::mt19937_64 aug_rng_;
    int step_ = 0;
    double wall_origin_ = 0.0;
};

/// Loads cfg.train_data, resizes to input_size, runs cfg.max_steps steps and
/// writes checkpoints under cfg.out_dir (step_%06d.ckpt at each interval and
/// final.ckpt). The log starts with a config echo line, then one line per step.
Checkpoint train(const TrainConfig& cfg, std::ostream& log);

/// Rebuilds the model stored in a checkpoint.
std::unique_ptr<SaliencyModel> model_from_checkpoint(const Checkpoint& ckpt);

/// Copies parameter values into a model; names and shapes must match exactly.
void load_parameters(SaliencyModel& model, const std::map<std::string, Tensor>& params);

/// Inference on one (1,3,H,W) pair of any size. Inputs whose sides are not
/// multiples of 32 are resized to the nearest valid size and the prediction is
/// resized back. Returns (1,1,H,W).
Tensor predict(const SaliencyModel& model, const Tensor& rgb, const Tensor& flow_image, bool* resized = nullptr);

struct EvalOptions {
    std::optional<std::filesystem::path> raster_dir;  // write <seq>/<frame>.png predictions
    std::ostream* log = nullptr;
};

struct EvalResult {
    metrics::MetricReport report;
    /// Mean |s_i - IoU(P_i, G_i)| over every gate and frame; NaN for modes without gates.
    double confidence_gap = 0.0;
    int resized_frames = 0;
};

EvalResult evaluate(const SaliencyModel& model, const std::vector<syndata::DatasetEntry>& dataset,
                    const EvalOptions& options = {});

/// Same, over in-memory samples (used on the training set).
EvalResult evaluate_samples(const SaliencyModel& model, const std::vector<syndata::Sample>& samples);

/// Predicts every frame of two parallel directories of PNG files (matched by
/// sorted order) and writes 8-bit saliency maps with the rgb file names.
/// Returns the number of frames written.
int infer(const SaliencyModel& model, const std::filesystem::path& rgb_dir, const std::filesystem::path& flow_dir,
          const std::filesystem::path& out_dir);

}  // namespace vsod::harness
