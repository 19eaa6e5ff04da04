#include "vsod/harness/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "vsod/image_io.hpp"
#include "vsod/ops.hpp"

namespace vsod::harness {

namespace fs = std::filesystem;

namespace {

double now_seconds() {
    using namespace std::chrono;
    return duration<double>(steady_clock::now().time_since_epoch()).count();
}

std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Augmentation stream is independent of the order stream.
constexpr std::uint64_t kAugmentSalt = 0x5a17a5e0ULL;

int nearest_valid(int extent) { return std::max(32, static_cast<int>(std::lround(extent / 32.0)) * 32); }

std::string rng_to_string(const std::mt19937_64& rng) {
    std::ostringstream ss;
    ss << rng;
    return ss.str();
}

struct FrameResult {
    Tensor prediction;  // at the original resolution
    std::vector<double> gaps;
    bool resized = false;
};

FrameResult run_frame(const SaliencyModel& model, const Tensor& rgb, const Tensor& flow_image, const Tensor* mask) {
    NoGradGuard no_grad;
    const int h = rgb.shape().h;
    const int w = rgb.shape().w;
    const int nh = (h % 32 == 0) ? h : nearest_valid(h);
    const int nw = (w % 32 == 0) ? w : nearest_valid(w);
    FrameResult fr;
    fr.resized = nh != h || nw != w;
    Tensor in_rgb = fr.resized ? resize_bilinear(rgb, nh, nw) : rgb;
    Tensor in_flow = fr.resized ? resize_bilinear(flow_image, nh, nw) : flow_image;
    ModelOutput out = model.forward(Var(std::move(in_rgb)), Var(std::move(in_flow)));
    fr.prediction = fr.resized ? resize_bilinear(out.prediction.value(), h, w) : out.prediction.value();
    if (mask != nullptr && !out.aux.empty()) {
        Tensor m = *mask;
        if (fr.resized) {
            m = resize_bilinear(m, nh, nw);
            for (double& v : m.values()) v = v >= 0.5 ? 1.0 : 0.0;
        }
        for (const auto& a : out.aux) {
            const Tensor gi = area_downsample(m, nh / a.saliency.shape().h);
            const Tensor iou = cag::iou_target(a.saliency.value(), gi);
            fr.gaps.push_back(std::abs(a.confidence.value().item() - iou.item()));
        }
    }
    return fr;
}

double mean_gap(std::vector<double> gaps) {
    if (gaps.empty()) return std::numeric_limits<double>::quiet_NaN();
    const double n = static_cast<double>(gaps.size());
    return metrics::canonical_sum(std::move(gaps)) / n;
}

}  // namespace

std::string format_step(const StepRecord& rec) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "step=%d L_f=%.6f L_cag=%.6f total=%.6f wall=%.2f", rec.step, rec.final_loss,
                  rec.gate_loss, rec.total, rec.wall_seconds);
    return buf;
}

int sample_index(std::uint64_t seed, std::int64_t k, int dataset_size) {
    if (dataset_size < 1) throw std::invalid_argument("sample_index: empty dataset");
    const std::int64_t epoch = k / dataset_size;
    const int pos = static_cast<int>(k % dataset_size);
    std::mt19937_64 rng(mix(seed ^ mix(static_cast<std::uint64_t>(epoch))));
    std::vector<int> perm(dataset_size);
    for (int i = 0; i < dataset_size; ++i) perm[i] = i;
    // Fisher-Yates with explicit modulo draws; std::shuffle is implementation-defined.
    for (int i = dataset_size - 1; i > 0; --i) {
        const int j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
        std::swap(perm[i], perm[j]);
    }
    return perm[pos];
}

syndata::Sample resize_sample(const syndata::Sample& s, int height, int width) {
    syndata::Sample out;
    out.rgb = resize_bilinear(s.rgb, height, width);
    out.flow_image = resize_bilinear(s.flow_image, height, width);
    out.mask = resize_bilinear(s.mask, height, width);
    for (double& v : out.mask.values()) v = v >= 0.5 ? 1.0 : 0.0;
    return out;
}

std::vector<syndata::Sample> load_samples(const fs::path& root, int size) {
    std::vector<syndata::Sample> data;
    for (auto& e : syndata::load_dataset(root)) {
        const Shape s = e.sample.rgb.shape();
        data.push_back(s.h == size && s.w == size ? std::move(e.sample) : resize_sample(e.sample, size, size));
    }
    return data;
}

Trainer::Trainer(TrainConfig cfg, std::vector<syndata::Sample> data)
    : cfg_(std::move(cfg)),
      data_(std::move(data)),
      adam_(AdamConfig{cfg_.learning_rate, cfg_.adam_beta1, cfg_.adam_beta2, cfg_.adam_epsilon}),
      aug_rng_(mix(cfg_.seed ^ kAugmentSalt)),
      wall_origin_(now_seconds()) {
    cfg_.validate();
    if (data_.empty()) throw std::invalid_argument("Trainer: training set is empty");
    for (const auto& s : data_) {
        if (s.rgb.shape().h != cfg_.input_size || s.rgb.shape().w != cfg_.input_size) {
            throw ShapeError("Trainer: samples must be " + std::to_string(cfg_.input_size) + "x" +
                             std::to_string(cfg_.input_size) + ", got " + s.rgb.shape().str());
        }
    }
    model_ = std::make_unique<SaliencyModel>(cfg_.model_config(), cfg_.seed);
}

Trainer::Trainer(const Checkpoint& ckpt, std::vector<syndata::Sample> data) : Trainer(ckpt.config, std::move(data)) {
    load_parameters(*model_, ckpt.parameters);
    adam_.restore(ckpt.adam_steps, ckpt.adam_state);
    std::istringstream ss(ckpt.rng_state);
    ss >> aug_rng_;
    if (!ss) throw std::runtime_error("checkpoint: corrupt RNG state");
    step_ = static_cast<int>(ckpt.step);
}

StepRecord Trainer::step() {
    const int n = static_cast<int>(data_.size());
    std::vector<Tensor> rgb, flow, mask;
    for (int b = 0; b < cfg_.batch_size; ++b) {
        const std::int64_t k = static_cast<std::int64_t>(step_) * cfg_.batch_size + b;
        const syndata::Sample& src = data_[sample_index(cfg_.seed, k, n)];
        if (cfg_.augment) {
            syndata::Sample s = syndata::augment(src, aug_rng_);
            rgb.push_back(std::move(s.rgb));
            flow.push_back(std::move(s.flow_image));
            mask.push_back(std::move(s.mask));
        } else {
            rgb.push_back(src.rgb);
            flow.push_back(src.flow_image);
            mask.push_back(src.mask);
        }
    }
    const Tensor target = stack_batch(mask);
    ParameterStore& params = model_->parameters();
    params.zero_grad();
    ModelOutput out = model_->forward(Var(stack_batch(rgb)), Var(stack_batch(flow)));
    const bool gated = uses_gates(cfg_.fusion_mode) && cfg_.loss_gates;
    std::span<const losses::AuxPrediction> aux;
    if (gated) aux = out.aux;
    losses::TotalLoss loss = losses::total_loss(out.prediction, target, aux, gated, cfg_.final_terms());

    StepRecord rec;
    rec.step = step_ + 1;
    rec.final_loss = loss.final_term;
    rec.gate_loss = loss.gate_term;
    rec.total = loss.total.value().item();
    if (!std::isfinite(rec.total)) {
        throw TrainingDiverged("loss became non-finite at step " + std::to_string(rec.step) + ": " +
                               format_step(rec));
    }
    backward(loss.total);
    adam_.step(params);
    ++step_;
    rec.wall_seconds = now_seconds() - wall_origin_;
    return rec;
}

Checkpoint Trainer::checkpoint() const {
    Checkpoint ck;
    ck.config = cfg_;
    ck.step = step_;
    ck.rng_state = rng_to_string(aug_rng_);
    for (const auto& [name, var] : model_->parameters().all()) ck.parameters.emplace(name, var.value());
    ck.adam_steps = adam_.steps();
    ck.adam_state = adam_.state();
    return ck;
}

std::unique_ptr<SaliencyModel> model_from_checkpoint(const Checkpoint& ckpt) {
    auto model = std::make_unique<SaliencyModel>(ckpt.config.model_config(), ckpt.config.seed);
    load_parameters(*model, ckpt.parameters);
    return model;
}

void load_parameters(SaliencyModel& model, const std::map<std::string, Tensor>& params) {
    const auto& all = model.parameters().all();
    if (all.size() != params.size()) {
        throw std::runtime_error("checkpoint has " + std::to_string(params.size()) + " parameters, model expects " +
                                 std::to_string(all.size()));
    }
    for (const auto& [name, var] : all) {
        auto it = params.find(name);
        if (it == params.end()) throw std::runtime_error("checkpoint is missing parameter " + name);
        if (it->second.shape() != var.shape()) {
            throw std::runtime_error("parameter " + name + " has shape " + it->second.shape().str() +
                                     ", model expects " + var.shape().str());
        }
        Var handle = var;
        handle.mutable_value() = it->second;
    }
}

Checkpoint train(const TrainConfig& cfg, std::ostream& log) {
    cfg.validate();
    if (cfg.train_data.empty()) throw ConfigError("train_data is not set");
    std::vector<syndata::Sample> data = load_samples(cfg.train_data, cfg.input_size);

    const fs::path out_dir(cfg.out_dir);
    fs::create_directories(out_dir);
    std::ofstream file_log(out_dir / "train.log");
    auto emit = [&](const std::string& line) {
        log << line << '\n' << std::flush;
        file_log << line << '\n' << std::flush;
    };
    emit("config " + to_json(cfg));
    emit("data " + std::to_string(data.size()) + " frames from " + cfg.train_data);

    Trainer trainer(cfg, std::move(data));
    for (int i = 0; i < cfg.max_steps; ++i) {
        const StepRecord rec = trainer.step();
        if (rec.step % cfg.log_interval == 0 || rec.step == cfg.max_steps) emit(format_step(rec));
        if (cfg.checkpoint_interval > 0 && rec.step % cfg.checkpoint_interval == 0) {
            char name[32];
            std::snprintf(name, sizeof(name), "step_%06d.ckpt", rec.step);
            save_checkpoint(out_dir / name, trainer.checkpoint());
        }
    }
    Checkpoint final = trainer.checkpoint();
    save_checkpoint(out_dir / "final.ckpt", final);
    return final;
}

Tensor predict(const SaliencyModel& model, const Tensor& rgb, const Tensor& flow_image, bool* resized) {
    require_same_shape(rgb.shape(), flow_image.shape(), "predict: rgb vs flow image");
    FrameResult fr = run_frame(model, rgb, flow_image, nullptr);
    if (resized != nullptr) *resized = fr.resized;
    return std::move(fr.prediction);
}

EvalResult evaluate(const SaliencyModel& model, const std::vector<syndata::DatasetEntry>& dataset,
                    const EvalOptions& options) {
    if (dataset.empty()) throw syndata::DataError("evaluate: empty dataset");
    metrics::DatasetEvaluator acc;
    std::vector<double> gaps;
    EvalResult result;
    for (const auto& e : dataset) {
        FrameResult fr = run_frame(model, e.sample.rgb, e.sample.flow_image, &e.sample.mask);
        if (fr.resized) {
            ++result.resized_frames;
            if (options.log != nullptr) {
                *options.log << "resized " << e.sequence << " frame " << e.frame << " from "
                             << e.sample.rgb.shape().h << "x" << e.sample.rgb.shape().w
                             << " to a multiple of 32 for the network\n";
            }
        }
        acc.add(fr.prediction, e.sample.mask);
        gaps.insert(gaps.end(), fr.gaps.begin(), fr.gaps.end());
        if (options.raster_dir) {
            char name[32];
            std::snprintf(name, sizeof(name), "%05d.png", e.frame);
            const fs::path dir = *options.raster_dir / e.sequence;
            fs::create_directories(dir);
            io::write_gray(dir / name, fr.prediction);
        }
    }
    result.report = acc.finalize();
    result.confidence_gap = mean_gap(std::move(gaps));
    return result;
}

EvalResult evaluate_samples(const SaliencyModel& model, const std::vector<syndata::Sample>& samples) {
    if (samples.empty()) throw syndata::DataError("evaluate: empty dataset");
    metrics::DatasetEvaluator acc;
    std::vector<double> gaps;
    EvalResult result;
    for (const auto& s : samples) {
        FrameResult fr = run_frame(model, s.rgb, s.flow_image, &s.mask);
        result.resized_frames += fr.resized ? 1 : 0;
        acc.add(fr.prediction, s.mask);
        gaps.insert(gaps.end(), fr.gaps.begin(), fr.gaps.end());
    }
    result.report = acc.finalize();
    result.confidence_gap = mean_gap(std::move(gaps));
    return result;
}

namespace {

std::vector<fs::path> list_png(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw syndata::DataError("not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".png") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

}  // namespace

int infer(const SaliencyModel& model, const fs::path& rgb_dir, const fs::path& flow_dir, const fs::path& out_dir) {
    const auto rgb_files = list_png(rgb_dir);
    const auto flow_files = list_png(flow_dir);
    if (rgb_files.size() != flow_files.size()) {
        throw syndata::DataError("infer: " + std::to_string(rgb_files.size()) + " rgb frames but " +
                                 std::to_string(flow_files.size()) + " flow frames");
    }
    fs::create_directories(out_dir);
    for (std::size_t i = 0; i < rgb_files.size(); ++i) {
        const Tensor rgb = io::read_rgb(rgb_files[i]);
        const Tensor flow = io::read_rgb(flow_files[i]);
        if (rgb.shape() != flow.shape()) {
            throw ShapeError("infer: " + rgb_files[i].filename().string() + " is " + rgb.shape().str() +
                             " but its flow image is " + flow.shape().str());
        }
        io::write_gray(out_dir / rgb_files[i].filename(), predict(model, rgb, flow));
    }
    return static_cast<int>(rgb_files.size());
}

}  // namespace vsod::harness
