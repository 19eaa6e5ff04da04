#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vsod/harness/ablation.hpp"
#include "vsod/harness/checkpoint.hpp"
#include "vsod/harness/config.hpp"
#include "vsod/harness/trainer.hpp"
#include "vsod/image_io.hpp"

using namespace vsod;
using namespace vsod::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("vsod_harness_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

syndata::SceneConfig small_scene() {
    syndata::SceneConfig s;
    s.height = s.width = 32;
    s.min_size = 5.0;
    s.max_size = 8.0;
    s.length = 3;
    return s;
}

TrainConfig tiny_config() {
    TrainConfig c;
    c.input_size = 32;
    c.base_channels = 4;
    c.width_multipliers = {1, 2, 2, 4, 4};
    c.norm_groups = 2;
    c.batch_size = 2;
    c.learning_rate = 1e-3;
    c.max_steps = 3;
    return c;
}

std::vector<syndata::Sample> tiny_samples(std::uint64_t seed = 1) {
    std::vector<syndata::Sample> out;
    for (const auto& seq : syndata::generate_dataset(small_scene(), 2, seed)) {
        for (const auto& f : seq.frames) out.push_back({f.rgb, f.flow_image, f.mask, std::nullopt});
    }
    return out;
}

std::vector<std::uint8_t> read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Config, RejectsUnknownAndNestedKeys) {
    EXPECT_THROW(config_from_json(R"({"learnin_rate": 0.1})"), ConfigError);
    EXPECT_THROW(config_from_json(R"({"seed": {"value": 1}})"), ConfigError);
    EXPECT_THROW(config_from_json(R"({"batch_size": 4.5})"), ConfigError);
    EXPECT_THROW(config_from_json(R"({"learning_rate": "fast"})"), ConfigError);
    EXPECT_THROW(config_from_json(R"([1, 2])"), ConfigError);
    EXPECT_THROW(config_from_json(R"({"fusion_mode": "sum"})"), ConfigError);
    EXPECT_THROW(config_from_json("{"), ConfigError);
}

TEST(Config, OverridesAndEchoRoundTrip) {
    const TrainConfig c = config_from_json(R"({"learning_rate": 0.001, "fusion_mode": "concat", "max_steps": 7})");
    EXPECT_EQ(c.learning_rate, 0.001);
    EXPECT_EQ(c.fusion_mode, FusionMode::Concat);
    EXPECT_EQ(c.max_steps, 7);
    EXPECT_EQ(c.batch_size, TrainConfig{}.batch_size);
    const TrainConfig back = config_from_json(to_json(c));
    EXPECT_EQ(to_json(back), to_json(c));
}

TEST(Config, Validation) {
    TrainConfig c;
    c.input_size = 48;
    EXPECT_THROW(c.validate(), ConfigError);
    c = TrainConfig{};
    c.loss_bce = c.loss_ssim = c.loss_iou = false;
    EXPECT_THROW(c.validate(), ConfigError);
    c = TrainConfig{};
    c.learning_rate = 0.0;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Trainer, SampleIndexIsPermutationPerEpoch) {
    for (int n : {1, 5, 13}) {
        for (int epoch = 0; epoch < 3; ++epoch) {
            std::vector<int> seen;
            for (int k = 0; k < n; ++k) seen.push_back(sample_index(9, epoch * n + k, n));
            std::sort(seen.begin(), seen.end());
            for (int k = 0; k < n; ++k) EXPECT_EQ(seen[k], k);
        }
    }
    EXPECT_EQ(sample_index(3, 17, 13), sample_index(3, 17, 13));
    EXPECT_THROW(sample_index(0, 0, 0), std::invalid_argument);
}

TEST(Trainer, FormatStep) {
    StepRecord r{12, 0.912345, 3.456789, 4.369134, 3.21};
    EXPECT_EQ(format_step(r), "step=12 L_f=0.912345 L_cag=3.456789 total=4.369134 wall=3.21");
}

TEST(Trainer, SameSeedSameLossCurve) {
    TrainConfig c = tiny_config();
    Trainer a(c, tiny_samples()), b(c, tiny_samples());
    for (int i = 0; i < 3; ++i) {
        const StepRecord ra = a.step(), rb = b.step();
        EXPECT_EQ(ra.total, rb.total) << i;
        EXPECT_EQ(ra.final_loss, rb.final_loss);
        EXPECT_GT(ra.gate_loss, 0.0);
    }
}

TEST(Trainer, ResumeReproducesNextStep) {
    TrainConfig c = tiny_config();
    Trainer a(c, tiny_samples());
    a.step();
    a.step();
    const fs::path dir = scratch_dir("resume");
    save_checkpoint(dir / "mid.ckpt", a.checkpoint());
    const StepRecord expect = a.step();

    Trainer b(load_checkpoint(dir / "mid.ckpt"), tiny_samples());
    EXPECT_EQ(b.steps_done(), 2);
    const StepRecord got = b.step();
    EXPECT_EQ(got.step, expect.step);
    EXPECT_EQ(got.total, expect.total);
    EXPECT_EQ(got.final_loss, expect.final_loss);
    EXPECT_EQ(serialize(b.checkpoint()), serialize(a.checkpoint()));
    fs::remove_all(dir);
}

TEST(Trainer, RejectsBadData) {
    EXPECT_THROW(Trainer(tiny_config(), {}), std::invalid_argument);
    TrainConfig c = tiny_config();
    c.input_size = 64;
    EXPECT_THROW(Trainer(c, tiny_samples()), ShapeError);
}

TEST(Trainer, NonFiniteLossRaises) {
    Trainer t(tiny_config(), tiny_samples());
    Var w = t.model().parameters().get("decoder.head.weight");
    w.mutable_value()[0] = std::nan("");
    EXPECT_THROW(t.step(), TrainingDiverged);
}

TEST(Checkpoint, RoundTripIsByteIdentical) {
    Trainer t(tiny_config(), tiny_samples());
    t.step();
    const fs::path dir = scratch_dir("ckpt");
    const Checkpoint c = t.checkpoint();
    save_checkpoint(dir / "a.ckpt", c);
    save_checkpoint(dir / "b.ckpt", load_checkpoint(dir / "a.ckpt"));
    EXPECT_EQ(read_bytes(dir / "a.ckpt"), read_bytes(dir / "b.ckpt"));
    // Only the two targets remain; no temporary files linger.
    int files = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++files;
    EXPECT_EQ(files, 2);
    fs::remove_all(dir);
}

TEST(Checkpoint, RejectsCorruptBytes) {
    Trainer t(tiny_config(), tiny_samples());
    auto bytes = serialize(t.checkpoint());
    auto truncated = bytes;
    truncated.resize(bytes.size() - 5);
    EXPECT_THROW(deserialize(truncated), std::runtime_error);
    auto bad = bytes;
    bad[0] = 'X';
    EXPECT_THROW(deserialize(bad), std::runtime_error);
    bytes.push_back(0);
    EXPECT_THROW(deserialize(bytes), std::runtime_error);
}

TEST(Checkpoint, LoadParametersChecksNames) {
    Trainer t(tiny_config(), tiny_samples());
    auto params = t.checkpoint().parameters;
    auto model = model_from_checkpoint(t.checkpoint());
    EXPECT_NO_THROW(load_parameters(*model, params));
    params.erase(params.begin());
    EXPECT_THROW(load_parameters(*model, params), std::runtime_error);
}

TEST(Train, ZeroStepsWritesInitialCheckpoint) {
    const fs::path dir = scratch_dir("zero");
    syndata::write_dataset(dir / "data", syndata::generate_dataset(small_scene(), 1, 4));
    TrainConfig c = tiny_config();
    c.max_steps = 0;
    c.train_data = (dir / "data").string();
    c.out_dir = (dir / "run").string();
    std::ostringstream log;
    const Checkpoint ck = train(c, log);
    EXPECT_EQ(ck.step, 0);
    EXPECT_TRUE(fs::exists(dir / "run" / "final.ckpt"));
    EXPECT_EQ(log.str().find("step="), std::string::npos);
    EXPECT_EQ(log.str().rfind("config {", 0), 0u);
    fs::remove_all(dir);
}

TEST(Train, LogsOneLinePerStepAndCheckpoints) {
    const fs::path dir = scratch_dir("train");
    syndata::write_dataset(dir / "data", syndata::generate_dataset(small_scene(), 1, 4));
    TrainConfig c = tiny_config();
    c.max_steps = 4;
    c.checkpoint_interval = 2;
    c.train_data = (dir / "data").string();
    c.out_dir = (dir / "run").string();
    std::ostringstream log;
    train(c, log);
    int steps = 0;
    std::istringstream in(log.str());
    for (std::string line; std::getline(in, line);) steps += line.rfind("step=", 0) == 0;
    EXPECT_EQ(steps, 4);
    EXPECT_TRUE(fs::exists(dir / "run" / "step_000002.ckpt"));
    EXPECT_TRUE(fs::exists(dir / "run" / "step_000004.ckpt"));
    EXPECT_TRUE(fs::exists(dir / "run" / "train.log"));
    c.train_data.clear();
    EXPECT_THROW(train(c, log), ConfigError);
    fs::remove_all(dir);
}

TEST(Evaluate, ResizesOddFramesAndLogs) {
    Trainer t(tiny_config(), tiny_samples());
    syndata::SceneConfig sc = small_scene();
    sc.height = 40;
    sc.width = 36;
    std::vector<syndata::DatasetEntry> entries;
    const auto seq = syndata::generate_sequence(sc, 3, "odd");
    for (int i = 0; i < 2; ++i) {
        const auto& f = seq.frames[i];
        entries.push_back({"odd", i, {f.rgb, f.flow_image, f.mask, std::nullopt}});
    }
    std::ostringstream log;
    const fs::path dir = scratch_dir("eval");
    EvalOptions opt;
    opt.raster_dir = dir;
    opt.log = &log;
    const EvalResult r = evaluate(t.model(), entries, opt);
    EXPECT_EQ(r.resized_frames, 2);
    EXPECT_NE(log.str().find("resized odd frame 0"), std::string::npos);
    EXPECT_EQ(io::read_gray(dir / "odd" / "00001.png").shape(), (Shape{1, 1, 40, 36}));
    EXPECT_TRUE(std::isfinite(r.confidence_gap));
    EXPECT_EQ(r.report.frame_count, 2);
    fs::remove_all(dir);
}

TEST(Evaluate, GapIsNanWithoutGates) {
    TrainConfig c = tiny_config();
    c.fusion_mode = FusionMode::Concat;
    Trainer t(c, tiny_samples());
    EXPECT_TRUE(std::isnan(evaluate_samples(t.model(), t.data()).confidence_gap));
    EXPECT_THROW(evaluate_samples(t.model(), {}), syndata::DataError);
}

TEST(Infer, WritesOneMapPerFrameAndIsIdempotent) {
    const fs::path dir = scratch_dir("infer");
    syndata::write_dataset(dir / "data", syndata::generate_dataset(small_scene(), 1, 6));
    Trainer t(tiny_config(), tiny_samples());
    const fs::path seq = dir / "data" / "seq_0000";
    EXPECT_EQ(infer(t.model(), seq / "rgb", seq / "flow", dir / "out"), 3);
    const auto first = read_bytes(dir / "out" / "00002.png");
    EXPECT_EQ(infer(t.model(), seq / "rgb", seq / "flow", dir / "out"), 3);
    EXPECT_EQ(read_bytes(dir / "out" / "00002.png"), first);
    fs::remove(seq / "flow" / "00001.png");
    EXPECT_THROW(infer(t.model(), seq / "rgb", seq / "flow", dir / "out"), syndata::DataError);
    fs::remove_all(dir);
}

TEST(Ablation, LabelsFollowModeSet) {
    const std::vector<FusionMode> fusion{FusionMode::Concat, FusionMode::Add, FusionMode::Mul, FusionMode::CagDde};
    const std::vector<FusionMode> parts{FusionMode::Concat, FusionMode::CagOnly, FusionMode::DdeOnly,
                                        FusionMode::CagDde};
    EXPECT_EQ(row_label(FusionMode::Concat, fusion), "Cat");
    EXPECT_EQ(row_label(FusionMode::Mul, fusion), "Mul");
    EXPECT_EQ(row_label(FusionMode::CagDde, fusion), "Ours");
    EXPECT_EQ(row_label(FusionMode::Concat, parts), "Baseline (Concat)");
    EXPECT_EQ(row_label(FusionMode::CagOnly, parts), "+ CAG");
    EXPECT_EQ(row_label(FusionMode::DdeOnly, parts), "+ DDE");
}

TEST(Ablation, RequiresSeedsAndModes) {
    const std::vector<FusionMode> modes{FusionMode::Concat};
    const std::vector<std::uint64_t> none;
    const std::vector<std::uint64_t> one{0};
    std::vector<syndata::DatasetEntry> held;
    EXPECT_THROW(ablate(tiny_config(), modes, none, tiny_samples(), held), std::invalid_argument);
    EXPECT_THROW(ablate(tiny_config(), {}, one, tiny_samples(), held), std::invalid_argument);
}

TEST(Ablation, DeterministicTable) {
    TrainConfig c = tiny_config();
    c.max_steps = 2;
    c.augment = true;
    const std::vector<FusionMode> modes{FusionMode::Concat, FusionMode::Add};
    const std::vector<std::uint64_t> seeds{0, 1};
    std::vector<syndata::DatasetEntry> held;
    for (const auto& s : tiny_samples(9)) held.push_back({"h", static_cast<int>(held.size()), s});
    const AblationTable a = ablate(c, modes, seeds, tiny_samples(), held);
    const AblationTable b = ablate(c, modes, seeds, tiny_samples(), held);
    ASSERT_EQ(a.rows.size(), 2u);
    EXPECT_EQ(a.rows[0].max_f.size(), 2u);
    EXPECT_EQ(format_table(a), format_table(b));
    EXPECT_EQ(to_json(a), to_json(b));
    EXPECT_EQ(a.row(FusionMode::Add).label, "Add");
}
