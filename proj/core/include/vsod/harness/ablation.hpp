#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "vsod/harness/config.hpp"
#include "vsod/metrics.hpp"
#include "vsod/syndata.hpp"

namespace vsod::harness {

struct AblationRun {
    FusionMode mode = FusionMode::CagDde;
    std::uint64_t seed = 0;
    metrics::MetricReport report;
    double final_total_loss = 0.0;
};

struct AblationRow {
    std::string label;
    FusionMode mode = FusionMode::CagDde;
    std::vector<double> max_f;  // one per seed, in seed order
    std::vector<double> mae;
    double mean_max_f = 0.0;
    double spread_max_f = 0.0;  // sample standard deviation, 0 for one seed
    double mean_mae = 0.0;
    double spread_mae = 0.0;
};

struct AblationTable {
    std::vector<std::uint64_t> seeds;
    std::vector<AblationRow> rows;
    std::vector<AblationRun> runs;

    [[nodiscard]] const AblationRow& row(FusionMode mode) const;
};

/// Row label for a mode. Sets containing add or mul use the fusion comparison
/// names (Cat, Add, Mul, Ours); otherwise the component names (Baseline (Concat),
/// + CAG, + DDE, Ours).
std::string row_label(FusionMode mode, std::span<const FusionMode> modes);

/// Trains every (mode, seed) pair from `base` on the same samples and data
/// order, then evaluates on `held_out`. Throws std::invalid_argument when no
/// seed or no mode is given.
AblationTable ablate(const TrainConfig& base, std::span<const FusionMode> modes, std::span<const std::uint64_t> seeds,
                     const std::vector<syndata::Sample>& train_set,
                     const std::vector<syndata::DatasetEntry>& held_out, std::ostream* log = nullptr);

std::string format_table(const AblationTable& table);
std::string to_json(const AblationTable& table, int indent = 2);

}  // namespace vsod::harness
