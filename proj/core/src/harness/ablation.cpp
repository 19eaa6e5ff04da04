#include "vsod/harness/ablation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <ostream>
#include <stdexcept>

#include "vsod/harness/trainer.hpp"

namespace vsod::harness {

namespace {

double mean_of(const std::vector<double>& v) { return metrics::canonical_sum(v) / static_cast<double>(v.size()); }

double spread_of(const std::vector<double>& v, double mean) {
    if (v.size() < 2) return 0.0;
    std::vector<double> sq;
    for (double x : v) sq.push_back((x - mean) * (x - mean));
    return std::sqrt(metrics::canonical_sum(std::move(sq)) / static_cast<double>(v.size() - 1));
}

}  // namespace

const AblationRow& AblationTable::row(FusionMode mode) const {
    for (const auto& r : rows) {
        if (r.mode == mode) return r;
    }
    throw std::out_of_range("ablation table has no row for " + std::string(to_string(mode)));
}

std::string row_label(FusionMode mode, std::span<const FusionMode> modes) {
    const bool fusion_table = std::any_of(modes.begin(), modes.end(),
                                          [](FusionMode m) { return m == FusionMode::Add || m == FusionMode::Mul; });
    switch (mode) {
        case FusionMode::Concat: return fusion_table ? "Cat" : "Baseline (Concat)";
        case FusionMode::Add: return "Add";
        case FusionMode::Mul: return "Mul";
        case FusionMode::CagOnly: return "+ CAG";
        case FusionMode::DdeOnly: return "+ DDE";
        case FusionMode::CagDde: return "Ours";
    }
    return "?";
}

AblationTable ablate(const TrainConfig& base, std::span<const FusionMode> modes, std::span<const std::uint64_t> seeds,
                     const std::vector<syndata::Sample>& train_set,
                     const std::vector<syndata::DatasetEntry>& held_out, std::ostream* log) {
    if (seeds.empty()) throw std::invalid_argument("ablate: at least one seed is required");
    if (modes.empty()) throw std::invalid_argument("ablate: at least one fusion mode is required");
    AblationTable table;
    table.seeds.assign(seeds.begin(), seeds.end());
    for (FusionMode mode : modes) {
        AblationRow row;
        row.label = row_label(mode, modes);
        row.mode = mode;
        for (std::uint64_t seed : seeds) {
            TrainConfig cfg = base;
            cfg.fusion_mode = mode;
            cfg.seed = seed;
            Trainer trainer(cfg, train_set);
            StepRecord last;
            for (int i = 0; i < cfg.max_steps; ++i) {
                last = trainer.step();
                if (log != nullptr && (last.step % cfg.log_interval == 0 || last.step == cfg.max_steps)) {
                    *log << to_string(mode) << " seed=" << seed << ' ' << format_step(last) << '\n' << std::flush;
                }
            }
            const EvalResult ev = evaluate(trainer.model(), held_out);
            AblationRun run{mode, seed, ev.report, last.total};
            if (log != nullptr) {
                *log << to_string(mode) << " seed=" << seed << " maxF=" << ev.report.max_f_beta
                     << " MAE=" << ev.report.mae << '\n' << std::flush;
            }
            row.max_f.push_back(ev.report.max_f_beta);
            row.mae.push_back(ev.report.mae);
            table.runs.push_back(std::move(run));
        }
        row.mean_max_f = mean_of(row.max_f);
        row.spread_max_f = spread_of(row.max_f, row.mean_max_f);
        row.mean_mae = mean_of(row.mae);
        row.spread_mae = spread_of(row.mae, row.mean_mae);
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::string format_table(const AblationTable& table) {
    std::string out;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-20s %-10s %-20s %-20s\n", "Model", "mode", "max F", "MAE");
    out += buf;
    for (const auto& r : table.rows) {
        char f[48], m[48];
        std::snprintf(f, sizeof(f), "%.4f +- %.4f", r.mean_max_f, r.spread_max_f);
        std::snprintf(m, sizeof(m), "%.4f +- %.4f", r.mean_mae, r.spread_mae);
        std::snprintf(buf, sizeof(buf), "%-20s %-10s %-20s %-20s\n", r.label.c_str(),
                      std::string(to_string(r.mode)).c_str(), f, m);
        out += buf;
    }
    out += "seeds:";
    for (auto s : table.seeds) out += " " + std::to_string(s);
    out += "\n";
    return out;
}

std::string to_json(const AblationTable& table, int indent) {
    nlohmann::json j;
    j["seeds"] = table.seeds;
    j["rows"] = nlohmann::json::array();
    for (const auto& r : table.rows) {
        j["rows"].push_back({{"label", r.label},
                             {"mode", std::string(to_string(r.mode))},
                             {"max_f", r.max_f},
                             {"mae", r.mae},
                             {"mean_max_f", r.mean_max_f},
                             {"spread_max_f", r.spread_max_f},
                             {"mean_mae", r.mean_mae},
                             {"spread_mae", r.spread_mae}});
    }
    return j.dump(indent);
}

}  // namespace vsod::harness
