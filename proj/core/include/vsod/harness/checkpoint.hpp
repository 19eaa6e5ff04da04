#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "vsod/harness/adam.hpp"
#include "vsod/harness/config.hpp"

namespace vsod::harness {

/// Full training state. Serialization is a deterministic little-endian binary
/// layout: magic, version, config JSON, step, RNG state, parameters and Adam
/// moments in name order.
struct Checkpoint {
    TrainConfig config;
    std::int64_t step = 0;
    std::string rng_state;
    std::map<std::string, Tensor> parameters;
    std::int64_t adam_steps = 0;
    std::map<std::string, Adam::Moments> adam_state;
};

std::vector<std::uint8_t> serialize(const Checkpoint& ckpt);
Checkpoint deserialize(std::span<const std::uint8_t> bytes);

/// Writes to a temporary sibling, fsyncs, then renames over `path`, so a
/// reader never observes a partially written file under the target name.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace vsod::harness
