#pragma once

#include <string>
#include <utility>
#include <vector>

#include "opo/model.hpp"

namespace opo::ckpt {

// Binary model snapshot. Layout (all integers little-endian):
//   magic "OPO1" | u32 version | config text | named tensor table
//   (name, rank, extents, f64 data) | RNG stream states | u64 total length.
// The trailing length field detects truncation; unknown versions are
// rejected outright.
inline constexpr char kMagic[4] = {'O', 'P', 'O', '1'};
inline constexpr std::uint32_t kVersion = 1;

using RngStates = std::vector<std::pair<std::string, std::string>>;

void save_checkpoint(const std::string& path, const model::Model& m,
                     const RngStates& rng_states = {});

struct Loaded {
  model::Model model;
  RngStates rng_states;
};

Loaded load_checkpoint(const std::string& path);

// Byte-for-byte serialization (what save_checkpoint writes).
std::vector<std::uint8_t> serialize(const model::Model& m,
                                    const RngStates& rng_states = {});

}  // namespace opo::ckpt
