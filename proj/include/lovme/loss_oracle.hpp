#pragma once

#include <cstdint>
#include <string>

#include "lovme/dataset.hpp"
#include "lovme/network.hpp"

namespace lovme {

enum class LossMode : std::uint8_t {
  TrueLabel = 0,
  PredictedLabel = 1,
  RandomLabel = 2,
};

LossMode loss_mode_from_string(const std::string& s);
std::string to_string(LossMode mode);

// Fixes the target label a chain's loss landscape is measured against.
// The label is resolved once per sample: random labels are drawn from
// (seed, sample_index), never per step.
struct LossOracle {
  LossMode mode = LossMode::PredictedLabel;
  std::uint64_t seed = 0;

  std::size_t resolve(const Network& net, const Sample& sample,
                      std::size_t sample_index, std::size_t class_count) const;
};

}  // namespace lovme
