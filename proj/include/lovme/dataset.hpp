#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lovme/network.hpp"

namespace lovme {

enum class Split : std::uint8_t { Train = 0, Test = 1 };

struct Dataset {
  std::vector<Sample> samples;
  std::size_t class_count = 0;
  Split split = Split::Train;

  std::size_t size() const { return samples.size(); }
  std::size_t feature_dim() const {
    return samples.empty() ? 0 : samples.front().features.size();
  }
};

// Nonempty, uniform feature dimension, labels < class_count, finite features.
void validate(const Dataset& data);

}  // namespace lovme
