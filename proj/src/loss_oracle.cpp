#include "lovme/loss_oracle.hpp"

#include "lovme/errors.hpp"
#include "lovme/rng.hpp"

namespace lovme {

LossMode loss_mode_from_string(const std::string& s) {
  if (s == "true_label") return LossMode::TrueLabel;
  if (s == "predicted_label") return LossMode::PredictedLabel;
  if (s == "random_label") return LossMode::RandomLabel;
  throw ParamError("unknown loss mode '" + s + "'");
}

std::string to_string(LossMode mode) {
  switch (mode) {
    case LossMode::TrueLabel:
      return "true_label";
    case LossMode::PredictedLabel:
      return "predicted_label";
    case LossMode::RandomLabel:
      return "random_label";
  }
  throw ParamError("invalid loss mode value");
}

std::size_t LossOracle::resolve(const Network& net, const Sample& sample,
                                std::size_t sample_index,
                                std::size_t class_count) const {
  switch (mode) {
    case LossMode::TrueLabel:
      return sample.label;
    case LossMode::PredictedLabel:
      return predicted_class(net, sample.features);
    case LossMode::RandomLabel: {
      Rng rng(derive_seed(seed, sample_index));
      return rng.uniform_below(class_count);
    }
  }
  throw ParamError("invalid loss mode value");
}

}  // namespace lovme
