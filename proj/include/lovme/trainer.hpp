#pragma once

#include <cstdint>
#include <vector>

#include "lovme/dataset.hpp"
#include "lovme/network.hpp"

namespace lovme {

struct TrainConfig {
  std::vector<std::size_t> hidden_widths = {32, 16};
  double dropout_p = 0.5;  // keep probability
  double learning_rate = 0.1;
  double momentum = 0.9;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
};

struct EpochStats {
  std::size_t epoch = 0;  // 0 is the pre-training evaluation
  double loss = 0.0;
  double accuracy = 0.0;
};

void validate(const TrainConfig& config);

// Fresh network for the given data shape. Relu hidden layers get He-uniform
// weights, the identity output layer Glorot-uniform; biases start at zero.
Network init_network(const TrainConfig& config, std::size_t input_dim,
                     std::size_t class_count, Rng& rng);

// Minibatch SGD with momentum and inverted dropout: a fresh Bernoulli(p) mask
// per sample per visit, kept activations scaled by 1/p during training, no
// scaling at inference. Deterministic given config.seed. `history`, when
// given, receives one maskless full-train evaluation per epoch (epoch 0 =
// initial network). Throws TrainError with the epoch index on divergence.
Network train(const TrainConfig& config, const Dataset& data,
              std::vector<EpochStats>* history = nullptr);

// Maskless mean loss and accuracy over a dataset.
EpochStats evaluate(const Network& net, const Dataset& data);

void write_train_log_csv(const std::string& path,
                         const std::vector<EpochStats>& history);

}  // namespace lovme
