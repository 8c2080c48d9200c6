#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lovme/rng.hpp"

namespace lovme {

enum class Activation : std::uint8_t { Relu = 0, Identity = 1 };

struct DenseLayer {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::vector<double> weights;  // row-major, out_dim x in_dim
  std::vector<double> biases;   // out_dim
  Activation activation = Activation::Relu;
};

// Dense feedforward classifier. Hidden layers are every layer but the last;
// the last layer emits one logit per class.
//
// Maskable units are the hidden units, concatenated layer by layer in network
// order. When mask_inputs is set (off by default, not persisted to weight
// files) the input units come first in the mask layout.
struct Network {
  std::vector<DenseLayer> layers;
  std::size_t input_dim = 0;
  std::size_t class_count = 0;
  bool mask_inputs = false;
};

// Keep/drop bit per maskable unit. keep[i] == 1 retains unit i.
struct DropoutMask {
  std::vector<std::uint8_t> keep;

  std::size_t size() const { return keep.size(); }
  std::size_t popcount() const;
};

struct Sample {
  std::vector<double> features;
  std::size_t label = 0;
};

// Reusable per-layer buffers for forward passes; lets hot loops (chains,
// exhaustive enumeration) run without per-call allocation.
struct ForwardTrace {
  std::vector<std::vector<double>> pre;   // pre-activation per layer
  std::vector<std::vector<double>> post;  // masked activation per layer
  std::vector<double> masked_input;       // used only when mask_inputs is set
};

// Throws ShapeError / NumericError / ParamError when the invariants do not
// hold: consecutive layer dims agree, final out_dim == class_count >= 2,
// weights finite.
void validate(const Network& net);

std::size_t count_maskable_units(const Network& net);

DropoutMask all_keep_mask(const Network& net);
DropoutMask all_drop_mask(const Network& net);

// Mask whose bit i equals bit i of `word`; used by exhaustive enumeration.
DropoutMask mask_from_word(std::uint64_t word, std::size_t n_units);
void fill_mask_from_word(std::uint64_t word, DropoutMask& mask);

// Each unit kept independently with probability p, 0 < p <= 1.
DropoutMask sample_mask_bernoulli(std::size_t n_units, double p, Rng& rng);

// Uniformly random mask among those with exactly `n_keep` kept units
// (selection sampling, one uniform draw per unit).
DropoutMask sample_mask_fixed_size(std::size_t n_units, std::size_t n_keep,
                                   Rng& rng);

// Logits of the thinned network. Dropped hidden units contribute zero
// activation. `keep_scale` multiplies every kept hidden activation; inference
// uses 1.0, inverted-dropout training passes 1/p.
const std::vector<double>& forward_masked(const Network& net,
                                          const DropoutMask& mask,
                                          std::span<const double> x,
                                          double keep_scale, ForwardTrace& tr);

std::vector<double> forward(const Network& net, const DropoutMask& mask,
                            std::span<const double> x);

// -log softmax(logits)[y], stable log-sum-exp form. Result >= 0.
double cross_entropy_from_logits(std::span<const double> logits,
                                 std::size_t y);

double loss(const Network& net, const DropoutMask& mask,
            std::span<const double> x, std::size_t y);

// Buffer-reusing variant for hot loops.
double loss(const Network& net, const DropoutMask& mask,
            std::span<const double> x, std::size_t y, ForwardTrace& tr);

std::vector<double> softmax(std::span<const double> logits);

// Softmax of the maskless forward pass (the deployed predictor).
std::vector<double> predict_full(const Network& net, std::span<const double> x);

std::size_t predicted_class(const Network& net, std::span<const double> x);

}  // namespace lovme
