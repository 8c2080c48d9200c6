#include "lovme/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lovme/errors.hpp"

namespace lovme {

std::size_t DropoutMask::popcount() const {
  std::size_t n = 0;
  for (std::uint8_t b : keep) n += (b != 0);
  return n;
}

void validate(const Network& net) {
  if (net.layers.empty()) throw ShapeError("network has no layers");
  if (net.input_dim == 0) throw ShapeError("input_dim must be positive");
  if (net.class_count < 2) throw ParamError("class_count must be >= 2");
  std::size_t expect_in = net.input_dim;
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    const DenseLayer& l = net.layers[k];
    const std::string tag = "layer " + std::to_string(k);
    if (l.in_dim != expect_in)
      throw ShapeError(tag + ": in_dim " + std::to_string(l.in_dim) +
                       " does not match previous out_dim " +
                       std::to_string(expect_in));
    if (l.out_dim == 0) throw ShapeError(tag + ": out_dim must be positive");
    if (l.weights.size() != l.out_dim * l.in_dim)
      throw ShapeError(tag + ": weight count " +
                       std::to_string(l.weights.size()) + " != out_dim*in_dim");
    if (l.biases.size() != l.out_dim)
      throw ShapeError(tag + ": bias count mismatch");
    for (double w : l.weights)
      if (!std::isfinite(w)) throw NumericError(tag + ": non-finite weight");
    for (double b : l.biases)
      if (!std::isfinite(b)) throw NumericError(tag + ": non-finite bias");
    expect_in = l.out_dim;
  }
  if (net.layers.back().out_dim != net.class_count)
    throw ShapeError("final layer out_dim " +
                     std::to_string(net.layers.back().out_dim) +
                     " != class_count " + std::to_string(net.class_count));
}

std::size_t count_maskable_units(const Network& net) {
  std::size_t n = net.mask_inputs ? net.input_dim : 0;
  if (net.layers.size() >= 1) {
    for (std::size_t k = 0; k + 1 < net.layers.size(); ++k)
      n += net.layers[k].out_dim;
  }
  return n;
}

DropoutMask all_keep_mask(const Network& net) {
  return DropoutMask{std::vector<std::uint8_t>(count_maskable_units(net), 1)};
}

DropoutMask all_drop_mask(const Network& net) {
  return DropoutMask{std::vector<std::uint8_t>(count_maskable_units(net), 0)};
}

DropoutMask mask_from_word(std::uint64_t word, std::size_t n_units) {
  DropoutMask m{std::vector<std::uint8_t>(n_units, 0)};
  fill_mask_from_word(word, m);
  return m;
}

void fill_mask_from_word(std::uint64_t word, DropoutMask& mask) {
  for (std::size_t i = 0; i < mask.keep.size(); ++i)
    mask.keep[i] = static_cast<std::uint8_t>((word >> i) & 1u);
}

DropoutMask sample_mask_bernoulli(std::size_t n_units, double p, Rng& rng) {
  if (!(p > 0.0 && p <= 1.0))
    throw ParamError("keep probability must be in (0, 1]");
  DropoutMask m{std::vector<std::uint8_t>(n_units, 0)};
  for (std::size_t i = 0; i < n_units; ++i)
    m.keep[i] = rng.uniform01() < p ? 1 : 0;
  return m;
}

DropoutMask sample_mask_fixed_size(std::size_t n_units, std::size_t n_keep,
                                   Rng& rng) {
  if (n_keep > n_units)
    throw ParamError("kept unit count exceeds maskable unit count");
  DropoutMask m{std::vector<std::uint8_t>(n_units, 0)};
  std::size_t needed = n_keep;
  std::size_t remaining = n_units;
  for (std::size_t i = 0; i < n_units && needed > 0; ++i, --remaining) {
    if (rng.uniform01() * static_cast<double>(remaining) <
        static_cast<double>(needed)) {
      m.keep[i] = 1;
      --needed;
    }
  }
  return m;
}

const std::vector<double>& forward_masked(const Network& net,
                                          const DropoutMask& mask,
                                          std::span<const double> x,
                                          double keep_scale, ForwardTrace& tr) {
  if (x.size() != net.input_dim)
    throw ShapeError("input length " + std::to_string(x.size()) +
                     " != input_dim " + std::to_string(net.input_dim));
  if (mask.size() != count_maskable_units(net))
    throw ShapeError("mask length " + std::to_string(mask.size()) +
                     " != maskable unit count " +
                     std::to_string(count_maskable_units(net)));

  const std::size_t n_layers = net.layers.size();
  tr.pre.resize(n_layers);
  tr.post.resize(n_layers);

  std::size_t mask_off = 0;
  std::span<const double> in = x;
  if (net.mask_inputs) {
    tr.masked_input.resize(net.input_dim);
    for (std::size_t i = 0; i < net.input_dim; ++i)
      tr.masked_input[i] = mask.keep[i] ? keep_scale * x[i] : 0.0;
    in = tr.masked_input;
    mask_off = net.input_dim;
  }

  for (std::size_t k = 0; k < n_layers; ++k) {
    const DenseLayer& l = net.layers[k];
    tr.pre[k].resize(l.out_dim);
    tr.post[k].resize(l.out_dim);
    for (std::size_t r = 0; r < l.out_dim; ++r) {
      const double* wrow = l.weights.data() + r * l.in_dim;
      double z = l.biases[r];
      for (std::size_t c = 0; c < l.in_dim; ++c) z += wrow[c] * in[c];
      tr.pre[k][r] = z;
    }
    const bool last = (k + 1 == n_layers);
    for (std::size_t r = 0; r < l.out_dim; ++r) {
      double a = tr.pre[k][r];
      if (l.activation == Activation::Relu && a < 0.0) a = 0.0;
      if (!last) a = mask.keep[mask_off + r] ? keep_scale * a : 0.0;
      tr.post[k][r] = a;
    }
    if (!last) mask_off += l.out_dim;
    in = tr.post[k];
  }

  for (double v : tr.post.back())
    if (!std::isfinite(v)) throw NumericError("non-finite logit");
  return tr.post.back();
}

std::vector<double> forward(const Network& net, const DropoutMask& mask,
                            std::span<const double> x) {
  ForwardTrace tr;
  return forward_masked(net, mask, x, 1.0, tr);
}

double cross_entropy_from_logits(std::span<const double> logits,
                                 std::size_t y) {
  if (y >= logits.size()) throw ParamError("class index out of range");
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double s = 0.0;
  for (double v : logits) s += std::exp(v - mx);
  const double out = std::log(s) + mx - logits[y];
  return out < 0.0 ? 0.0 : out;  // clamp tiny negative rounding
}

double loss(const Network& net, const DropoutMask& mask,
            std::span<const double> x, std::size_t y) {
  ForwardTrace tr;
  return loss(net, mask, x, y, tr);
}

double loss(const Network& net, const DropoutMask& mask,
            std::span<const double> x, std::size_t y, ForwardTrace& tr) {
  const std::vector<double>& logits = forward_masked(net, mask, x, 1.0, tr);
  return cross_entropy_from_logits(logits, y);
}

std::vector<double> softmax(std::span<const double> logits) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  std::vector<double> out(logits.size());
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    s += out[i];
  }
  for (double& v : out) v /= s;
  return out;
}

std::vector<double> predict_full(const Network& net,
                                 std::span<const double> x) {
  return softmax(forward(net, all_keep_mask(net), x));
}

std::size_t predicted_class(const Network& net, std::span<const double> x) {
  const std::vector<double> p = predict_full(net, x);
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.size(); ++i)
    if (p[i] > p[best]) best = i;
  return best;
}

}  // namespace lovme
