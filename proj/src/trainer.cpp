#include "lovme/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include "lovme/errors.hpp"
#include "lovme/util.hpp"

namespace lovme {

void validate(const TrainConfig& config) {
  if (config.hidden_widths.empty())
    throw ParamError("hidden_widths must be nonempty");
  for (std::size_t w : config.hidden_widths)
    if (w == 0) throw ParamError("hidden widths must be positive");
  if (!(config.dropout_p > 0.0 && config.dropout_p <= 1.0))
    throw ParamError("dropout_p must be in (0, 1]");
  if (!(config.learning_rate > 0.0))
    throw ParamError("learning_rate must be positive");
  if (!(config.momentum >= 0.0 && config.momentum < 1.0))
    throw ParamError("momentum must be in [0, 1)");
  if (config.batch_size == 0) throw ParamError("batch_size must be positive");
}

Network init_network(const TrainConfig& config, std::size_t input_dim,
                     std::size_t class_count, Rng& rng) {
  validate(config);
  Network net;
  net.input_dim = input_dim;
  net.class_count = class_count;
  std::size_t in_dim = input_dim;
  for (std::size_t w : config.hidden_widths) {
    DenseLayer l;
    l.in_dim = in_dim;
    l.out_dim = w;
    l.activation = Activation::Relu;
    const double limit = std::sqrt(6.0 / double(in_dim));  // He-uniform
    l.weights.resize(w * in_dim);
    for (double& v : l.weights) v = limit * (2.0 * rng.uniform01() - 1.0);
    l.biases.assign(w, 0.0);
    net.layers.push_back(std::move(l));
    in_dim = w;
  }
  DenseLayer out;
  out.in_dim = in_dim;
  out.out_dim = class_count;
  out.activation = Activation::Identity;
  const double limit = std::sqrt(6.0 / double(in_dim + class_count));
  out.weights.resize(class_count * in_dim);
  for (double& v : out.weights) v = limit * (2.0 * rng.uniform01() - 1.0);
  out.biases.assign(class_count, 0.0);
  net.layers.push_back(std::move(out));
  validate(net);
  return net;
}

EpochStats evaluate(const Network& net, const Dataset& data) {
  const DropoutMask keep_all = all_keep_mask(net);
  ForwardTrace tr;
  KahanSum<double> loss_sum;
  std::size_t correct = 0;
  for (const Sample& s : data.samples) {
    const std::vector<double>& logits =
        forward_masked(net, keep_all, s.features, 1.0, tr);
    loss_sum.add(cross_entropy_from_logits(logits, s.label));
    std::size_t best = 0;
    for (std::size_t i = 1; i < logits.size(); ++i)
      if (logits[i] > logits[best]) best = i;
    correct += (best == s.label);
  }
  EpochStats st;
  st.loss = loss_sum.value() / double(data.size());
  st.accuracy = double(correct) / double(data.size());
  return st;
}

namespace {

struct LayerGrads {
  std::vector<double> w;
  std::vector<double> b;
};

// Gradient of the cross-entropy loss for one masked sample, accumulated into
// `grads`. Returns the sample's masked loss.
double backprop_sample(const Network& net, const DropoutMask& mask,
                       const Sample& s, double keep_scale, ForwardTrace& tr,
                       std::vector<LayerGrads>& grads,
                       std::vector<std::vector<double>>& delta) {
  const std::vector<double>& logits =
      forward_masked(net, mask, s.features, keep_scale, tr);
  const double sample_loss = cross_entropy_from_logits(logits, s.label);

  const std::size_t n_layers = net.layers.size();
  // dL/dlogits = softmax - onehot
  std::vector<double>& dlast = delta[n_layers - 1];
  dlast = softmax(logits);
  dlast[s.label] -= 1.0;

  std::size_t mask_off = count_maskable_units(net);
  for (std::size_t k = n_layers; k-- > 0;) {
    const DenseLayer& l = net.layers[k];
    const std::vector<double>& d = delta[k];
    std::span<const double> a_prev =
        k == 0 ? (net.mask_inputs ? std::span<const double>(tr.masked_input)
                                  : std::span<const double>(s.features))
               : std::span<const double>(tr.post[k - 1]);
    LayerGrads& g = grads[k];
    for (std::size_t r = 0; r < l.out_dim; ++r) {
      const double dr = d[r];
      if (dr == 0.0) continue;
      double* gw = g.w.data() + r * l.in_dim;
      for (std::size_t c = 0; c < l.in_dim; ++c) gw[c] += dr * a_prev[c];
      g.b[r] += dr;
    }
    if (k == 0) break;

    // propagate through previous layer's mask/scale and activation
    const DenseLayer& prev = net.layers[k - 1];
    mask_off -= prev.out_dim;
    std::vector<double>& dprev = delta[k - 1];
    dprev.assign(prev.out_dim, 0.0);
    for (std::size_t r = 0; r < l.out_dim; ++r) {
      const double dr = d[r];
      if (dr == 0.0) continue;
      const double* wrow = l.weights.data() + r * l.in_dim;
      for (std::size_t c = 0; c < l.in_dim; ++c) dprev[c] += dr * wrow[c];
    }
    for (std::size_t c = 0; c < prev.out_dim; ++c) {
      double factor = mask.keep[mask_off + c] ? keep_scale : 0.0;
      if (prev.activation == Activation::Relu && tr.pre[k - 1][c] <= 0.0)
        factor = 0.0;
      dprev[c] *= factor;
    }
  }
  return sample_loss;
}

}  // namespace

Network train(const TrainConfig& config, const Dataset& data,
              std::vector<EpochStats>* history) {
  validate(config);
  validate(data);

  Rng rng(config.seed);
  Network net = init_network(config, data.feature_dim(), data.class_count, rng);

  if (history) {
    EpochStats st = evaluate(net, data);
    st.epoch = 0;
    history->push_back(st);
  }
  if (config.epochs == 0) return net;

  const std::size_t n = data.size();
  const std::size_t n_units = count_maskable_units(net);
  const double inv_p = 1.0 / config.dropout_p;

  std::vector<LayerGrads> grads(net.layers.size());
  std::vector<LayerGrads> velocity(net.layers.size());
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    grads[k].w.assign(net.layers[k].weights.size(), 0.0);
    grads[k].b.assign(net.layers[k].biases.size(), 0.0);
    velocity[k].w.assign(net.layers[k].weights.size(), 0.0);
    velocity[k].b.assign(net.layers[k].biases.size(), 0.0);
  }
  std::vector<std::vector<double>> delta(net.layers.size());
  ForwardTrace tr;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) {  // Fisher-Yates
      const std::size_t j = rng.uniform_below(i);
      std::swap(order[i - 1], order[j]);
    }
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      for (std::size_t k = 0; k < net.layers.size(); ++k) {
        std::fill(grads[k].w.begin(), grads[k].w.end(), 0.0);
        std::fill(grads[k].b.begin(), grads[k].b.end(), 0.0);
      }
      for (std::size_t i = start; i < end; ++i) {
        const Sample& s = data.samples[order[i]];
        const DropoutMask mask =
            sample_mask_bernoulli(n_units, config.dropout_p, rng);
        double sample_loss;
        try {
          sample_loss = backprop_sample(net, mask, s, inv_p, tr, grads, delta);
        } catch (const NumericError&) {
          sample_loss = std::numeric_limits<double>::quiet_NaN();
        }
        if (!std::isfinite(sample_loss))
          throw TrainError("non-finite training loss at epoch " +
                               std::to_string(epoch),
                           epoch);
      }
      const double scale = config.learning_rate / double(end - start);
      for (std::size_t k = 0; k < net.layers.size(); ++k) {
        DenseLayer& l = net.layers[k];
        for (std::size_t i = 0; i < l.weights.size(); ++i) {
          velocity[k].w[i] =
              config.momentum * velocity[k].w[i] - scale * grads[k].w[i];
          l.weights[i] += velocity[k].w[i];
        }
        for (std::size_t i = 0; i < l.biases.size(); ++i) {
          velocity[k].b[i] =
              config.momentum * velocity[k].b[i] - scale * grads[k].b[i];
          l.biases[i] += velocity[k].b[i];
        }
      }
    }
    EpochStats st;
    try {
      st = evaluate(net, data);
    } catch (const NumericError&) {
      st.loss = std::numeric_limits<double>::quiet_NaN();
    }
    st.epoch = epoch;
    if (!std::isfinite(st.loss))
      throw TrainError(
          "non-finite training loss at epoch " + std::to_string(epoch), epoch);
    if (history) history->push_back(st);
  }
  return net;
}

void write_train_log_csv(const std::string& path,
                         const std::vector<EpochStats>& history) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write train log: " + path);
  out << "epoch,train_loss,train_accuracy\n";
  for (const EpochStats& st : history)
    out << st.epoch << "," << format_double(st.loss) << ","
        << format_double(st.accuracy) << "\n";
}

}  // namespace lovme
