// Copyright (c) 2026 The loranoise Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "loranoise/matrix.hpp"
#include "loranoise/rng.hpp"

namespace loranoise {

enum class Split { train, validation, auxiliary };

// Labelled feature rows. Sample ids are globally unique, so any two
// splits drawn from the same generator are disjoint by construction.
struct Dataset {
  Matrix features;  // samples x dim
  std::vector<int> labels;
  std::vector<std::size_t> sample_ids;
  Split split = Split::train;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.cols(); }
};

struct SplitSet {
  Dataset train;
  Dataset validation;
  Dataset auxiliary;
};

// Gaussian class clusters: class c is centred at `separation` times a
// fixed random unit direction, with unit isotropic noise. Labels cycle
// round-robin, so all three equally sized splits are class-balanced.
SplitSet synth_dataset(RngStream rng, std::size_t n_per_split, std::size_t dim,
                       std::size_t classes, double separation = 3.0);

struct ToyModelConfig {
  // Layer widths {input, hidden..., output}; weight l maps dims[l] -> dims[l+1].
  std::vector<std::size_t> layer_dims;
  // Which weight layers count as adapters; empty means all of them.
  std::vector<bool> adapter_mask;
};

// Bias-free dense ReLU network with per-sample cross-entropy loss and
// hand-written backprop. Batch gradients are pairwise means over
// per-sample gradients, so they are bitwise reproducible and invariant
// under batch duplication.
class ToyModel {
 public:
  // He-style init: layer l entries iid N(0, 2 / fan_in), one substream
  // per layer.
  static ToyModel create(RngStream rng, ToyModelConfig config);

  std::size_t layer_count() const { return weights_.size(); }
  const std::vector<std::size_t>& layer_dims() const { return dims_; }
  const Matrix& weight(std::size_t layer) const { return weights_[layer]; }
  void set_weight(std::size_t layer, Matrix w);

  const std::vector<bool>& adapter_mask() const { return mask_; }
  void set_adapter_mask(std::vector<bool> mask);
  std::vector<std::size_t> adapter_layers() const;  // indices with mask set

  Matrix logits(const Matrix& features) const;  // batch x classes
  std::vector<double> per_sample_losses(const Dataset& data) const;
  double mean_loss(const Dataset& data) const;
  double accuracy(const Dataset& data) const;

  // Cross-entropy gradients for the rows in `rows` (whole set when empty):
  // per layer, the pairwise mean over per-sample gradients.
  std::vector<Matrix> batch_gradients(const Dataset& data,
                                      std::span<const std::size_t> rows = {}) const;
  // Unreduced per-sample gradients, indexed [sample][layer].
  std::vector<std::vector<Matrix>> per_sample_gradients(
      const Dataset& data, std::span<const std::size_t> rows = {}) const;

  // Same network with a least-squares head: loss 0.5*||logits - targets||^2
  // summed per sample, targets is batch x output.
  std::vector<Matrix> batch_gradients_ls(const Matrix& features, const Matrix& targets) const;

 private:
  std::vector<Matrix> per_sample_gradient(const double* x, int label) const;
  std::vector<Matrix> per_sample_gradient_ls(const double* x, const double* target) const;

  std::vector<std::size_t> dims_;
  std::vector<Matrix> weights_;  // weight l is dims[l+1] x dims[l]
  std::vector<bool> mask_;
};

// Fine-tuning methods. `masked_sgd` is the noise-free baseline that plain
// SGD-updates exactly the adapter layers; dpsgd with z = 0 and a
// non-binding clip reproduces it bitwise.
struct TrainMethod {
  enum class Kind { full, lora, lora_frozen, dpsgd, masked_sgd };
  Kind kind = Kind::full;
  std::size_t rank = 8;       // lora / lora_frozen
  double clip = 1.0;          // dpsgd: per-sample clip threshold c
  double noise_scale = 0.0;   // dpsgd: z (noise std = c*z/b)

  static TrainMethod full();
  static TrainMethod lora(std::size_t rank);
  static TrainMethod lora_frozen(std::size_t rank);
  static TrainMethod dpsgd(double clip, double noise_scale);
  static TrainMethod masked_sgd();

  std::string name() const;
};

struct TrainResult {
  ToyModel model;
  std::vector<double> epoch_losses;  // mean training loss after each epoch
};

// Mini-batch training. `full` updates every layer with plain SGD; the
// other methods touch only adapter layers (lora variants through adapter
// factors, dpsgd through clipped noisy batch gradients). Batches follow a
// seeded shuffle each epoch, identical across methods for a given stream.
// eta == 0 returns the model unchanged (bitwise). Throws DivergenceError
// if the training loss turns non-finite.
TrainResult train(const ToyModel& model, const Dataset& data, const TrainMethod& method,
                  std::size_t epochs, double eta, RngStream rng, std::size_t batch_size = 50);

}  // namespace loranoise
