// Copyright (c) 2026 The loranoise Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <memory>
#include <span>

#include "loranoise/matrix.hpp"
#include "loranoise/rng.hpp"

namespace loranoise {

// Low-rank additive adapter on a frozen n x m weight matrix:
//
//   W_eff = W0 + B A,  B: n x r (zero at init),  A: r x m (N(0, 1/r) at init).
//
// Only the factors are trained; W0 never changes. With frozen_a set, A
// stays bitwise at its initial value and only B moves, which turns the
// SGD trajectory of W_eff into an exactly computable projected update.
class AdapterLayer {
 public:
  // B = 0, A sampled iid N(0, 1/rank); requires 1 <= rank <= min(n, m)
  // and eta > 0. The stream is consumed by value.
  AdapterLayer(Matrix w0, RngStream rng, std::size_t rank, bool frozen_a = false,
               double eta = 1e-2);

  std::size_t n() const { return b_.rows(); }
  std::size_t m() const { return a_.cols(); }
  std::size_t rank() const { return a_.rows(); }
  bool frozen_a() const { return frozen_a_; }
  double eta() const { return eta_; }

  const Matrix& pretrained() const { return *w0_; }
  const Matrix& a() const { return a_; }
  const Matrix& b() const { return b_; }

  // (W0 + B A) x without materialising B A; x is m x k.
  Matrix forward(const Matrix& x) const;

  // One SGD step on the factors from the effective-weight gradient
  // (n x m). Both factor gradients are evaluated at the pre-step factor
  // values, then applied together; with frozen_a only B moves.
  void sgd_step(const Matrix& grad_w);

  // W0 + B A, materialised.
  Matrix effective_weight() const;

 private:
  std::shared_ptr<const Matrix> w0_;
  Matrix a_;  // r x m
  Matrix b_;  // n x r
  bool frozen_a_ = false;
  double eta_ = 1e-2;
};

// Loss gradients with respect to the factors, derived from the gradient
// with respect to the effective weight at one step.
struct GradientRecord {
  int step = 0;
  Matrix grad_w;  // n x m
  Matrix grad_a;  // r x m, equals B^T grad_w
  Matrix grad_b;  // n x r, equals grad_w A^T
};

// Builds a consistent GradientRecord from the layer's current factors.
GradientRecord lora_gradients(const AdapterLayer& layer, Matrix grad_w, int step = 0);

// Convenience initialiser: W0 entries iid N(0, 1), then the adapter init
// above, on disjoint substreams.
AdapterLayer init_adapter(RngStream rng, std::size_t n, std::size_t m, std::size_t rank,
                          bool frozen_a = false, double eta = 1e-2);

// Maps a current effective weight to the loss gradient at that weight.
using GradientFn = std::function<Matrix(const Matrix& w_eff)>;

// Closed form of the frozen-A trajectory after the given gradients:
//   W0 - eta * sum_t grads[t] * A0^T A0.
// Each term is computed as ((G * A0^T) * A0), the same association the
// step-by-step trajectory uses.
Matrix projected_update_reference(const Matrix& w0, std::span<const Matrix> grads,
                                  const Matrix& a0, double eta);

// Runs trainable-A and frozen-A trajectories side by side from an
// identical initialisation for `steps` steps, stepping each with grad_fn
// evaluated at its own effective weight. Returns
//   ||W_trainable - W_frozen||_F / ||W_frozen - W0||_F,
// which is second order in eta, or 0 when eta == 0 or nothing moved.
// Throws DivergenceError on non-finite iterates.
double frozen_a_approximation_error(RngStream rng, std::size_t n, std::size_t m,
                                    std::size_t rank, double eta, std::size_t steps,
                                    const GradientFn& grad_fn);

// Quadratic test objective 0.5 * ||W X - Y||_F^2 with fixed random data;
// gradient (W X - Y) X^T. Drives adapter trajectories in tests and
// experiments: smooth, cheap, and the gradient norm scales with the data,
// so the small-step regime is easy to arrange.
struct LeastSquaresProblem {
  Matrix inputs;   // m x k
  Matrix targets;  // n x k

  static LeastSquaresProblem random(RngStream rng, std::size_t n, std::size_t m,
                                    std::size_t k, double scale = 1.0);

  Matrix gradient(const Matrix& w_eff) const;
  double loss(const Matrix& w_eff) const;
  GradientFn gradient_fn() const;
};

}  // namespace loranoise
